#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "wdro/instance_io.hpp"
#include "wdro/separation.hpp"
#include "wdro/sip.hpp"
#include "wdro/trace_io.hpp"

using namespace wdro;
using namespace wdro::testing;

namespace {

/// h = 1/2 everywhere, bounds [1/2, 1].
class FlatLoss final : public LossModel {
public:
    std::string_view name() const override { return "flat"; }
    double evaluate(std::span<const double>, std::span<const double>, int) const override { return 0.5; }
    void subgradient_theta(std::span<const double>, std::span<const double>, int, std::span<double> out) const override {
        for (double& o : out) o = 0.0;
    }
    LossBounds bounds_over(const ThetaBox&, std::span<const UncertaintySet>) const override { return {0.5, 1.0}; }
    double subgradient_norm_bound(const ThetaBox&, std::span<const UncertaintySet>) const override { return 1.0; }
    double lipschitz_in_features(std::span<const double>) const override { return 0.0; }
};

}  // namespace

TEST_CASE("cut pool deduplicates by rounded coordinates") {
    CutPool pool;
    CHECK(pool.add({{1.0, 2.0}, 0, 0}, 0, 1.0));
    CHECK_FALSE(pool.add({{1.0 + 1e-12, 2.0}, 0, 0}, 1, 1.0));
    CHECK(pool.add({{1.0, 2.0}, 1, 0}, 1, 1.0));
    CHECK(pool.add({{1.0 + 1e-8, 2.0}, 0, 0}, 2, 0.5));
    CHECK(pool.size() == 3);
    CHECK(pool.remove_if([](const Cut& c) { return c.birth_iteration == 1; }) == 1);
    CHECK(pool.size() == 2);
    CHECK(pool.add({{1.0, 2.0}, 1, 0}, 3, 1.0));
    CHECK_THROWS_AS(CutPool(0.0), Error);
}

TEST_CASE("both loops match full enumeration on finite supports") {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const ProblemData data = random_finite_problem(2 + seed % 4, 2, 6, 0.1, seed);
        SipOptions options;
        options.eps = 1e-6;
        const SipResult truth = solve_full_enumeration(data, options.eps);
        const SipResult ex = solve_exchange(data, options);
        const SipResult cs = solve_cutting_surface(data, options);
        CHECK(ex.trace.status == SipStatus::Converged);
        CHECK(cs.trace.status == SipStatus::Converged);
        CHECK(std::fabs(ex.objective - truth.objective) <= 2 * options.eps);
        CHECK(std::fabs(cs.objective - truth.objective) <= 2 * options.eps);
        CHECK(ex.trace.final_violation <= options.eps);
        CHECK(cs.trace.final_violation <= options.eps);
    }
}

TEST_CASE("exchange stops at once when the empty master is feasible") {
    std::vector<Sample> samples{{{0.0}, 0}, {{1.0}, 1}};
    std::array<UncertaintySet, 2> support;
    for (int y : {0, 1}) {
        support[y].label = y;
        support[y].box = BoxRegion({-1.0}, {2.0}, y);
    }
    const ProblemData data = make_problem(Dataset(samples), support, std::make_shared<FlatLoss>(), 0.5,
                                          ThetaBox::symmetric(2, 1.0));
    const SipResult r = solve_exchange(data);
    REQUIRE(r.trace.iterations.size() == 1);
    CHECK(r.trace.iterations[0].k == 0);
    CHECK(r.trace.status == SipStatus::Converged);
    CHECK(r.objective == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("halving eps moves the exchange objective by at most eps") {
    RandomProblemSpec spec;
    spec.m = 6;
    spec.seed = 5;
    const ProblemData data = random_problem(spec);
    SipOptions coarse;
    coarse.eps = 1e-4;
    SipOptions fine = coarse;
    fine.eps = coarse.eps / 2;
    const double a = solve_exchange(data, coarse).objective;
    const double b = solve_exchange(data, fine).objective;
    CHECK(std::fabs(a - b) <= coarse.eps);
}

TEST_CASE("cutting surface recovers the empirical value as r0 shrinks") {
    RandomProblemSpec spec;
    spec.m = 10;
    spec.n = 2;
    spec.r0 = 1e-6;
    spec.seed = 13;
    const ProblemData data = random_problem(spec);
    SipOptions options;
    options.eps = 1e-6;
    const SipResult cs = solve_cutting_surface(data, options);
    const double edo = solve_edo(data).value;
    const double lambda = data.feature_lipschitz_bound();
    CHECK(cs.objective - edo >= -2 * options.eps);
    CHECK(cs.objective - edo <= lambda * spec.r0 + 2 * options.eps);
}

TEST_CASE("cut dropping does not change the optimum") {
    RandomProblemSpec spec;
    spec.m = 12;
    spec.n = 3;
    spec.seed = 21;
    const ProblemData data = random_problem(spec);
    SipOptions keep;
    keep.eps = 1e-6;
    SipOptions drop = keep;
    drop.drop_cuts = true;
    const SipResult a = solve_cutting_surface(data, keep);
    const SipResult b = solve_cutting_surface(data, drop);
    CHECK(std::fabs(a.objective - b.objective) <= 2 * keep.eps);
    std::size_t dropped = 0;
    for (const IterationRecord& r : b.trace.iterations) dropped += r.cuts_dropped;
    CHECK(dropped > 0);
}

TEST_CASE("cutting surface sequences are monotone without dropping") {
    RandomProblemSpec spec;
    spec.m = 10;
    spec.n = 3;
    spec.seed = 2;
    const ProblemData data = random_problem(spec);
    const SipResult r = solve_cutting_surface(data);
    const auto& it = r.trace.iterations;
    REQUIRE(it.size() > 2);
    for (std::size_t k = 1; k < it.size(); ++k) {
        CHECK(it[k].w <= it[k - 1].w + 1e-9);
        CHECK(it[k].M <= it[k - 1].M);
        CHECK(it[k].best_objective <= it[k - 1].best_objective + 1e-12);
    }
    for (std::size_t k = 0; k + 1 < it.size(); ++k) CHECK(it[k].pool_size <= it[k + 1].pool_size + it[k + 1].cuts_dropped);
}

TEST_CASE("optimal value grows with the radius") {
    RandomProblemSpec spec;
    spec.m = 8;
    spec.seed = 17;
    double previous = -1.0;
    for (double r0 : {0.01, 0.05, 0.1, 0.5, 1.0}) {
        spec.r0 = r0;
        const double value = solve_cutting_surface(random_problem(spec)).objective;
        CHECK(value >= previous - 1e-6);
        previous = value;
    }
}

TEST_CASE("full enumeration collapses on a single atom") {
    std::vector<Sample> samples{{{0.4, -0.3}, 1}};
    std::array<UncertaintySet, 2> support;
    support[0].label = 0;
    support[1].label = 1;
    support[1].points.push_back(samples[0].features);
    const ProblemData data = make_problem(Dataset(samples), support, std::make_shared<LogisticLoss>(), 0.3,
                                          ThetaBox::symmetric(3, 2.0));
    const SipResult r = solve_full_enumeration(data);
    // min over the theta box of softplus(-(t0 + t.x)) puts theta at the matching corner.
    const double u = 2.0 * (1.0 + 0.4 + 0.3);
    CHECK(r.objective == doctest::Approx(softplus(-u)).epsilon(1e-6));
    CHECK(r.x.v[0] == doctest::Approx(softplus(-u)).epsilon(1e-5));
    CHECK(r.x.v[1] <= 1e-6);
}

TEST_CASE("full enumeration is symmetric and dominates the empirical value") {
    std::vector<Sample> samples{{{1.0}, 1}, {{-1.0}, 0}};
    std::array<UncertaintySet, 2> support;
    support[0].label = 0;
    support[0].points = {{-1.0}, {0.0}};
    support[1].label = 1;
    support[1].points = {{1.0}, {0.0}};
    const ProblemData data = make_problem(Dataset(samples), support, std::make_shared<LogisticLoss>(), 0.2,
                                          ThetaBox::symmetric(2, 3.0));
    const SipResult r = solve_full_enumeration(data);
    CHECK(r.x.v[0] == doctest::Approx(r.x.v[1]).epsilon(1e-6));
    CHECK(r.objective >= solve_edo(data).value - 1e-8);

    ProblemData boxed = data;
    boxed.support[0].box = BoxRegion({-1.0}, {1.0}, 0);
    CHECK_THROWS_AS(solve_full_enumeration(boxed), Error);
    CHECK_THROWS_AS(solve_full_enumeration(data, 1e-6, 2), Error);
}

TEST_CASE("exchange cuts are pairwise distinct per sample") {
    RandomProblemSpec spec;
    spec.m = 8;
    spec.n = 3;
    spec.seed = 9;
    const ProblemData data = random_problem(spec);
    SipOptions options;
    const SipResult r = solve_exchange(data, options);
    CHECK(r.trace.status == SipStatus::Converged);
    CHECK(r.trace.cuts_generated > 0);
    std::size_t added = 0;
    for (const IterationRecord& it : r.trace.iterations) added += it.cuts_added;
    CHECK(added == r.trace.iterations.back().pool_size);
}

TEST_CASE("returned points satisfy an independent sweep") {
    RandomProblemSpec spec;
    spec.m = 10;
    spec.n = 4;
    spec.seed = 31;
    const ProblemData data = random_problem(spec);
    SipOptions options;
    options.eps = 1e-6;
    for (const SipResult& r : {solve_exchange(data, options), solve_cutting_surface(data, options)}) {
        double worst = -1e300;
        for (std::size_t i = 0; i < data.sample_count(); ++i) worst = std::max(worst, brute_force_violation(i, r.x, data));
        CHECK(worst <= options.eps);
        for (std::size_t i = 0; i < r.x.v.size(); ++i) {
            CHECK(r.x.v[i] >= data.derived.v_lower[i]);
            CHECK(r.x.v[i] <= data.derived.v_upper[i]);
        }
    }
}

TEST_CASE("traces round-trip through JSON lines") {
    const ProblemData data = random_problem({});
    std::vector<IterationRecord> streamed;
    SipOptions options;
    options.on_iteration = [&](const IterationRecord& r) { streamed.push_back(r); };
    const SipResult r = solve_cutting_surface(data, options);
    REQUIRE(streamed.size() == r.trace.iterations.size());
    std::stringstream io;
    write_trace_jsonl(io, r.trace);
    const std::vector<IterationRecord> back = read_trace_jsonl(io);
    REQUIRE(back.size() == r.trace.iterations.size());
    for (std::size_t k = 0; k < back.size(); ++k) {
        CHECK(back[k].k == r.trace.iterations[k].k);
        CHECK(back[k].w == r.trace.iterations[k].w);
        CHECK(back[k].objective == r.trace.iterations[k].objective);
        CHECK(back[k].pool_size == r.trace.iterations[k].pool_size);
    }
}

TEST_CASE("invalid solver options throw") {
    const ProblemData data = random_problem({});
    SipOptions bad;
    bad.eps = 0.0;
    CHECK_THROWS_AS(solve_cutting_surface(data, bad), Error);
    bad = {};
    bad.alpha = 1.0;
    CHECK_THROWS_AS(solve_cutting_surface(data, bad), Error);
    bad = {};
    bad.max_iters = 0;
    CHECK_THROWS_AS(solve_exchange(data, bad), Error);
}

TEST_CASE("iteration limit is reported") {
    const ProblemData data = random_problem({});
    SipOptions options;
    options.max_iters = 2;
    const SipResult r = solve_cutting_surface(data, options);
    CHECK(r.trace.status == SipStatus::IterationLimit);
    CHECK(r.trace.iterations.size() == 2);
}

TEST_CASE("instance json round trip") {
    const ProblemData data = random_finite_problem(4, 2, 3, 0.2, 3);
    const ProblemData back = problem_from_json(nlohmann::json::parse(problem_to_json(data).dump()));
    CHECK(back.r0 == data.r0);
    CHECK(back.theta_box.upper == data.theta_box.upper);
    CHECK(back.derived.U == data.derived.U);
    CHECK(solve_exchange(back).objective == solve_exchange(data).objective);
    nlohmann::json bad = problem_to_json(data);
    bad["r0"] = 0.0;
    CHECK_THROWS_AS(problem_from_json(bad), Error);
    bad = problem_to_json(data);
    bad["support"].erase("1");
    CHECK_THROWS_AS(problem_from_json(bad), Error);
}
