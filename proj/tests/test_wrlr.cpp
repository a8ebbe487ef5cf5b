#include <chrono>
#include <cmath>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "wdro/kernels.hpp"
#include "wdro/wrlr.hpp"

using namespace wdro;

namespace {

Dataset blobs(std::size_t m, std::size_t n, double shift, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < m; ++i) {
        Sample s;
        s.label = static_cast<int>(i % 2);
        for (std::size_t j = 0; j < n; ++j) s.features.push_back(noise(rng) + (s.label ? shift : -shift));
        samples.push_back(std::move(s));
    }
    return Dataset(std::move(samples));
}

double brute_auc(const Vector& scores, const std::vector<int>& labels) {
    double wins = 0.0, pairs = 0.0;
    for (std::size_t a = 0; a < scores.size(); ++a)
        for (std::size_t b = 0; b < scores.size(); ++b)
            if (labels[a] == 1 && labels[b] == 0) {
                pairs += 1.0;
                wins += scores[a] > scores[b] ? 1.0 : scores[a] == scores[b] ? 0.5 : 0.0;
            }
    return wins / pairs;
}

}  // namespace

TEST_CASE("regions from two-point and one-point classes") {
    const Dataset d({{{0.0}, 1}, {{2.0}, 1}, {{5.0}, 0}});
    const auto r = build_regions(d);
    CHECK(r[1].lower[0] == doctest::Approx(1.0 - std::sqrt(2.0)));
    CHECK(r[1].upper[0] == doctest::Approx(1.0 + std::sqrt(2.0)));
    CHECK(r[0].lower[0] == 5.0);
    CHECK(r[0].upper[0] == 5.0);
    CHECK(r[0].label == 0);
    CHECK(r[1].label == 1);
}

TEST_CASE("samples may lie outside their class box") {
    const Dataset d({{{0.0}, 1}, {{0.0}, 1}, {{0.0}, 1}, {{10.0}, 1}, {{1.0}, 0}, {{2.0}, 0}});
    const auto r = build_regions(d);
    const Vector outlier{10.0};
    CHECK_FALSE(r[1].contains(outlier));
    CHECK(kernels::l1_distance(r[1].project(outlier), outlier) > 0.0);
    // The support still contains the atom itself.
    const auto support = build_support(d);
    CHECK(support[1].contains(outlier));
    CHECK_FALSE(build_support(d, false)[1].contains(outlier));
}

TEST_CASE("regions are invariant under sample permutation") {
    const Dataset d = blobs(15, 3, 0.5, 4);
    std::vector<std::size_t> perm(d.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(1);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto a = build_regions(d);
    const auto b = build_regions(d.subset(perm));
    for (int y : {0, 1})
        for (std::size_t j = 0; j < 3; ++j) {
            CHECK(a[y].lower[j] == doctest::Approx(b[y].lower[j]).epsilon(1e-14));
            CHECK(a[y].upper[j] == doctest::Approx(b[y].upper[j]).epsilon(1e-14));
        }
}

TEST_CASE("regions need both classes") {
    CHECK_THROWS_AS(build_regions(Dataset({{{0.0}, 1}, {{1.0}, 1}})), Error);
}

TEST_CASE("auc examples") {
    CHECK(auc(Vector{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
    CHECK(auc(Vector{0.5, 0.5, 0.5, 0.5}, std::vector<int>{0, 1, 0, 1}) == 0.5);
    const Vector s{0.9, 0.8, 0.4, 0.3};
    const std::vector<int> y{1, 0, 1, 0};
    CHECK(auc(s, y) == doctest::Approx(brute_auc(s, y)));
    CHECK(auc(s, y) == doctest::Approx(0.75));
    CHECK_THROWS_AS(auc(Vector{0.1, 0.2}, std::vector<int>{1, 1}), Error);
    CHECK_THROWS_AS(auc(Vector{0.1}, std::vector<int>{1, 0}), Error);
}

TEST_CASE("auc matches pair counting and ignores monotone transforms") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> coarse(0, 6);
    for (int trial = 0; trial < 50; ++trial) {
        Vector s;
        std::vector<int> y;
        for (int k = 0; k < 30; ++k) {
            s.push_back(0.1 * coarse(rng));
            y.push_back(k % 3 == 0 ? 1 : 0);
        }
        CHECK(auc(s, y) == doctest::Approx(brute_auc(s, y)).epsilon(1e-12));
        Vector e = s;
        for (double& v : e) v = std::exp(v);
        CHECK(auc(e, y) == doctest::Approx(auc(s, y)).epsilon(1e-12));
    }
}

TEST_CASE("predicted scores") {
    FittedModel m;
    m.theta = {0.0, 0.0, 0.0};
    CHECK(predict_score(m, Vector{1.0, -2.0}) == 0.5);
    m.theta = {40.0, 0.0, 0.0};
    CHECK(predict_score(m, Vector{1.0, -2.0}) == doctest::Approx(1.0));
    m.theta = {0.3, 1.5, -0.5};
    double prev = 0.0;
    for (double x = -5.0; x <= 5.0; x += 0.25) {
        const double s = predict_score(m, Vector{x, 0.0});
        CHECK(s > prev);
        CHECK(s < 1.0);
        prev = s;
    }
    CHECK_THROWS_AS(predict_score(m, Vector{1.0}), Error);
}

TEST_CASE("small radius reproduces logistic regression") {
    const Dataset d = blobs(20, 2, 0.5, 7);
    WrlrOptions options;
    options.sip.eps = 1e-7;
    const FittedModel lr = fit_lr(d, options);
    const FittedModel w = fit_wrlr(d, 1e-6, options);
    CHECK(lr.kind == ModelKind::LR);
    CHECK(w.kind == ModelKind::WRLR);
    REQUIRE(w.trace.has_value());
    for (std::size_t k = 0; k < lr.theta.size(); ++k) CHECK(std::fabs(lr.theta[k] - w.theta[k]) <= 1e-3);
}

TEST_CASE("larger radius gives a larger robust objective") {
    const Dataset d = blobs(16, 2, 0.8, 11);
    const double small = fit_wrlr(d, 0.01).trace->objective;
    const double large = fit_wrlr(d, 1.0).trace->objective;
    CHECK(large >= small - 1e-6);
}

TEST_CASE("separable desk-scale fit stays within budget") {
    const Dataset d = blobs(50, 9, 1.5, 5);
    const auto start = std::chrono::steady_clock::now();
    const FittedModel m = fit_wrlr(d, 0.05);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(secs < 60.0);
    CHECK(m.trace->iterations.size() <= 100);
    CHECK(m.trace->status == SipStatus::Converged);
    for (double t : m.theta) CHECK(std::fabs(t) <= 10.0 + 1e-12);
}

TEST_CASE("radius selection") {
    const Dataset d = blobs(24, 2, 0.7, 2);
    WrlrOptions options;
    const Vector zero{0.0};
    const CvReport only = select_r0(d, zero, options, 4, 1);
    CHECK(only.chosen_r0 == 0.0);
    CHECK(only.scored_folds == 4);

    const Vector dup{0.1, 0.0, 0.1};
    const CvReport rep = select_r0(d, dup, options, 4, 1);
    CHECK(rep.mean_auc[0] == rep.mean_auc[2]);
    const std::size_t best = rep.mean_auc[1] >= rep.mean_auc[0] ? 1 : 0;
    CHECK(rep.chosen_r0 == dup[best]);

    // stratified: class counts per fold differ by at most one
    for (int y : {0, 1}) {
        int lo = 1 << 30, hi = 0;
        for (int f = 0; f < 4; ++f) {
            int c = 0;
            for (std::size_t i = 0; i < d.size(); ++i) c += d[i].label == y && rep.fold_of[i] == f;
            lo = std::min(lo, c);
            hi = std::max(hi, c);
        }
        CHECK(hi - lo <= 1);
    }

    const CvReport again = select_r0(d, dup, options, 4, 1, 3);
    CHECK(again.mean_auc == rep.mean_auc);
    CHECK(again.fold_of == rep.fold_of);
    CHECK_THROWS_AS(select_r0(d, Vector{}, options), Error);
    CHECK_THROWS_AS(select_r0(d, Vector{-0.1}, options), Error);
}

TEST_CASE("radius selection on label-free data hovers near chance") {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Sample> samples;
    for (int i = 0; i < 120; ++i) samples.push_back({{noise(rng), noise(rng)}, i % 2});
    const Dataset d(std::move(samples));
    const Vector grid{0.0, 0.1, 1.0};
    const CvReport a = select_r0(d, grid, {}, 4, 5);
    for (double m : a.mean_auc) CHECK(std::fabs(m - 0.5) < 0.15);
    const CvReport b = select_r0(d, grid, {}, 4, 5);
    CHECK(a.chosen_r0 == b.chosen_r0);
}

TEST_CASE("model json round trip") {
    FittedModel m;
    m.kind = ModelKind::WRLR;
    m.r0_used = 0.05;
    m.theta = {0.1, -2.5, 1.0 / 3.0};
    m.feature_names = {"a", "b"};
    const nlohmann::json j = model_to_json(m);
    CHECK(j.at("n") == 2);
    const FittedModel back = model_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.kind == m.kind);
    CHECK(back.r0_used == m.r0_used);
    CHECK(back.theta == m.theta);
    CHECK(back.feature_names == m.feature_names);
    nlohmann::json bad = j;
    bad["kind"] = "SVM";
    CHECK_THROWS_AS(model_from_json(bad), Error);
    bad = j;
    bad["n"] = 5;
    CHECK_THROWS_AS(model_from_json(bad), Error);
}

TEST_CASE("fits are deterministic") {
    const Dataset d = blobs(14, 3, 0.6, 8);
    CHECK(fit_wrlr(d, 0.1).theta == fit_wrlr(d, 0.1).theta);
    CHECK(fit_lr(d).theta == fit_lr(d).theta);
    CHECK_THROWS_AS(fit_wrlr(d, 0.0), Error);
}
