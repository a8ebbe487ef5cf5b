#include "wdro/separation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "wdro/kernels.hpp"
#include "wdro/parallel.hpp"

namespace wdro {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TransportProfile::TransportProfile(std::span<const double> theta, std::span<const double> anchor,
                                   const BoxRegion& box) {
    const std::size_t n = box.dimension();
    if (theta.size() != n + 1 || anchor.size() != n) throw Error("transport profile dimension mismatch");
    base_point_ = box.project(anchor);
    const double base_cost = kernels::l1_distance(base_point_, anchor);
    const double base_u = link_value(theta, base_point_);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::fabs(theta[a + 1]) > std::fabs(theta[b + 1]); });

    struct Step {
        double du;
        double dcost;
    };
    std::vector<Step> up_steps, down_steps;
    for (std::size_t j : order) {
        const double slope = theta[j + 1];
        if (slope == 0.0 || !(box.lower[j] < box.upper[j])) continue;
        const double up_target = slope > 0.0 ? box.upper[j] : box.lower[j];
        const double down_target = slope > 0.0 ? box.lower[j] : box.upper[j];
        const double up_dist = std::fabs(up_target - base_point_[j]);
        const double down_dist = std::fabs(down_target - base_point_[j]);
        if (up_dist > 0.0) {
            up_.push_back({j, up_target});
            up_steps.push_back({std::fabs(slope) * up_dist, up_dist});
        }
        if (down_dist > 0.0) {
            down_.push_back({j, down_target});
            down_steps.push_back({std::fabs(slope) * down_dist, down_dist});
        }
    }

    const std::size_t left = down_steps.size();
    u_.assign(left + 1 + up_steps.size(), base_u);
    cost_.assign(u_.size(), base_cost);
    base_ = left;
    for (std::size_t k = 0; k < left; ++k) {
        u_[left - 1 - k] = u_[left - k] - down_steps[k].du;
        cost_[left - 1 - k] = cost_[left - k] + down_steps[k].dcost;
    }
    for (std::size_t k = 0; k < up_steps.size(); ++k) {
        u_[left + 1 + k] = u_[left + k] + up_steps[k].du;
        cost_[left + 1 + k] = cost_[left + k] + up_steps[k].dcost;
    }
}

Vector TransportProfile::slopes() const {
    Vector s;
    for (std::size_t k = 0; k + 1 < u_.size(); ++k) s.push_back((cost_[k + 1] - cost_[k]) / (u_[k + 1] - u_[k]));
    return s;
}

double TransportProfile::cost_at(double u) const {
    if (u < u_.front() || u > u_.back()) return kInf;
    if (u_.size() == 1) return cost_.front();
    const auto it = std::upper_bound(u_.begin(), u_.end(), u);
    const std::size_t k = it == u_.end() ? u_.size() - 1 : static_cast<std::size_t>(it - u_.begin());
    const std::size_t a = k - 1;
    const double frac = (u - u_[a]) / (u_[k] - u_[a]);
    return cost_[a] + frac * (cost_[k] - cost_[a]);
}

Vector TransportProfile::witness(std::size_t k) const {
    if (k >= u_.size()) throw Error("breakpoint index out of range");
    Vector p = base_point_;
    if (k > base_)
        for (std::size_t s = 0; s < k - base_; ++s) p[up_[s].coord] = up_[s].target;
    else
        for (std::size_t s = 0; s < base_ - k; ++s) p[down_[s].coord] = down_[s].target;
    return p;
}

void write_profile_csv(std::ostream& out, const TransportProfile& profile) {
    out << "index,u,cost,is_base\n" << std::setprecision(17);
    for (std::size_t k = 0; k < profile.breakpoints().size(); ++k)
        out << k << ',' << profile.breakpoints()[k] << ',' << profile.costs()[k] << ','
            << (k == profile.base_index() ? 1 : 0) << '\n';
}

namespace {

void check_inputs(std::size_t i, const DualPoint& x, const ProblemData& data) {
    if (i >= data.sample_count()) throw Error("sample index out of range");
    if (x.sample_count() != data.sample_count()) throw Error("dual point does not match the dataset");
    if (x.theta.size() != data.theta_dim()) throw Error("theta has wrong dimension");
}

SeparationResult finish(std::size_t i, const DualPoint& x, const ProblemData& data, Vector point, bool exact) {
    SeparationResult r;
    r.sample_index = i;
    r.exact = exact;
    r.scenario.point = std::move(point);
    r.scenario.sample_index = i;
    r.scenario.label = data.dataset[i].label;
    r.violation = constraint_g(x, i, r.scenario, data.dataset, *data.loss);
    return r;
}

}  // namespace

SeparationResult separate_exact(std::size_t i, const DualPoint& x, const ProblemData& data, double eps) {
    if (!(eps > 0.0)) throw Error("separation accuracy must be positive");
    check_inputs(i, x, data);
    const ScalarLink* link = data.loss->scalar_form();
    if (!link) throw Error("exact separation needs a scalar-link loss; use separate_sampled");

    const Sample& xi = data.dataset[i];
    const UncertaintySet& set = data.support_of(i);
    const double vi = x.v[i];
    const double lambda = x.radius_multiplier();

    double best = -kInf;
    Vector best_point;
    if (set.box) {
        const TransportProfile profile(x.theta, xi.features, *set.box);
        std::size_t best_k = 0;
        for (std::size_t k = 0; k < profile.breakpoints().size(); ++k) {
            const double val = link->value(profile.breakpoints()[k], xi.label) - vi - lambda * profile.costs()[k];
            if (val > best) {
                best = val;
                best_k = k;
            }
        }
        best_point = profile.witness(best_k);
    }
    for (const Vector& p : set.points) {
        const double val = link->value(link_value(x.theta, p), xi.label) - vi -
                           lambda * kernels::l1_distance(p, xi.features);
        if (val > best) {
            best = val;
            best_point = p;
        }
    }
    if (best_point.empty()) throw Error("sample has an empty support set");
    return finish(i, x, data, std::move(best_point), true);
}

SeparationResult separate_sampled(std::size_t i, const DualPoint& x, const ProblemData& data,
                                  std::size_t count, std::uint64_t rng_seed) {
    if (count < 1) throw Error("sample count must be at least 1");
    check_inputs(i, x, data);
    const Sample& xi = data.dataset[i];
    const UncertaintySet& set = data.support_of(i);
    const double vi = x.v[i];
    const double lambda = x.radius_multiplier();

    double best = -kInf;
    Vector best_point;
    auto consider = [&](const Vector& s) {
        const double val = data.loss->evaluate(x.theta, s, xi.label) - vi - lambda * kernels::l1_distance(s, xi.features);
        if (val > best) {
            best = val;
            best_point = s;
        }
    };

    for (const Vector& p : set.points) consider(p);
    if (set.box) {
        const BoxRegion& box = *set.box;
        const std::size_t n = box.dimension();
        consider(box.project(xi.features));
        const std::size_t bits = std::min<std::size_t>(n, 10);
        Vector corner(n);
        for (std::size_t mask = 0; mask < (std::size_t{1} << bits); ++mask) {
            for (std::size_t j = 0; j < n; ++j)
                corner[j] = (mask >> (j % 10)) & 1U ? box.upper[j] : box.lower[j];
            consider(corner);
        }
        std::mt19937_64 rng(rng_seed + 0x9E3779B97F4A7C15ULL * (i + 1));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        Vector s(n);
        for (std::size_t c = 0; c < count; ++c) {
            for (std::size_t j = 0; j < n; ++j) s[j] = box.lower[j] + unit(rng) * (box.upper[j] - box.lower[j]);
            consider(s);
        }
    }
    if (best_point.empty()) throw Error("sample has an empty support set");
    return finish(i, x, data, std::move(best_point), set.is_finite());
}

SeparationResult separate(std::size_t i, const DualPoint& x, const ProblemData& data,
                          const SeparationOptions& options) {
    if (data.loss->scalar_form()) return separate_exact(i, x, data, options.eps);
    return separate_sampled(i, x, data, options.sample_count, options.seed);
}

std::vector<SeparationResult> separate_all(const DualPoint& x, const ProblemData& data,
                                           const SeparationOptions& options) {
    std::vector<SeparationResult> results(data.sample_count());
    parallel_for(results.size(), options.threads,
                 [&](std::size_t i) { results[i] = separate(i, x, data, options); });
    return results;
}

std::optional<SeparationResult> most_violated(const DualPoint& x, const ProblemData& data,
                                              const SeparationOptions& options) {
    std::vector<SeparationResult> all = separate_all(x, data, options);
    std::size_t best = 0;
    for (std::size_t i = 1; i < all.size(); ++i)
        if (all[i].violation > all[best].violation) best = i;
    if (!(all[best].violation > 0.0)) return std::nullopt;
    return std::move(all[best]);
}

std::optional<SeparationResult> most_violated(const DualPoint& x, const ProblemData& data, double eps) {
    SeparationOptions options;
    options.eps = eps;
    return most_violated(x, data, options);
}

}  // namespace wdro
