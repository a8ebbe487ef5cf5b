#pragma once

// Test-only problem builders and brute-force oracles.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <random>

#include "wdro/convex.hpp"
#include "wdro/model.hpp"
#include "wdro/reformulation.hpp"

namespace wdro::testing {

struct RandomProblemSpec {
    std::size_t m = 8;
    std::size_t n = 2;
    double r0 = 0.1;
    double theta_radius = 5.0;
    bool with_box = true;
    bool with_atoms = true;
    std::uint64_t seed = 1;
};

/// Two Gaussian-ish clusters, per-class boxes covering the class samples.
inline ProblemData random_problem(const RandomProblemSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < spec.m; ++i) {
        Sample s;
        s.label = static_cast<int>(i % 2);
        for (std::size_t j = 0; j < spec.n; ++j) s.features.push_back(noise(rng) + (s.label ? 0.8 : -0.8));
        samples.push_back(std::move(s));
    }
    std::array<UncertaintySet, 2> support;
    for (int y : {0, 1}) {
        support[y].label = y;
        Vector lo(spec.n, 1e300), hi(spec.n, -1e300);
        for (const Sample& s : samples) {
            if (s.label != y) continue;
            for (std::size_t j = 0; j < spec.n; ++j) {
                lo[j] = std::min(lo[j], s.features[j] - 0.5);
                hi[j] = std::max(hi[j], s.features[j] + 0.5);
            }
            if (spec.with_atoms || !spec.with_box) support[y].points.push_back(s.features);
        }
        if (spec.with_box) {
            // Shrink slightly so some samples sit outside their box.
            for (std::size_t j = 0; j < spec.n; ++j) {
                lo[j] += 0.6;
                hi[j] -= 0.6;
                if (!(lo[j] < hi[j])) lo[j] = hi[j] = 0.5 * (lo[j] + hi[j]);
            }
            support[y].box = BoxRegion(lo, hi, y);
        }
    }
    return make_problem(Dataset(std::move(samples)), std::move(support), std::make_shared<LogisticLoss>(),
                        spec.r0, ThetaBox::symmetric(spec.n + 1, spec.theta_radius));
}

/// Splitting the box at the anchor gives sub-boxes on which the separation
/// objective is convex in s, so its maximum over the box is attained at a
/// point whose coordinates lie in {lower_j, upper_j, clamp(anchor_j)}.
/// Enumerates all 3^n such points.
inline double vertex_oracle(std::span<const double> theta, double vi, double lambda,
                            std::span<const double> anchor, int label, const BoxRegion& box,
                            Vector* argmax = nullptr) {
    const std::size_t n = box.dimension();
    LogisticLoss loss;
    std::size_t total = 1;
    for (std::size_t j = 0; j < n; ++j) total *= 3;
    double best = -std::numeric_limits<double>::infinity();
    Vector s(n);
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (std::size_t j = 0; j < n; ++j, c /= 3) {
            const std::size_t pick = c % 3;
            s[j] = pick == 0 ? box.lower[j] : pick == 1 ? box.upper[j]
                                                        : std::clamp(anchor[j], box.lower[j], box.upper[j]);
        }
        double dist = 0.0;
        for (std::size_t j = 0; j < n; ++j) dist += std::fabs(s[j] - anchor[j]);
        const double val = loss.evaluate(theta, s, label) - vi - lambda * dist;
        if (val > best) {
            best = val;
            if (argmax) *argmax = s;
        }
    }
    return best;
}

/// Full separation oracle over box plus finite points.
inline double brute_force_violation(std::size_t i, const DualPoint& x, const ProblemData& data) {
    const Sample& xi = data.dataset[i];
    const UncertaintySet& set = data.support_of(i);
    double best = -std::numeric_limits<double>::infinity();
    if (set.box)
        best = vertex_oracle(x.theta, x.v[i], x.radius_multiplier(), xi.features, xi.label, *set.box);
    LogisticLoss loss;
    for (const Vector& p : set.points) {
        double dist = 0.0;
        for (std::size_t j = 0; j < p.size(); ++j) dist += std::fabs(p[j] - xi.features[j]);
        best = std::max(best, loss.evaluate(x.theta, p, xi.label) - x.v[i] - x.radius_multiplier() * dist);
    }
    return best;
}

inline DualPoint random_dual_point(const ProblemData& data, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    DualPoint x;
    for (std::size_t k = 0; k < data.theta_dim(); ++k)
        x.theta.push_back(data.theta_box.lower[k] + unit(rng) * (data.theta_box.upper[k] - data.theta_box.lower[k]));
    for (std::size_t i = 0; i < data.sample_count(); ++i) x.v.push_back(3.0 * unit(rng));
    x.v.push_back(2.0 * unit(rng));
    return x;
}

/// Logistic loss with no scalar form, forcing the general code paths.
class OpaqueLogistic final : public LossModel {
public:
    std::string_view name() const override { return "opaque-logistic"; }
    double evaluate(std::span<const double> theta, std::span<const double> features, int label) const override {
        return inner_.evaluate(theta, features, label);
    }
    void subgradient_theta(std::span<const double> theta, std::span<const double> features, int label,
                           std::span<double> out) const override {
        inner_.subgradient_theta(theta, features, label, out);
    }
    LossBounds bounds_over(const ThetaBox& box, std::span<const UncertaintySet> support) const override {
        return inner_.bounds_over(box, support);
    }
    double subgradient_norm_bound(const ThetaBox& box, std::span<const UncertaintySet> support) const override {
        return inner_.subgradient_norm_bound(box, support);
    }
    double lipschitz_in_features(std::span<const double> theta) const override {
        return inner_.lipschitz_in_features(theta);
    }

private:
    LogisticLoss inner_;
};

/// Grid search over the box with `per_dim` points per coordinate, plus the
/// finite support points.
inline double grid_violation(std::size_t i, const DualPoint& x, const ProblemData& data, std::size_t per_dim) {
    const Sample& xi = data.dataset[i];
    const UncertaintySet& set = data.support_of(i);
    LogisticLoss loss;
    auto score = [&](std::span<const double> s) {
        double dist = 0.0;
        for (std::size_t j = 0; j < s.size(); ++j) dist += std::fabs(s[j] - xi.features[j]);
        return loss.evaluate(x.theta, s, xi.label) - x.v[i] - x.radius_multiplier() * dist;
    };
    double best = -std::numeric_limits<double>::infinity();
    for (const Vector& p : set.points) best = std::max(best, score(p));
    if (set.box) {
        const BoxRegion& box = *set.box;
        const std::size_t n = box.dimension();
        std::vector<std::size_t> idx(n, 0);
        Vector s(n);
        for (;;) {
            for (std::size_t j = 0; j < n; ++j)
                s[j] = box.lower[j] + (box.upper[j] - box.lower[j]) * static_cast<double>(idx[j]) /
                                          static_cast<double>(per_dim - 1);
            best = std::max(best, score(s));
            std::size_t j = 0;
            while (j < n && ++idx[j] == per_dim) idx[j++] = 0;
            if (j == n) break;
        }
    }
    return best;
}

/// Finite-support instance: each class gets its atoms plus a few random
/// points near them.
inline ProblemData random_finite_problem(std::size_t m, std::size_t n, std::size_t per_class, double r0,
                                         std::uint64_t seed, double theta_radius = 5.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < m; ++i) {
        Sample s;
        s.label = static_cast<int>(i % 2);
        for (std::size_t j = 0; j < n; ++j) s.features.push_back(noise(rng) + (s.label ? 0.7 : -0.7));
        samples.push_back(std::move(s));
    }
    std::array<UncertaintySet, 2> support;
    for (int y : {0, 1}) {
        support[y].label = y;
        for (const Sample& s : samples)
            if (s.label == y && support[y].points.size() < per_class) support[y].points.push_back(s.features);
        while (support[y].points.size() < per_class) {
            Vector p(n);
            for (double& c : p) c = noise(rng) + (y ? 0.7 : -0.7);
            support[y].points.push_back(std::move(p));
        }
    }
    return make_problem(Dataset(std::move(samples)), std::move(support), std::make_shared<LogisticLoss>(), r0,
                        ThetaBox::symmetric(n + 1, theta_radius));
}

inline Vector dense_gradient(const ConvexFunction& f, std::span<const double> z) {
    SparseGradient g;
    f.value_and_gradient(z, g);
    Vector dense(z.size(), 0.0);
    g.scatter(dense);
    return dense;
}

/// Largest central-difference gradient error, relative with a unit floor.
inline double max_fd_error(const ConvexFunction& f, Vector z) {
    const Vector analytic = dense_gradient(f, z);
    double worst = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        const double h = 1e-6 * std::max(1.0, std::fabs(z[k]));
        const double keep = z[k];
        z[k] = keep + h;
        const double up = f.value(z);
        z[k] = keep - h;
        const double down = f.value(z);
        z[k] = keep;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, std::fabs(fd - analytic[k]) / std::max(1.0, std::fabs(fd)));
    }
    return worst;
}

inline Vector random_master_point(const ProblemData& data, const MasterLayout& layout, std::mt19937_64& rng) {
    const DualPoint x = random_dual_point(data, rng);
    Vector z(x.theta);
    z.insert(z.end(), x.v.begin(), x.v.end());
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    while (z.size() < layout.size()) z.push_back(unit(rng));
    return z;
}

}  // namespace wdro::testing
