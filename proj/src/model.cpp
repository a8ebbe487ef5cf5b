#include "wdro/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wdro/kernels.hpp"

namespace wdro {

Dataset::Dataset(std::vector<Sample> samples, std::vector<std::string> feature_names)
    : samples_(std::move(samples)), feature_names_(std::move(feature_names)) {
    if (samples_.empty()) throw Error("dataset must contain at least one sample");
    const std::size_t n = samples_.front().features.size();
    for (const Sample& s : samples_) {
        if (s.features.size() != n) throw Error("samples have inconsistent feature dimension");
        if (s.label != 0 && s.label != 1) throw Error("labels must be 0 or 1");
    }
    if (!feature_names_.empty() && feature_names_.size() != n)
        throw Error("feature_names length does not match feature dimension");
}

std::size_t Dataset::count_label(int label) const {
    return static_cast<std::size_t>(std::count_if(
        samples_.begin(), samples_.end(), [label](const Sample& s) { return s.label == label; }));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    std::vector<Sample> picked;
    picked.reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= samples_.size()) throw Error("subset index out of range");
        picked.push_back(samples_[i]);
    }
    return Dataset(std::move(picked), feature_names_);
}

BoxRegion::BoxRegion(Vector lo, Vector hi, int lbl)
    : lower(std::move(lo)), upper(std::move(hi)), label(lbl) {
    if (lower.size() != upper.size()) throw Error("box bounds have different lengths");
    for (std::size_t j = 0; j < lower.size(); ++j)
        if (!(lower[j] <= upper[j])) throw Error("box lower bound exceeds upper bound");
}

bool BoxRegion::contains(std::span<const double> x, double tol) const {
    if (x.size() != lower.size()) return false;
    for (std::size_t j = 0; j < x.size(); ++j)
        if (x[j] < lower[j] - tol || x[j] > upper[j] + tol) return false;
    return true;
}

Vector BoxRegion::project(std::span<const double> x) const {
    Vector p(x.begin(), x.end());
    for (std::size_t j = 0; j < p.size(); ++j) p[j] = std::clamp(p[j], lower[j], upper[j]);
    return p;
}

bool UncertaintySet::contains(std::span<const double> x, double tol) const {
    if (box && box->contains(x, tol)) return true;
    for (const Vector& p : points) {
        if (p.size() != x.size()) continue;
        bool same = true;
        for (std::size_t j = 0; j < p.size() && same; ++j) same = std::fabs(p[j] - x[j]) <= tol;
        if (same) return true;
    }
    return false;
}

std::size_t UncertaintySet::dimension() const {
    if (box) return box->dimension();
    return points.empty() ? 0 : points.front().size();
}

Vector UncertaintySet::max_abs() const {
    Vector out(dimension(), 0.0);
    if (box)
        for (std::size_t j = 0; j < out.size(); ++j)
            out[j] = std::max(std::fabs(box->lower[j]), std::fabs(box->upper[j]));
    for (const Vector& p : points)
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::max(out[j], std::fabs(p[j]));
    return out;
}

double UncertaintySet::max_squared_norm() const {
    double best = 0.0;
    if (box) {
        double s = 0.0;
        for (std::size_t j = 0; j < box->dimension(); ++j)
            s += std::max(box->lower[j] * box->lower[j], box->upper[j] * box->upper[j]);
        best = s;
    }
    for (const Vector& p : points)
        best = std::max(best, std::inner_product(p.begin(), p.end(), p.begin(), 0.0));
    return best;
}

double UncertaintySet::max_l1_distance(std::span<const double> anchor) const {
    double best = 0.0;
    if (box) {
        double s = 0.0;
        for (std::size_t j = 0; j < box->dimension(); ++j)
            s += std::max(std::fabs(box->lower[j] - anchor[j]), std::fabs(box->upper[j] - anchor[j]));
        best = s;
    }
    for (const Vector& p : points) best = std::max(best, kernels::l1_distance(p, anchor));
    return best;
}

ThetaBox ThetaBox::symmetric(std::size_t dim, double radius) {
    if (!(radius > 0.0)) throw Error("theta box radius must be positive");
    return ThetaBox{Vector(dim, -radius), Vector(dim, radius)};
}

bool ThetaBox::contains(std::span<const double> theta, double tol) const {
    if (theta.size() != lower.size()) return false;
    for (std::size_t j = 0; j < theta.size(); ++j)
        if (theta[j] < lower[j] - tol || theta[j] > upper[j] + tol) return false;
    return true;
}

double ThetaBox::slope_radius() const {
    double r = 0.0;
    for (std::size_t j = 1; j < lower.size(); ++j)
        r = std::max({r, std::fabs(lower[j]), std::fabs(upper[j])});
    return r;
}

double softplus(double z) {
    return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double link_value(std::span<const double> theta, std::span<const double> features) {
    return theta[0] + kernels::dot(theta.subspan(1), features);
}

namespace {

inline double signed_label(int label) { return label == 1 ? 1.0 : -1.0; }

void check_theta(std::span<const double> theta, std::span<const double> features) {
    if (theta.size() != features.size() + 1)
        throw Error("theta must have one more entry than the feature vector");
}

}  // namespace

double LogisticLoss::value(double u, int label) const { return softplus(-signed_label(label) * u); }

double LogisticLoss::derivative(double u, int label) const {
    const double y = signed_label(label);
    return -y * sigmoid(-y * u);
}

double LogisticLoss::second_derivative(double u, int label) const {
    const double p = sigmoid(-signed_label(label) * u);
    return p * (1.0 - p);
}

double LogisticLoss::evaluate(std::span<const double> theta, std::span<const double> features,
                              int label) const {
    check_theta(theta, features);
    return value(link_value(theta, features), label);
}

void LogisticLoss::subgradient_theta(std::span<const double> theta,
                                     std::span<const double> features, int label,
                                     std::span<double> out) const {
    check_theta(theta, features);
    if (out.size() != theta.size()) throw Error("gradient buffer has wrong size");
    const double d = derivative(link_value(theta, features), label);
    out[0] = d;
    for (std::size_t j = 0; j < features.size(); ++j) out[j + 1] = d * features[j];
}

double LogisticLoss::max_abs_link(const ThetaBox& theta_box,
                                  std::span<const UncertaintySet> support) {
    const std::size_t n = theta_box.dimension() - 1;
    Vector xmax(n, 0.0);
    for (const UncertaintySet& set : support) {
        if (set.empty()) continue;
        if (set.dimension() != n) throw Error("support dimension does not match theta box");
        const Vector a = set.max_abs();
        for (std::size_t j = 0; j < n; ++j) xmax[j] = std::max(xmax[j], a[j]);
    }
    auto radius = [&](std::size_t j) {
        return std::max(std::fabs(theta_box.lower[j]), std::fabs(theta_box.upper[j]));
    };
    double u = radius(0);
    for (std::size_t j = 0; j < n; ++j) u += radius(j + 1) * xmax[j];
    return u;
}

LossBounds LogisticLoss::bounds_over(const ThetaBox& theta_box,
                                     std::span<const UncertaintySet> support) const {
    const double u = max_abs_link(theta_box, support);
    return {softplus(-u), softplus(u)};
}

double LogisticLoss::subgradient_norm_bound(const ThetaBox&,
                                            std::span<const UncertaintySet> support) const {
    double sq = 0.0;
    for (const UncertaintySet& set : support) sq = std::max(sq, set.max_squared_norm());
    return std::sqrt(1.0 + sq) + kBoundMargin;
}

double LogisticLoss::lipschitz_in_features(std::span<const double> theta) const {
    double c = 0.0;
    for (std::size_t j = 1; j < theta.size(); ++j) c = std::max(c, std::fabs(theta[j]));
    return c;
}

double objective_f(const DualPoint& x, double r0) {
    if (x.v.size() < 2) throw Error("dual point needs at least one sample multiplier");
    const std::size_t m = x.sample_count();
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += x.v[i];
    return sum / static_cast<double>(m) + r0 * x.v[m];
}

double constraint_g(const DualPoint& x, std::size_t i, const Scenario& s, const Dataset& data,
                    const LossModel& loss) {
    if (x.sample_count() != data.size()) throw Error("dual point does not match dataset size");
    if (i >= data.size()) throw Error("sample index out of range");
    const Sample& xi = data[i];
    if (s.label != xi.label) throw Error("scenario label differs from the sample label");
    if (s.point.size() != xi.features.size()) throw Error("scenario dimension mismatch");
    const double dist = kernels::l1_distance(s.point, xi.features);
    return loss.evaluate(x.theta, s.point, s.label) - x.v[i] - x.radius_multiplier() * dist;
}

}  // namespace wdro
