#pragma once

// Core domain types: labeled samples, per-class uncertainty sets, loss models
// and the decision vector x = [theta, v] of the dual semi-infinite program.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wdro {

using Vector = std::vector<double>;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Sample {
    Vector features;
    int label = 0;  // 0 or 1
};

/// Empirical distribution: m samples, each carrying mass 1/m.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<Sample> samples, std::vector<std::string> feature_names = {});

    std::size_t size() const { return samples_.size(); }
    std::size_t dimension() const { return samples_.empty() ? 0 : samples_.front().features.size(); }
    bool empty() const { return samples_.empty(); }

    const Sample& operator[](std::size_t i) const { return samples_[i]; }
    const std::vector<Sample>& samples() const { return samples_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }

    std::size_t count_label(int label) const;
    Dataset subset(std::span<const std::size_t> indices) const;

private:
    std::vector<Sample> samples_;
    std::vector<std::string> feature_names_;
};

struct BoxRegion {
    Vector lower;
    Vector upper;
    int label = 0;

    BoxRegion() = default;
    BoxRegion(Vector lo, Vector hi, int lbl);

    std::size_t dimension() const { return lower.size(); }
    bool contains(std::span<const double> x, double tol = 0.0) const;
    /// Nearest point of the box to x (coordinatewise clamp).
    Vector project(std::span<const double> x) const;
};

/// Support of the feature vector for one class: an optional box joined with a
/// finite point list. A purely finite set models the enumerable case; WRLR
/// uses the class box plus the observed atoms of that class.
struct UncertaintySet {
    int label = 0;
    std::optional<BoxRegion> box;
    std::vector<Vector> points;

    bool is_finite() const { return !box.has_value(); }
    bool empty() const { return !box && points.empty(); }
    bool contains(std::span<const double> x, double tol = 1e-12) const;
    std::size_t dimension() const;
    /// max over the set of |x_j|, per coordinate.
    Vector max_abs() const;
    /// sup of ||x||_2^2 over the set.
    double max_squared_norm() const;
    /// sup of ||s - anchor||_1 over the set.
    double max_l1_distance(std::span<const double> anchor) const;
};

struct ThetaBox {
    Vector lower;
    Vector upper;

    static ThetaBox symmetric(std::size_t dim, double radius);
    std::size_t dimension() const { return lower.size(); }
    bool contains(std::span<const double> theta, double tol = 0.0) const;
    /// max_j max(|lower_j|, |upper_j|) over the slope coordinates (j >= 1).
    double slope_radius() const;
};

/// Decision vector of the dual program: theta (intercept first) and the
/// multipliers v_1..v_m, v_{m+1} (the last entry multiplies the radius).
struct DualPoint {
    Vector theta;
    Vector v;

    std::size_t sample_count() const { return v.empty() ? 0 : v.size() - 1; }
    double radius_multiplier() const { return v.back(); }
};

struct Scenario {
    Vector point;
    std::size_t sample_index = 0;
    int label = 0;
};

/// h(theta, [x, y]) = phi_y(theta_0 + theta^T x) with phi_y convex in u.
class ScalarLink {
public:
    virtual ~ScalarLink() = default;
    virtual double value(double u, int label) const = 0;
    virtual double derivative(double u, int label) const = 0;
    virtual double second_derivative(double u, int label) const = 0;
};

struct LossBounds {
    double lower = 0.0;  // C1
    double upper = 0.0;  // C2
};

class LossModel {
public:
    virtual ~LossModel() = default;

    virtual std::string_view name() const = 0;
    virtual double evaluate(std::span<const double> theta, std::span<const double> features,
                            int label) const = 0;
    virtual void subgradient_theta(std::span<const double> theta,
                                   std::span<const double> features, int label,
                                   std::span<double> out) const = 0;
    virtual LossBounds bounds_over(const ThetaBox& theta_box,
                                   std::span<const UncertaintySet> support) const = 0;
    /// Strict bound B > ||d_theta h|| over the theta box and the support.
    virtual double subgradient_norm_bound(const ThetaBox& theta_box,
                                          std::span<const UncertaintySet> support) const = 0;
    /// C(theta): Lipschitz constant of h(theta, .) under the L1 metric.
    virtual double lipschitz_in_features(std::span<const double> theta) const = 0;
    virtual const ScalarLink* scalar_form() const { return nullptr; }
};

/// log(1 + exp(-yhat * u)) with yhat = 2y - 1 and u = theta_0 + theta^T x.
class LogisticLoss final : public LossModel, public ScalarLink {
public:
    static constexpr double kBoundMargin = 1e-6;

    std::string_view name() const override { return "logistic"; }
    double evaluate(std::span<const double> theta, std::span<const double> features,
                    int label) const override;
    void subgradient_theta(std::span<const double> theta, std::span<const double> features,
                           int label, std::span<double> out) const override;
    LossBounds bounds_over(const ThetaBox& theta_box,
                           std::span<const UncertaintySet> support) const override;
    double subgradient_norm_bound(const ThetaBox& theta_box,
                                  std::span<const UncertaintySet> support) const override;
    double lipschitz_in_features(std::span<const double> theta) const override;
    const ScalarLink* scalar_form() const override { return this; }

    double value(double u, int label) const override;
    double derivative(double u, int label) const override;
    double second_derivative(double u, int label) const override;

    /// Largest |u| reachable over the theta box and the support.
    static double max_abs_link(const ThetaBox& theta_box, std::span<const UncertaintySet> support);
};

/// log(1 + e^z) without overflow.
double softplus(double z);
/// 1 / (1 + e^{-z}) without overflow.
double sigmoid(double z);

/// theta_0 + theta[1:]^T x.
double link_value(std::span<const double> theta, std::span<const double> features);

/// f(x) = (1/m) sum_i v_i + r0 * v_{m+1}.
double objective_f(const DualPoint& x, double r0);

/// g_i(x, s) = h(theta, s) - v_i - v_{m+1} * ||s - x^i||_1.
double constraint_g(const DualPoint& x, std::size_t i, const Scenario& s, const Dataset& data,
                    const LossModel& loss);

}  // namespace wdro
