#pragma once

// Log-barrier Newton solver for
//
//     maximize  c^T z   s.t.  g_j(z) <= 0 (smooth, convex),  lower <= z <= upper.
//
// Constraints report gradients as a contiguous dense block plus a few sparse
// extras, so the barrier Hessian of a cut that touches theta, v_i, v_{m+1} and w
// costs O(|theta|^2) instead of O(|z|^2).

#include <Eigen/Dense>

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "wdro/model.hpp"

namespace wdro {

struct SparseGradient {
    std::size_t block_offset = 0;
    Vector block;                                      // d g / d z[block_offset + k]
    std::vector<std::pair<std::size_t, double>> extras;  // indices outside the block

    void clear() {
        block.clear();
        extras.clear();
    }
    double directional(std::span<const double> direction) const;
    void scatter(std::span<double> dense, double scale = 1.0) const;
};

class ConvexFunction {
public:
    virtual ~ConvexFunction() = default;

    virtual double value(std::span<const double> z) const = 0;
    /// Returns g(z) and fills the gradient. Extras must not overlap the block.
    virtual double value_and_gradient(std::span<const double> z, SparseGradient& grad) const = 0;

    virtual bool has_hessian() const { return false; }
    /// H += scale * Hessian of g at z. Only called when has_hessian().
    virtual void add_hessian(std::span<const double> /*z*/, double /*scale*/,
                             Eigen::MatrixXd& /*hessian*/) const {}
};

using ConstraintPtr = std::shared_ptr<const ConvexFunction>;

/// a^T z + b, stored sparsely.
class LinearFunction final : public ConvexFunction {
public:
    LinearFunction(std::vector<std::pair<std::size_t, double>> terms, double constant);

    double value(std::span<const double> z) const override;
    double value_and_gradient(std::span<const double> z, SparseGradient& grad) const override;
    bool has_hessian() const override { return true; }
    void add_hessian(std::span<const double>, double, Eigen::MatrixXd&) const override {}

private:
    std::vector<std::pair<std::size_t, double>> terms_;
    double constant_;
};

struct ConvexProgram {
    Vector lower;      // entries may be -infinity
    Vector upper;      // entries may be +infinity
    Vector objective;  // maximized
    std::vector<ConstraintPtr> constraints;
    /// Optional strictly feasible starting point; phase 1 runs when absent or
    /// not strictly feasible.
    std::optional<Vector> start;

    std::size_t variable_count() const { return objective.size(); }
    void validate() const;
    double max_violation(std::span<const double> z) const;
};

enum class SolveStatus { Optimal, Infeasible, IterationLimit };
std::string_view to_string(SolveStatus status);

struct SolveReport {
    Vector solution;
    double objective = 0.0;
    SolveStatus status = SolveStatus::IterationLimit;
    double kkt_residual = 0.0;
    double max_violation = 0.0;
    int iterations = 0;  // total Newton steps, phase 1 included
};

struct SolverOptions {
    double tolerance = 1e-8;           // barrier gap and stationarity
    double feasibility_tolerance = 1e-8;
    int max_newton_per_stage = 200;
    double barrier_factor = 10.0;
    double initial_barrier = 1.0;
    double newton_decrement_tolerance = 1e-11;
};

SolveReport solve(const ConvexProgram& program, const SolverOptions& options = {});
SolveReport solve(const ConvexProgram& program, double tolerance);

}  // namespace wdro
