#pragma once

// Assembly of the dual semi-infinite program
//
//     min_x  f(x) = (1/m) sum_i v_i + r0 v_{m+1}
//     s.t.   g_i(x, s) = h(theta, s) - v_i - v_{m+1} ||s - x^i||_1 <= 0,
//            s in support(y^i), i = 1..m,   x = [theta, v] in Theta x H,
//
// and of the finite convex programs solved along the way: the centred master
// of the cutting-surface loop, the plain master of the exchange loop and the
// empirical (sample-average) problem.

#include <array>
#include <memory>
#include <span>

#include "wdro/convex.hpp"
#include "wdro/model.hpp"

namespace wdro {

struct DerivedConstants {
    double C1 = 0.0;      // lower bound of h on Theta x Xi
    double C2 = 0.0;      // upper bound of h on Theta x Xi
    double B = 0.0;       // strict bound on ||d_theta h||
    double L = 0.0;       // max_i sup_{s in Xi_{y_i}} ||s - x^i||_1
    double Bprime = 0.0;  // centring coefficient
    double U = 0.0;       // strict upper bound on the objective
    Vector v_lower;       // H polytope, m + 1 entries
    Vector v_upper;

    double rate_bound() const { return 1.0 - 1.0 / (2.0 * Bprime + 1.0); }
};

struct ProblemData {
    Dataset dataset;
    std::array<UncertaintySet, 2> support;  // indexed by label
    std::shared_ptr<const LossModel> loss;
    double r0 = 0.0;
    ThetaBox theta_box;
    DerivedConstants derived;

    std::size_t sample_count() const { return dataset.size(); }
    std::size_t feature_count() const { return dataset.dimension(); }
    std::size_t theta_dim() const { return dataset.dimension() + 1; }
    const UncertaintySet& support_of(std::size_t i) const { return support[dataset[i].label]; }
    /// Lipschitz constant of h in s under L1, uniform over the theta box.
    double feature_lipschitz_bound() const { return theta_box.slope_radius(); }
};

DerivedConstants derive_constants(const ProblemData& data);

/// Validates the pieces and fills `derived`.
ProblemData make_problem(Dataset dataset, std::array<UncertaintySet, 2> support,
                         std::shared_ptr<const LossModel> loss, double r0, ThetaBox theta_box);

/// Variable ordering shared by the master programs: [theta | v_1..v_m, v_{m+1} | w | t].
/// The exchange master and the enumerated program stop after v.
struct MasterLayout {
    std::size_t theta_dim = 0;
    std::size_t m = 0;
    bool centred = false;

    std::size_t v(std::size_t i) const { return theta_dim + i; }
    std::size_t radius() const { return theta_dim + m; }
    std::size_t w() const { return theta_dim + m + 1; }
    std::size_t t() const { return theta_dim + m + 2; }
    std::size_t size() const { return theta_dim + m + 1 + (centred ? 2 : 0); }
    DualPoint extract(std::span<const double> z) const;
};

/// g_i(x, s) + coeff * w <= 0 as a convex-kernel constraint. `w_index` is
/// ignored when coeff == 0.
ConstraintPtr make_cut_constraint(const ProblemData& data, const Scenario& cut,
                                  const MasterLayout& layout, double coeff);

/// Centred master: max w s.t. t + w <= M, f(x) - t + B' w <= 0,
/// g_i(x, s) + B' w <= 0 for every cut, x in Theta x H.
ConvexProgram build_master(const ProblemData& data, std::span<const Scenario> cuts, double M);

/// Plain master: max -f(x) s.t. g_i(x, s) <= 0 for every cut, x in Theta x H.
ConvexProgram build_exchange_master(const ProblemData& data, std::span<const Scenario> cuts);

/// Epigraph form of min_theta (1/m) sum_i h(theta, xi^i): variables [theta | t].
ConvexProgram build_edo(const ProblemData& data);

struct EdoSolution {
    Vector theta;
    double value = 0.0;
    SolveReport report;
};

EdoSolution solve_edo(const ProblemData& data, const SolverOptions& options = {});

}  // namespace wdro
