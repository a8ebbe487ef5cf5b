#pragma once

// Separation oracles for
//
//     max_{s in Xi_{y_i}}  h(theta, s) - v_i - v_{m+1} ||s - x^i||_1.
//
// For a scalar-link loss over a box the problem reduces to one dimension: with
// u = theta_0 + theta^T s, the cheapest L1 move from x^i reaching a given u is
// a convex piecewise-linear D(u) (the transport profile). On each linear piece
// phi(u) - v_{m+1} D(u) is convex, so the maximum sits at a breakpoint.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "wdro/model.hpp"
#include "wdro/reformulation.hpp"

namespace wdro {

struct SeparationResult {
    double violation = 0.0;
    Scenario scenario;
    std::size_t sample_index = 0;
    bool exact = false;
};

/// Minimal L1 cost D(u) from an anchor to a box point with link value u,
/// tabulated at its breakpoints (ascending u).
class TransportProfile {
public:
    TransportProfile(std::span<const double> theta, std::span<const double> anchor, const BoxRegion& box);

    const Vector& breakpoints() const { return u_; }
    const Vector& costs() const { return cost_; }
    /// Index of the breakpoint at the box point nearest the anchor.
    std::size_t base_index() const { return base_; }
    /// Slopes of D on consecutive segments, left to right.
    Vector slopes() const;
    /// D(u) by interpolation; +infinity outside [u_min, u_max].
    double cost_at(double u) const;
    /// Box point attaining (breakpoints()[k], costs()[k]).
    Vector witness(std::size_t k) const;

private:
    struct Move {
        std::size_t coord;
        double target;
    };
    Vector base_point_;
    std::vector<Move> up_, down_;  // moves in greedy order
    Vector u_, cost_;
    std::size_t base_ = 0;
};

void write_profile_csv(std::ostream& out, const TransportProfile& profile);

/// Exact global maximizer for scalar-link losses. Throws when the loss has no
/// scalar form.
SeparationResult separate_exact(std::size_t i, const DualPoint& x, const ProblemData& data, double eps);

/// Best of `count` uniform box samples plus deterministic candidates (the box
/// point nearest x^i, up to 2^min(n,10) corners and any finite support points).
SeparationResult separate_sampled(std::size_t i, const DualPoint& x, const ProblemData& data,
                                  std::size_t count, std::uint64_t rng_seed);

struct SeparationOptions {
    double eps = 1e-9;
    std::size_t sample_count = 4096;  // used only for losses without scalar form
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

/// Exact oracle when available, sampled otherwise.
SeparationResult separate(std::size_t i, const DualPoint& x, const ProblemData& data,
                          const SeparationOptions& options);

/// One result per sample, index-ordered.
std::vector<SeparationResult> separate_all(const DualPoint& x, const ProblemData& data,
                                           const SeparationOptions& options);

/// Largest violation over all samples if it is positive (lowest index wins
/// ties), otherwise none.
std::optional<SeparationResult> most_violated(const DualPoint& x, const ProblemData& data,
                                              const SeparationOptions& options);
std::optional<SeparationResult> most_violated(const DualPoint& x, const ProblemData& data, double eps);

}  // namespace wdro
