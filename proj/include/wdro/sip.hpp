#pragma once

// Solution loops for the dual semi-infinite program: a modified exchange
// method (plain master, eps/2 separation) and a central cutting-surface method
// (centred master, optional cut dropping), plus full enumeration for finite
// supports.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wdro/convex.hpp"
#include "wdro/model.hpp"
#include "wdro/reformulation.hpp"

namespace wdro {

struct Cut {
    Scenario scenario;
    int birth_iteration = 0;
    double w_at_birth = 0.0;
};

/// Working set of scenarios. Two cuts for the same sample whose coordinates
/// agree after rounding to `resolution` are the same cut.
class CutPool {
public:
    explicit CutPool(double resolution = 1e-10);

    /// False when an equivalent cut is already present.
    bool add(Scenario scenario, int birth_iteration, double w_at_birth);
    bool contains(const Scenario& scenario) const;
    std::size_t size() const { return cuts_.size(); }
    bool empty() const { return cuts_.empty(); }
    const std::vector<Cut>& cuts() const { return cuts_; }
    std::vector<Scenario> scenarios() const;
    /// Removes every cut for which drop(cut) is true; returns the count.
    std::size_t remove_if(const std::function<bool(const Cut&)>& drop);

private:
    using Key = std::pair<std::size_t, std::vector<double>>;
    Key key_of(const Scenario& s) const;

    double resolution_;
    std::vector<Cut> cuts_;
    std::set<Key> keys_;
};

enum class SipStatus { Converged, IterationLimit, Stalled };
std::string_view to_string(SipStatus status);

struct IterationRecord {
    int k = 0;
    double w = 0.0;          // centring value; 0 for the exchange method
    double M = 0.0;          // level bound used by the master; 0 for the exchange method
    double objective = 0.0;  // f(x^(k))
    double best_objective = 0.0;  // f of the best eps-feasible point so far (cutting surface)
    double violation = 0.0;  // largest separation value at x^(k)
    bool feasible = false;
    std::size_t cuts_added = 0;
    std::size_t cuts_dropped = 0;
    std::size_t pool_size = 0;
    int master_newton_steps = 0;
    double master_time = 0.0;      // seconds
    double separation_time = 0.0;  // seconds
};

struct SolveTrace {
    std::string method;
    std::vector<IterationRecord> iterations;
    DualPoint final_point;
    SipStatus status = SipStatus::IterationLimit;
    double objective = 0.0;
    double final_violation = 0.0;  // independent sweep at final_point
    std::size_t oracle_calls = 0;
    std::size_t cuts_generated = 0;  // seed cuts excluded
    std::size_t seed_cuts = 0;       // one per sample for the cutting-surface method

    /// Every constraint ever placed in the master, seeds included.
    std::size_t total_cuts() const { return seed_cuts + cuts_generated; }
};

struct SipOptions {
    double eps = 1e-6;
    int max_iters = 500;
    double alpha = 2.0;
    bool drop_cuts = false;
    unsigned threads = 1;
    /// Stop once w <= w_tol_factor * (U - C1).
    double w_tol_factor = 1e-9;
    /// Master accuracy; 0 selects min(1e-8, 1e-3 * eps).
    double master_tolerance = 0.0;
    std::uint64_t seed = 0;  // sampled separation only
    std::function<void(const IterationRecord&)> on_iteration;

    double effective_master_tolerance() const;
};

struct SipResult {
    DualPoint x;
    double objective = 0.0;
    SolveTrace trace;
};

SipResult solve_exchange(const ProblemData& data, const SipOptions& options = {});
SipResult solve_cutting_surface(const ProblemData& data, const SipOptions& options = {});

/// Every constraint of a finite-support instance in one convex program.
/// Throws if a support has a box or the constraint count exceeds the budget.
SipResult solve_full_enumeration(const ProblemData& data, double eps = 1e-6,
                                 std::size_t constraint_budget = 10000);

}  // namespace wdro
