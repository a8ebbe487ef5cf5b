#include "wdro/sip.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "wdro/separation.hpp"

namespace wdro {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

SolverOptions master_options(const SipOptions& options) {
    SolverOptions s;
    s.tolerance = options.effective_master_tolerance();
    s.feasibility_tolerance = std::max(s.feasibility_tolerance, s.tolerance);
    return s;
}

SeparationOptions separation_options(const SipOptions& options, double eps, int k) {
    SeparationOptions s;
    s.eps = eps;
    s.threads = options.threads;
    s.seed = options.seed + static_cast<std::uint64_t>(k);
    return s;
}

double max_violation(const std::vector<SeparationResult>& results) {
    double worst = -std::numeric_limits<double>::infinity();
    for (const SeparationResult& r : results) worst = std::max(worst, r.violation);
    return worst;
}

void check_options(const SipOptions& options) {
    if (!(options.eps > 0.0)) throw Error("eps must be positive");
    if (options.max_iters < 1) throw Error("max_iters must be at least 1");
    if (!(options.alpha > 1.0)) throw Error("alpha must exceed 1");
    if (!(options.w_tol_factor > 0.0)) throw Error("w tolerance factor must be positive");
}

SolveReport solve_master(const ConvexProgram& program, const SolverOptions& options) {
    SolveReport report = solve(program, options);
    if (report.status == SolveStatus::Infeasible)
        throw Error("master problem infeasible; check the theta box and the H bounds");
    return report;
}

/// Independent sweep at the returned point with the exact oracle when available.
double final_sweep(const DualPoint& x, const ProblemData& data, const SipOptions& options, std::size_t& calls) {
    SeparationOptions s = separation_options(options, std::min(options.eps, 1e-9), -1);
    calls += data.sample_count();
    return max_violation(separate_all(x, data, s));
}

}  // namespace

std::string_view to_string(SipStatus status) {
    switch (status) {
        case SipStatus::Converged: return "converged";
        case SipStatus::IterationLimit: return "iteration_limit";
        case SipStatus::Stalled: return "stalled";
    }
    return "unknown";
}

double SipOptions::effective_master_tolerance() const {
    if (master_tolerance > 0.0) return master_tolerance;
    return std::min(1e-8, 1e-3 * eps);
}

SipResult solve_exchange(const ProblemData& data, const SipOptions& options) {
    check_options(options);
    const SolverOptions solver = master_options(options);
    const MasterLayout layout{data.theta_dim(), data.sample_count(), false};
    SipResult result;
    SolveTrace& trace = result.trace;
    trace.method = "exchange";
    CutPool pool;

    trace.status = SipStatus::IterationLimit;
    for (int k = 0; k < options.max_iters; ++k) {
        IterationRecord rec;
        rec.k = k;
        const auto t0 = Clock::now();
        const SolveReport report = solve_master(build_exchange_master(data, pool.scenarios()), solver);
        rec.master_time = seconds_since(t0);
        rec.master_newton_steps = report.iterations;
        result.x = layout.extract(report.solution);
        rec.objective = objective_f(result.x, data.r0);

        const auto t1 = Clock::now();
        const std::vector<SeparationResult> seps =
            separate_all(result.x, data, separation_options(options, 0.5 * options.eps, k));
        rec.separation_time = seconds_since(t1);
        trace.oracle_calls += seps.size();
        rec.violation = max_violation(seps);
        rec.feasible = rec.violation <= 0.5 * options.eps;
        rec.best_objective = rec.objective;

        bool stop = rec.feasible;
        if (!stop) {
            for (const SeparationResult& r : seps)
                if (r.violation > 0.5 * options.eps && pool.add(r.scenario, k + 1, 0.0)) ++rec.cuts_added;
            trace.cuts_generated += rec.cuts_added;
            if (rec.cuts_added == 0) {
                trace.status = SipStatus::Stalled;
                stop = true;
            }
        } else {
            trace.status = SipStatus::Converged;
        }
        rec.pool_size = pool.size();
        trace.iterations.push_back(rec);
        if (options.on_iteration) options.on_iteration(rec);
        if (stop) break;
    }

    result.objective = objective_f(result.x, data.r0);
    trace.final_point = result.x;
    trace.objective = result.objective;
    trace.final_violation = final_sweep(result.x, data, options, trace.oracle_calls);
    return result;
}

SipResult solve_cutting_surface(const ProblemData& data, const SipOptions& options) {
    check_options(options);
    const SolverOptions solver = master_options(options);
    const DerivedConstants& d = data.derived;
    const std::size_t m = data.sample_count();
    const MasterLayout layout{data.theta_dim(), m, true};
    const double w_tol = options.w_tol_factor * (d.U - d.C1);

    SipResult result;
    SolveTrace& trace = result.trace;
    trace.method = "cutting_surface";

    // x~(0) = [theta0, 0] with theta0 from the empirical problem.
    DualPoint best;
    best.theta = solve_edo(data, solver).theta;
    best.v.assign(m + 1, 0.0);
    double best_f = objective_f(best, data.r0);
    double M = d.U;

    // One seed cut per sample at its own atom.
    CutPool pool;
    for (std::size_t i = 0; i < m; ++i)
        pool.add(Scenario{data.dataset[i].features, i, data.dataset[i].label}, 0, d.U - d.C1);
    trace.seed_cuts = pool.size();

    trace.status = SipStatus::IterationLimit;
    for (int k = 1; k <= options.max_iters; ++k) {
        IterationRecord rec;
        rec.k = k;
        rec.M = M;
        const auto t0 = Clock::now();
        const SolveReport report = solve_master(build_master(data, pool.scenarios(), M), solver);
        rec.master_time = seconds_since(t0);
        rec.master_newton_steps = report.iterations;
        const DualPoint x = layout.extract(report.solution);
        const double w = report.solution[layout.w()];
        rec.w = w;
        rec.objective = objective_f(x, data.r0);

        if (w <= w_tol) {
            rec.best_objective = best_f;
            rec.pool_size = pool.size();
            rec.feasible = true;
            trace.iterations.push_back(rec);
            if (options.on_iteration) options.on_iteration(rec);
            trace.status = SipStatus::Converged;
            break;
        }

        const auto t1 = Clock::now();
        const std::vector<SeparationResult> seps = separate_all(x, data, separation_options(options, options.eps, k));
        rec.separation_time = seconds_since(t1);
        trace.oracle_calls += seps.size();
        rec.violation = max_violation(seps);

        for (const SeparationResult& r : seps)
            if (r.violation > 0.0 && pool.add(r.scenario, k, w)) ++rec.cuts_added;
        trace.cuts_generated += rec.cuts_added;
        if (rec.cuts_added == 0) {
            // Every violated scenario is already a cut: x is feasible up to master accuracy.
            rec.feasible = true;
            best = x;
            best_f = rec.objective;
            M = std::max(rec.objective, d.C1);
        }
        rec.best_objective = best_f;

        if (options.drop_cuts) {
            const double Bp = d.Bprime;
            rec.cuts_dropped = pool.remove_if([&](const Cut& c) {
                return c.w_at_birth >= options.alpha * w &&
                       constraint_g(x, c.scenario.sample_index, c.scenario, data.dataset, *data.loss) + Bp * w < 0.0;
            });
        }
        rec.pool_size = pool.size();
        trace.iterations.push_back(rec);
        if (options.on_iteration) options.on_iteration(rec);
    }

    result.x = best;
    result.objective = best_f;
    trace.final_point = best;
    trace.objective = best_f;
    trace.final_violation = final_sweep(best, data, options, trace.oracle_calls);
    return result;
}

SipResult solve_full_enumeration(const ProblemData& data, double eps, std::size_t constraint_budget) {
    if (!(eps > 0.0)) throw Error("eps must be positive");
    std::vector<Scenario> cuts;
    for (std::size_t i = 0; i < data.sample_count(); ++i) {
        const UncertaintySet& set = data.support_of(i);
        if (!set.is_finite()) throw Error("full enumeration needs finite supports");
        for (const Vector& p : set.points) cuts.push_back({p, i, data.dataset[i].label});
        if (cuts.size() > constraint_budget) throw Error("full enumeration exceeds the constraint budget");
    }
    SolverOptions solver;
    solver.tolerance = std::min(1e-8, 1e-3 * eps);
    solver.feasibility_tolerance = std::max(solver.feasibility_tolerance, solver.tolerance);
    const SolveReport report = solve_master(build_exchange_master(data, cuts), solver);

    SipResult result;
    const MasterLayout layout{data.theta_dim(), data.sample_count(), false};
    result.x = layout.extract(report.solution);
    result.objective = objective_f(result.x, data.r0);
    SolveTrace& trace = result.trace;
    trace.method = "full_enumeration";
    trace.status = report.status == SolveStatus::Optimal ? SipStatus::Converged : SipStatus::IterationLimit;
    trace.final_point = result.x;
    trace.objective = result.objective;
    trace.cuts_generated = cuts.size();
    IterationRecord rec;
    rec.objective = result.objective;
    rec.best_objective = result.objective;
    rec.pool_size = cuts.size();
    rec.master_newton_steps = report.iterations;
    trace.iterations.push_back(rec);
    SipOptions sweep;
    sweep.eps = eps;
    trace.final_violation = final_sweep(result.x, data, sweep, trace.oracle_calls);
    return result;
}

}  // namespace wdro
