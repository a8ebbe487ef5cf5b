#include "wdro/convex.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "wdro/kernels.hpp"

namespace wdro {

double SparseGradient::directional(std::span<const double> direction) const {
    double d = kernels::dot(block, direction.subspan(block_offset, block.size()));
    for (const auto& [idx, val] : extras) d += val * direction[idx];
    return d;
}

void SparseGradient::scatter(std::span<double> dense, double scale) const {
    kernels::axpy(scale, block, dense.subspan(block_offset, block.size()));
    for (const auto& [idx, val] : extras) dense[idx] += scale * val;
}

LinearFunction::LinearFunction(std::vector<std::pair<std::size_t, double>> terms, double constant)
    : terms_(std::move(terms)), constant_(constant) {}

double LinearFunction::value(std::span<const double> z) const {
    double v = constant_;
    for (const auto& [idx, a] : terms_) v += a * z[idx];
    return v;
}

double LinearFunction::value_and_gradient(std::span<const double> z, SparseGradient& grad) const {
    grad.clear();
    grad.block_offset = 0;
    grad.extras = terms_;
    return value(z);
}

std::string_view to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Optimal: return "optimal";
        case SolveStatus::Infeasible: return "infeasible";
        case SolveStatus::IterationLimit: return "iteration_limit";
    }
    return "unknown";
}

void ConvexProgram::validate() const {
    const std::size_t n = objective.size();
    if (n == 0) throw Error("convex program has no variables");
    if (lower.size() != n || upper.size() != n) throw Error("box bounds do not match variable count");
    for (std::size_t k = 0; k < n; ++k)
        if (!(lower[k] < upper[k])) throw Error("convex program box has empty interior");
    if (start && start->size() != n) throw Error("start point has wrong dimension");
    for (const auto& c : constraints)
        if (!c) throw Error("null constraint in convex program");
}

double ConvexProgram::max_violation(std::span<const double> z) const {
    double worst = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k)
        worst = std::max({worst, lower[k] - z[k], z[k] - upper[k]});
    for (const auto& c : constraints) worst = std::max(worst, c->value(z));
    return worst;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Damped BFGS model of one constraint's Hessian on its gradient support.
struct CurvatureModel {
    std::vector<std::size_t> support;
    Eigen::MatrixXd approx;
    Eigen::VectorXd last_z;
    Eigen::VectorXd last_grad;
    bool has_last = false;

    void init(const SparseGradient& g) {
        support.clear();
        for (std::size_t k = 0; k < g.block.size(); ++k) support.push_back(g.block_offset + k);
        for (const auto& e : g.extras) support.push_back(e.first);
        approx = Eigen::MatrixXd::Zero(support.size(), support.size());
    }

    Eigen::VectorXd gather_grad(const SparseGradient& g) const {
        Eigen::VectorXd out(support.size());
        std::size_t k = 0;
        for (double b : g.block) out[k++] = b;
        for (const auto& e : g.extras) out[k++] = e.second;
        return out;
    }

    void observe(std::span<const double> z, const SparseGradient& g) {
        if (support.empty()) init(g);
        Eigen::VectorXd zs(support.size());
        for (std::size_t k = 0; k < support.size(); ++k) zs[k] = z[support[k]];
        const Eigen::VectorXd gs = gather_grad(g);
        if (has_last) update(zs - last_z, gs - last_grad);
        last_z = zs;
        last_grad = gs;
        has_last = true;
    }

    void update(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
        const double sy = s.dot(y);
        if (!(sy > 1e-14 * s.norm() * y.norm()) || s.norm() == 0.0) return;
        if (approx.isZero(0.0)) approx = Eigen::MatrixXd::Identity(s.size(), s.size()) * (y.dot(y) / sy);
        const Eigen::VectorXd bs = approx * s;
        const double sbs = s.dot(bs);
        if (!(sbs > 0.0)) return;
        // Powell damping keeps the model positive definite.
        double theta = 1.0;
        if (sy < 0.2 * sbs) theta = 0.8 * sbs / (sbs - sy);
        const Eigen::VectorXd r = theta * y + (1.0 - theta) * bs;
        approx += (r * r.transpose()) / s.dot(r) - (bs * bs.transpose()) / sbs;
    }

    void add_to(Eigen::MatrixXd& H, double scale) const {
        for (std::size_t a = 0; a < support.size(); ++a)
            for (std::size_t b = 0; b < support.size(); ++b)
                H(support[a], support[b]) += scale * approx(a, b);
    }
};

/// Wraps g(z) as g(z) - s with s the trailing slack variable of phase 1.
class SlackShifted final : public ConvexFunction {
public:
    SlackShifted(ConstraintPtr inner, std::size_t slack) : inner_(std::move(inner)), slack_(slack) {}

    double value(std::span<const double> z) const override {
        return inner_->value(z.first(slack_)) - z[slack_];
    }
    double value_and_gradient(std::span<const double> z, SparseGradient& grad) const override {
        const double v = inner_->value_and_gradient(z.first(slack_), grad);
        grad.extras.emplace_back(slack_, -1.0);
        return v - z[slack_];
    }
    bool has_hessian() const override { return inner_->has_hessian(); }
    void add_hessian(std::span<const double> z, double scale, Eigen::MatrixXd& H) const override {
        inner_->add_hessian(z.first(slack_), scale, H);
    }

private:
    ConstraintPtr inner_;
    std::size_t slack_;
};

struct BarrierProblem {
    const Vector& lower;
    const Vector& upper;
    const Vector& objective;
    const std::vector<ConstraintPtr>& constraints;
};

enum class CenterOutcome { Centered, Stopped, IterationLimit, Stalled };

class BarrierMethod {
public:
    BarrierMethod(const BarrierProblem& p, const SolverOptions& opt)
        : p_(p), opt_(opt), n_(p.objective.size()), grads_(p.constraints.size()),
          values_(p.constraints.size()), models_(p.constraints.size()) {
        finite_sides_ = 0;
        for (std::size_t k = 0; k < n_; ++k)
            finite_sides_ += (std::isfinite(p_.lower[k]) ? 1 : 0) + (std::isfinite(p_.upper[k]) ? 1 : 0);
    }

    std::size_t barrier_terms() const { return p_.constraints.size() + finite_sides_; }
    int newton_steps() const { return steps_; }

    bool strictly_feasible(std::span<const double> z) const {
        for (std::size_t k = 0; k < n_; ++k)
            if (!(z[k] > p_.lower[k] && z[k] < p_.upper[k])) return false;
        for (const auto& c : p_.constraints)
            if (!(c->value(z) < 0.0)) return false;
        return true;
    }

    /// Minimizes -t c^T z - sum log(-g_j) - box logs from a strictly feasible z.
    CenterOutcome center(Vector& z, double t,
                         const std::function<bool(const Vector&)>& stop = {}) {
        Eigen::VectorXd grad(n_), step(n_);
        for (int it = 0; it < opt_.max_newton_per_stage; ++it) {
            assemble(z, t, grad);
            if (!newton_direction(grad, step)) return CenterOutcome::Stalled;
            const double decrement = -grad.dot(step);
            last_decrement_ = std::sqrt(std::max(decrement, 0.0));
            if (decrement / 2.0 <= opt_.newton_decrement_tolerance) return CenterOutcome::Centered;
            // The certificate already meets the target; more steps only fight roundoff in t * c^T z.
            if (!stop && certified_gap(t) <= opt_.tolerance) return CenterOutcome::Centered;
            const double alpha = line_search(z, t, grad, step);
            if (alpha == 0.0) return CenterOutcome::Stalled;
            for (std::size_t k = 0; k < n_; ++k) z[k] += alpha * step[k];
            ++steps_;
            if (stop && stop(z)) return CenterOutcome::Stopped;
        }
        return CenterOutcome::IterationLimit;
    }

    /// Certified bound on max c^T z - c^T z_current for a nu-self-concordant
    /// barrier with Newton decrement lambda < 1 at parameter t:
    /// (nu + (lambda + sqrt(nu)) lambda / (1 - lambda)) / t.
    double certified_gap(double t) const {
        const double nu = static_cast<double>(std::max<std::size_t>(barrier_terms(), 1));
        const double lam = last_decrement_;
        if (!(lam < 1.0)) return std::numeric_limits<double>::infinity();
        return (nu + (lam + std::sqrt(nu)) * lam / (1.0 - lam)) / t;
    }

private:
    void evaluate(const Vector& z) {
        for (std::size_t j = 0; j < p_.constraints.size(); ++j)
            values_[j] = p_.constraints[j]->value_and_gradient(z, grads_[j]);
    }

    void gradient_only(const Vector& z, double t, Eigen::VectorXd& grad) {
        evaluate(z);
        grad.setZero();
        std::span<double> g(grad.data(), n_);
        for (std::size_t k = 0; k < n_; ++k) {
            grad[k] = -t * p_.objective[k];
            if (std::isfinite(p_.lower[k])) grad[k] -= 1.0 / (z[k] - p_.lower[k]);
            if (std::isfinite(p_.upper[k])) grad[k] += 1.0 / (p_.upper[k] - z[k]);
        }
        for (std::size_t j = 0; j < grads_.size(); ++j) grads_[j].scatter(g, 1.0 / (-values_[j]));
    }

    void assemble(const Vector& z, double t, Eigen::VectorXd& grad) {
        gradient_only(z, t, grad);
        hess_.setZero(n_, n_);
        cross_.setZero(n_, n_);
        const std::size_t ld = n_;
        for (std::size_t j = 0; j < grads_.size(); ++j) {
            const SparseGradient& gj = grads_[j];
            const double inv = 1.0 / (-values_[j]);
            const double w1 = inv * inv;
            const std::size_t o = gj.block_offset;
            if (!gj.block.empty()) kernels::rank1_update(w1, gj.block, hess_.data() + o * ld + o, ld);
            for (const auto& [idx, val] : gj.extras) {
                if (!gj.block.empty())
                    kernels::axpy(w1 * val, gj.block, std::span<double>(cross_.data() + idx * ld + o, gj.block.size()));
                for (const auto& [idx2, val2] : gj.extras) hess_(idx, idx2) += w1 * val * val2;
            }
            const ConvexFunction& c = *p_.constraints[j];
            if (c.has_hessian()) {
                c.add_hessian(z, inv, hess_);
            } else {
                models_[j].observe(z, gj);
                models_[j].add_to(hess_, inv);
            }
        }
        hess_ += cross_ + cross_.transpose();
        for (std::size_t k = 0; k < n_; ++k) {
            if (std::isfinite(p_.lower[k])) hess_(k, k) += 1.0 / ((z[k] - p_.lower[k]) * (z[k] - p_.lower[k]));
            if (std::isfinite(p_.upper[k])) hess_(k, k) += 1.0 / ((p_.upper[k] - z[k]) * (p_.upper[k] - z[k]));
        }
    }

    bool newton_direction(const Eigen::VectorXd& grad, Eigen::VectorXd& step) {
        Eigen::VectorXd scale(n_);
        for (std::size_t k = 0; k < n_; ++k) {
            const double d = hess_(k, k);
            scale[k] = d > 0.0 && std::isfinite(d) ? 1.0 / std::sqrt(d) : 1.0;
        }
        Eigen::MatrixXd scaled = scale.asDiagonal() * hess_ * scale.asDiagonal();
        const Eigen::VectorXd rhs = -(scale.array() * grad.array()).matrix();
        double shift = 0.0;
        for (int attempt = 0; attempt < 12; ++attempt) {
            Eigen::LLT<Eigen::MatrixXd> llt(scaled);
            if (llt.info() == Eigen::Success) {
                Eigen::VectorXd y = llt.solve(rhs);
                if (y.allFinite()) {
                    step = (scale.array() * y.array()).matrix();
                    return true;
                }
            }
            const double next = shift == 0.0 ? 1e-12 : shift * 10.0;
            scaled.diagonal().array() += next - shift;
            shift = next;
        }
        return false;
    }

    /// Largest alpha in (0, 1] keeping the box strictly interior (99% rule).
    double box_step(const Vector& z, const Eigen::VectorXd& step) const {
        double alpha = 1.0;
        for (std::size_t k = 0; k < n_; ++k) {
            if (step[k] < 0.0 && std::isfinite(p_.lower[k]))
                alpha = std::min(alpha, 0.99 * (z[k] - p_.lower[k]) / -step[k]);
            else if (step[k] > 0.0 && std::isfinite(p_.upper[k]))
                alpha = std::min(alpha, 0.99 * (p_.upper[k] - z[k]) / step[k]);
        }
        return alpha;
    }

    /// Barrier change phi(z + alpha d) - phi(z) via log ratios, or +inf when
    /// the trial point leaves the strict interior.
    double barrier_change(const Vector& z, const Vector& trial, double t, double alpha,
                          const Eigen::VectorXd& step) const {
        double delta = 0.0;
        double ctd = 0.0;
        for (std::size_t k = 0; k < n_; ++k) ctd += p_.objective[k] * step[k];
        delta -= t * alpha * ctd;
        for (std::size_t k = 0; k < n_; ++k) {
            if (std::isfinite(p_.lower[k])) {
                const double r = (trial[k] - p_.lower[k]) / (z[k] - p_.lower[k]);
                if (!(r > 0.0)) return kInf;
                delta -= std::log(r);
            }
            if (std::isfinite(p_.upper[k])) {
                const double r = (p_.upper[k] - trial[k]) / (p_.upper[k] - z[k]);
                if (!(r > 0.0)) return kInf;
                delta -= std::log(r);
            }
        }
        for (std::size_t j = 0; j < p_.constraints.size(); ++j) {
            const double g = p_.constraints[j]->value(trial);
            if (!(g < 0.0)) return kInf;
            delta -= std::log(g / values_[j]);
        }
        return delta;
    }

    double line_search(const Vector& z, double t, const Eigen::VectorXd& grad,
                       const Eigen::VectorXd& step) {
        double alpha = box_step(z, step);
        const double slope = grad.dot(step);
        Vector trial(n_);
        for (int k = 0; k < 60; ++k) {
            for (std::size_t i = 0; i < n_; ++i) trial[i] = z[i] + alpha * step[i];
            const double change = barrier_change(z, trial, t, alpha, step);
            if (std::isfinite(change) && change <= 0.01 * alpha * slope) return alpha;
            alpha *= 0.5;
        }
        return 0.0;
    }

    const BarrierProblem& p_;
    const SolverOptions& opt_;
    std::size_t n_;
    std::size_t finite_sides_ = 0;
    std::vector<SparseGradient> grads_;
    std::vector<double> values_;
    std::vector<CurvatureModel> models_;
    Eigen::MatrixXd hess_;
    Eigen::MatrixXd cross_;
    int steps_ = 0;
    double last_decrement_ = std::numeric_limits<double>::infinity();
};

Vector interior_point(const ConvexProgram& program) {
    const std::size_t n = program.variable_count();
    Vector z(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double lo = program.lower[k], hi = program.upper[k];
        double guess = program.start ? (*program.start)[k] : 0.0;
        if (std::isfinite(lo) && std::isfinite(hi)) {
            const double margin = 1e-3 * (hi - lo);
            if (!program.start || !(guess > lo + margin && guess < hi - margin)) {
                guess = program.start ? std::clamp(guess, lo + margin, hi - margin) : 0.5 * (lo + hi);
            }
        } else if (std::isfinite(lo)) {
            if (!(guess > lo)) guess = lo + 1.0;
        } else if (std::isfinite(hi)) {
            if (!(guess < hi)) guess = hi - 1.0;
        }
        z[k] = guess;
    }
    return z;
}

struct PhaseOneResult {
    bool feasible = false;
    Vector point;
    int steps = 0;
};

PhaseOneResult phase_one(const ConvexProgram& program, const SolverOptions& opt) {
    const std::size_t n = program.variable_count();
    Vector z = interior_point(program);
    double worst = -kInf;
    for (const auto& c : program.constraints) worst = std::max(worst, c->value(z));
    PhaseOneResult result;
    if (program.constraints.empty() || worst < 0.0) {
        result.feasible = true;
        result.point = std::move(z);
        return result;
    }

    Vector lower = program.lower, upper = program.upper, objective(n + 1, 0.0);
    lower.push_back(-1.0);
    upper.push_back(kInf);
    objective[n] = -1.0;
    std::vector<ConstraintPtr> shifted;
    shifted.reserve(program.constraints.size());
    for (const auto& c : program.constraints) shifted.push_back(std::make_shared<SlackShifted>(c, n));

    BarrierProblem aux{lower, upper, objective, shifted};
    BarrierMethod method(aux, opt);
    z.push_back(worst + 1.0);
    auto deep_enough = [n](const Vector& y) { return y[n] < -1e-3; };
    double t = opt.initial_barrier;
    for (int stage = 0; stage < 64; ++stage) {
        const CenterOutcome out = method.center(z, t, deep_enough);
        if (z[n] < 0.0 && (out == CenterOutcome::Stopped || out == CenterOutcome::Centered)) {
            // g_j(z) - s < 0 with s < 0 makes z strictly feasible
            z.pop_back();
            result.feasible = true;
            result.point = std::move(z);
            result.steps = method.newton_steps();
            return result;
        }
        if (out == CenterOutcome::Stalled || out == CenterOutcome::IterationLimit) break;
        if (static_cast<double>(method.barrier_terms()) / t <= opt.feasibility_tolerance) break;
        t *= opt.barrier_factor;
    }
    result.steps = method.newton_steps();
    return result;
}

}  // namespace

SolveReport solve(const ConvexProgram& program, const SolverOptions& options) {
    program.validate();
    SolveReport report;

    Vector z;
    BarrierProblem problem{program.lower, program.upper, program.objective, program.constraints};
    BarrierMethod method(problem, options);
    if (program.start && method.strictly_feasible(*program.start)) {
        z = *program.start;
    } else {
        PhaseOneResult p1 = phase_one(program, options);
        report.iterations += p1.steps;
        if (!p1.feasible) {
            report.status = SolveStatus::Infeasible;
            report.solution = interior_point(program);
            report.max_violation = program.max_violation(report.solution);
            return report;
        }
        z = std::move(p1.point);
    }

    double t = options.initial_barrier;
    report.status = SolveStatus::IterationLimit;
    for (int stage = 0; stage < 200; ++stage) {
        const CenterOutcome out = method.center(z, t);
        if (out == CenterOutcome::IterationLimit) break;
        report.kkt_residual = method.certified_gap(t);
        if (report.kkt_residual <= options.tolerance) {
            report.status = SolveStatus::Optimal;
            break;
        }
        t *= options.barrier_factor;
    }
    report.iterations += method.newton_steps();
    report.solution = z;
    report.objective = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) report.objective += program.objective[k] * z[k];
    report.max_violation = std::max(0.0, program.max_violation(z));
    if (report.status == SolveStatus::Optimal && report.max_violation > options.feasibility_tolerance)
        report.status = SolveStatus::IterationLimit;
    return report;
}

SolveReport solve(const ConvexProgram& program, double tolerance) {
    if (!(tolerance > 0.0)) throw Error("solver tolerance must be positive");
    SolverOptions options;
    options.tolerance = tolerance;
    options.feasibility_tolerance = std::max(options.feasibility_tolerance, tolerance);
    return solve(program, options);
}

}  // namespace wdro
