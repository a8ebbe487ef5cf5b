#include "wdro/reformulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wdro/kernels.hpp"

namespace wdro {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// phi_y(theta_0 + theta^T s) - v_i - d v_{m+1} + coeff w with phi convex.
class LinkCut final : public ConvexFunction {
public:
    LinkCut(std::shared_ptr<const LossModel> owner, const Scenario& cut, double distance,
            const MasterLayout& layout, double coeff)
        : owner_(std::move(owner)), link_(*owner_->scalar_form()), label_(cut.label), distance_(distance), coeff_(coeff), v_index_(layout.v(cut.sample_index)),
          radius_index_(layout.radius()), w_index_(layout.w()) {
        augmented_.reserve(cut.point.size() + 1);
        augmented_.push_back(1.0);
        augmented_.insert(augmented_.end(), cut.point.begin(), cut.point.end());
    }

    double value(std::span<const double> z) const override {
        const double u = kernels::dot(augmented_, z.first(augmented_.size()));
        return link_.value(u, label_) - z[v_index_] - distance_ * z[radius_index_] + w_term(z);
    }

    double value_and_gradient(std::span<const double> z, SparseGradient& grad) const override {
        const double u = kernels::dot(augmented_, z.first(augmented_.size()));
        const double d = link_.derivative(u, label_);
        grad.block_offset = 0;
        grad.block.resize(augmented_.size());
        for (std::size_t k = 0; k < augmented_.size(); ++k) grad.block[k] = d * augmented_[k];
        grad.extras.clear();
        grad.extras.emplace_back(v_index_, -1.0);
        grad.extras.emplace_back(radius_index_, -distance_);
        if (coeff_ != 0.0) grad.extras.emplace_back(w_index_, coeff_);
        return link_.value(u, label_) - z[v_index_] - distance_ * z[radius_index_] + w_term(z);
    }

    bool has_hessian() const override { return true; }

    void add_hessian(std::span<const double> z, double scale, Eigen::MatrixXd& H) const override {
        const double u = kernels::dot(augmented_, z.first(augmented_.size()));
        const double c = scale * link_.second_derivative(u, label_);
        if (c != 0.0) kernels::rank1_update(c, augmented_, H.data(), static_cast<std::size_t>(H.rows()));
    }

private:
    double w_term(std::span<const double> z) const { return coeff_ != 0.0 ? coeff_ * z[w_index_] : 0.0; }

    std::shared_ptr<const LossModel> owner_;
    const ScalarLink& link_;
    int label_;
    double distance_;
    double coeff_;
    std::size_t v_index_, radius_index_, w_index_;
    Vector augmented_;  // [1, s]
};

/// Same constraint for a loss without scalar form; curvature left to the
/// solver's quasi-Newton model.
class GeneralCut final : public ConvexFunction {
public:
    GeneralCut(std::shared_ptr<const LossModel> loss, const Scenario& cut, double distance,
               const MasterLayout& layout, double coeff)
        : loss_(std::move(loss)), point_(cut.point), label_(cut.label), distance_(distance), coeff_(coeff),
          theta_dim_(layout.theta_dim), v_index_(layout.v(cut.sample_index)), radius_index_(layout.radius()),
          w_index_(layout.w()) {}

    double value(std::span<const double> z) const override {
        return loss_->evaluate(z.first(theta_dim_), point_, label_) - z[v_index_] - distance_ * z[radius_index_] +
               (coeff_ != 0.0 ? coeff_ * z[w_index_] : 0.0);
    }

    double value_and_gradient(std::span<const double> z, SparseGradient& grad) const override {
        grad.block_offset = 0;
        grad.block.resize(theta_dim_);
        loss_->subgradient_theta(z.first(theta_dim_), point_, label_, grad.block);
        grad.extras.clear();
        grad.extras.emplace_back(v_index_, -1.0);
        grad.extras.emplace_back(radius_index_, -distance_);
        if (coeff_ != 0.0) grad.extras.emplace_back(w_index_, coeff_);
        return value(z);
    }

private:
    std::shared_ptr<const LossModel> loss_;
    Vector point_;
    int label_;
    double distance_;
    double coeff_;
    std::size_t theta_dim_, v_index_, radius_index_, w_index_;
};

/// (1/m) sum_i phi_{y_i}(a_i^T theta) - t with a_i = [1, x^i].
class EmpiricalLoss final : public ConvexFunction {
public:
    EmpiricalLoss(std::shared_ptr<const LossModel> owner, const Dataset& data, std::size_t t_index)
        : owner_(std::move(owner)), link_(*owner_->scalar_form()), rows_(data.size()), cols_(data.dimension() + 1), t_index_(t_index),
          design_(rows_ * cols_), labels_(rows_) {
        for (std::size_t i = 0; i < rows_; ++i) {
            design_[i * cols_] = 1.0;
            std::copy(data[i].features.begin(), data[i].features.end(), design_.begin() + i * cols_ + 1);
            labels_[i] = data[i].label;
        }
    }

    double value(std::span<const double> z) const override {
        Vector links(rows_);
        kernels::affine_gemv(design_, rows_, cols_, z.first(cols_), 0.0, links);
        double total = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) total += link_.value(links[i], labels_[i]);
        return total / static_cast<double>(rows_) - z[t_index_];
    }

    double value_and_gradient(std::span<const double> z, SparseGradient& grad) const override {
        Vector links(rows_);
        kernels::affine_gemv(design_, rows_, cols_, z.first(cols_), 0.0, links);
        grad.block_offset = 0;
        grad.block.assign(cols_, 0.0);
        grad.extras.assign(1, {t_index_, -1.0});
        const double inv_m = 1.0 / static_cast<double>(rows_);
        double total = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            total += link_.value(links[i], labels_[i]);
            const double d = link_.derivative(links[i], labels_[i]) * inv_m;
            kernels::axpy(d, std::span<const double>(design_).subspan(i * cols_, cols_), grad.block);
        }
        return total * inv_m - z[t_index_];
    }

    bool has_hessian() const override { return true; }

    void add_hessian(std::span<const double> z, double scale, Eigen::MatrixXd& H) const override {
        Vector links(rows_);
        kernels::affine_gemv(design_, rows_, cols_, z.first(cols_), 0.0, links);
        const double inv_m = 1.0 / static_cast<double>(rows_);
        for (std::size_t i = 0; i < rows_; ++i) {
            const double c = scale * inv_m * link_.second_derivative(links[i], labels_[i]);
            if (c != 0.0)
                kernels::rank1_update(c, std::span<const double>(design_).subspan(i * cols_, cols_), H.data(),
                                      static_cast<std::size_t>(H.rows()));
        }
    }

private:
    std::shared_ptr<const LossModel> owner_;
    const ScalarLink& link_;
    std::size_t rows_, cols_, t_index_;
    Vector design_;
    std::vector<int> labels_;
};

class GeneralEmpiricalLoss final : public ConvexFunction {
public:
    GeneralEmpiricalLoss(std::shared_ptr<const LossModel> loss, const Dataset& data, std::size_t t_index)
        : loss_(std::move(loss)), data_(data), t_index_(t_index) {}

    double value(std::span<const double> z) const override {
        const std::size_t p = data_.dimension() + 1;
        double total = 0.0;
        for (const Sample& s : data_.samples()) total += loss_->evaluate(z.first(p), s.features, s.label);
        return total / static_cast<double>(data_.size()) - z[t_index_];
    }

    double value_and_gradient(std::span<const double> z, SparseGradient& grad) const override {
        const std::size_t p = data_.dimension() + 1;
        grad.block_offset = 0;
        grad.block.assign(p, 0.0);
        grad.extras.assign(1, {t_index_, -1.0});
        Vector g(p);
        const double inv_m = 1.0 / static_cast<double>(data_.size());
        for (const Sample& s : data_.samples()) {
            loss_->subgradient_theta(z.first(p), s.features, s.label, g);
            kernels::axpy(inv_m, g, grad.block);
        }
        return value(z);
    }

private:
    std::shared_ptr<const LossModel> loss_;
    Dataset data_;
    std::size_t t_index_;
};

void check_theta_box(const ProblemData& data) {
    const ThetaBox& box = data.theta_box;
    if (box.dimension() != data.theta_dim()) throw Error("theta box dimension must be feature count + 1");
    for (std::size_t k = 0; k < box.dimension(); ++k)
        if (!(box.lower[k] < box.upper[k])) throw Error("theta box has empty interior");
}

Vector theta_center(const ThetaBox& box) {
    Vector c(box.dimension());
    for (std::size_t k = 0; k < c.size(); ++k) c[k] = 0.5 * (box.lower[k] + box.upper[k]);
    return c;
}

/// Fills box bounds and a strictly interior start for [theta | v].
void dual_block(const ProblemData& data, std::span<const Scenario> cuts, const MasterLayout& layout,
                ConvexProgram& p) {
    const DerivedConstants& d = data.derived;
    const std::size_t m = layout.m;
    for (std::size_t k = 0; k < layout.theta_dim; ++k) {
        p.lower[k] = data.theta_box.lower[k];
        p.upper[k] = data.theta_box.upper[k];
    }
    for (std::size_t i = 0; i <= m; ++i) {
        p.lower[layout.v(i)] = d.v_lower[i];
        p.upper[layout.v(i)] = d.v_upper[i];
    }

    Vector start(layout.size(), 0.0);
    const Vector center = theta_center(data.theta_box);
    std::copy(center.begin(), center.end(), start.begin());
    // v_i slightly above the largest cut loss at the centre, inside H.
    std::vector<double> need(m, -kInf);
    for (const Scenario& c : cuts)
        need[c.sample_index] = std::max(need[c.sample_index], data.loss->evaluate(center, c.point, c.label));
    for (std::size_t i = 0; i < m; ++i) {
        const double lo = d.v_lower[i], hi = d.v_upper[i];
        const double pad = std::min(1.0, 0.25 * (hi - lo));
        double v = std::isfinite(need[i]) ? need[i] + pad : lo + pad;
        v = std::clamp(v, lo + 0.5 * pad, hi - 0.5 * pad);
        start[layout.v(i)] = v;
    }
    start[layout.radius()] = std::min(1.0, 0.5 * d.v_upper[m]);
    p.start = std::move(start);
}

}  // namespace

DerivedConstants derive_constants(const ProblemData& data) {
    if (data.dataset.empty()) throw Error("problem needs a nonempty dataset");
    if (!(data.r0 > 0.0)) throw Error("Wasserstein radius r0 must be positive");
    if (!data.loss) throw Error("problem has no loss model");

    DerivedConstants d;
    const LossBounds bounds = data.loss->bounds_over(data.theta_box, data.support);
    d.C1 = bounds.lower;
    d.C2 = bounds.upper;
    if (!(d.C2 > d.C1)) throw Error("loss bounds must satisfy C1 < C2");
    d.B = data.loss->subgradient_norm_bound(data.theta_box, data.support);

    d.L = 0.0;
    for (std::size_t i = 0; i < data.sample_count(); ++i)
        d.L = std::max(d.L, data.support_of(i).max_l1_distance(data.dataset[i].features));

    const double m = static_cast<double>(data.sample_count());
    d.Bprime = std::max(std::sqrt(data.r0 * data.r0 + 1.0 + 1.0 / m), std::sqrt(d.B * d.B + d.L * d.L + 1.0));
    d.U = d.C2 + 1.0;

    d.v_lower.assign(data.sample_count() + 1, d.C1);
    d.v_upper.assign(data.sample_count() + 1, (m + 1.0) * d.C2 - m * d.C1);
    d.v_lower.back() = 0.0;
    d.v_upper.back() = (d.C2 - d.C1) / data.r0;
    return d;
}

ProblemData make_problem(Dataset dataset, std::array<UncertaintySet, 2> support,
                         std::shared_ptr<const LossModel> loss, double r0, ThetaBox theta_box) {
    ProblemData data;
    data.dataset = std::move(dataset);
    data.support = std::move(support);
    data.loss = std::move(loss);
    data.r0 = r0;
    data.theta_box = std::move(theta_box);
    if (data.dataset.empty()) throw Error("problem needs a nonempty dataset");
    check_theta_box(data);
    for (int label : {0, 1}) {
        UncertaintySet& set = data.support[label];
        if (set.label != label) throw Error("support sets must be indexed by their label");
        if (data.dataset.count_label(label) > 0 && set.empty())
            throw Error("a label present in the data has an empty support set");
        if (!set.empty() && set.dimension() != data.feature_count())
            throw Error("support dimension does not match the features");
        for (const Vector& p : set.points)
            if (p.size() != data.feature_count()) throw Error("support point dimension mismatch");
    }
    data.derived = derive_constants(data);
    return data;
}

DualPoint MasterLayout::extract(std::span<const double> z) const {
    DualPoint x;
    x.theta.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(theta_dim));
    x.v.assign(z.begin() + static_cast<std::ptrdiff_t>(theta_dim),
               z.begin() + static_cast<std::ptrdiff_t>(theta_dim + m + 1));
    return x;
}

ConstraintPtr make_cut_constraint(const ProblemData& data, const Scenario& cut, const MasterLayout& layout,
                                  double coeff) {
    if (cut.sample_index >= data.sample_count()) throw Error("cut sample index out of range");
    const Sample& xi = data.dataset[cut.sample_index];
    if (cut.label != xi.label) throw Error("cut label differs from its sample's label");
    if (cut.point.size() != xi.features.size()) throw Error("cut dimension mismatch");
    const double distance = kernels::l1_distance(cut.point, xi.features);
    if (data.loss->scalar_form()) return std::make_shared<LinkCut>(data.loss, cut, distance, layout, coeff);
    return std::make_shared<GeneralCut>(data.loss, cut, distance, layout, coeff);
}

ConvexProgram build_master(const ProblemData& data, std::span<const Scenario> cuts, double M) {
    check_theta_box(data);
    const DerivedConstants& d = data.derived;
    if (M < d.C1) throw Error("master bound M is below C1; the master is infeasible");
    if (M > d.U) throw Error("master bound M exceeds the strict upper bound U");
    for (const Scenario& c : cuts)
        if (!data.support[c.label].contains(c.point, 1e-9)) throw Error("cut scenario lies outside its region");

    const MasterLayout layout{data.theta_dim(), data.sample_count(), true};
    const double Bp = d.Bprime;
    ConvexProgram p;
    p.lower.assign(layout.size(), -kInf);
    p.upper.assign(layout.size(), kInf);
    p.objective.assign(layout.size(), 0.0);
    p.objective[layout.w()] = 1.0;
    dual_block(data, cuts, layout, p);

    p.constraints.push_back(std::make_shared<LinearFunction>(
        std::vector<std::pair<std::size_t, double>>{{layout.t(), 1.0}, {layout.w(), 1.0}}, -M));
    std::vector<std::pair<std::size_t, double>> f_terms;
    const double inv_m = 1.0 / static_cast<double>(layout.m);
    for (std::size_t i = 0; i < layout.m; ++i) f_terms.emplace_back(layout.v(i), inv_m);
    f_terms.emplace_back(layout.radius(), data.r0);
    f_terms.emplace_back(layout.t(), -1.0);
    f_terms.emplace_back(layout.w(), Bp);
    p.constraints.push_back(std::make_shared<LinearFunction>(std::move(f_terms), 0.0));
    for (const Scenario& c : cuts) p.constraints.push_back(make_cut_constraint(data, c, layout, Bp));

    // t = M and w very negative is strictly feasible once v clears every cut.
    Vector& z = *p.start;
    const DualPoint x0 = layout.extract(z);
    const double f0 = objective_f(x0, data.r0);
    z[layout.t()] = M;
    z[layout.w()] = -std::max(1.0, 2.0 * (f0 - M) / Bp + 1.0);
    return p;
}

ConvexProgram build_exchange_master(const ProblemData& data, std::span<const Scenario> cuts) {
    check_theta_box(data);
    for (const Scenario& c : cuts)
        if (!data.support[c.label].contains(c.point, 1e-9)) throw Error("cut scenario lies outside its region");
    const MasterLayout layout{data.theta_dim(), data.sample_count(), false};
    ConvexProgram p;
    p.lower.assign(layout.size(), -kInf);
    p.upper.assign(layout.size(), kInf);
    p.objective.assign(layout.size(), 0.0);
    const double inv_m = 1.0 / static_cast<double>(layout.m);
    for (std::size_t i = 0; i < layout.m; ++i) p.objective[layout.v(i)] = -inv_m;
    p.objective[layout.radius()] = -data.r0;
    dual_block(data, cuts, layout, p);
    for (const Scenario& c : cuts) p.constraints.push_back(make_cut_constraint(data, c, layout, 0.0));
    return p;
}

ConvexProgram build_edo(const ProblemData& data) {
    check_theta_box(data);
    const std::size_t p_dim = data.theta_dim();
    ConvexProgram p;
    p.lower = data.theta_box.lower;
    p.upper = data.theta_box.upper;
    p.lower.push_back(-kInf);
    p.upper.push_back(kInf);
    p.objective.assign(p_dim + 1, 0.0);
    p.objective[p_dim] = -1.0;
    ConstraintPtr loss;
    if (data.loss->scalar_form())
        loss = std::make_shared<EmpiricalLoss>(data.loss, data.dataset, p_dim);
    else
        loss = std::make_shared<GeneralEmpiricalLoss>(data.loss, data.dataset, p_dim);
    p.constraints.push_back(loss);

    Vector start = theta_center(data.theta_box);
    start.push_back(0.0);
    start.back() = loss->value(start) + 1.0;
    p.start = std::move(start);
    return p;
}

EdoSolution solve_edo(const ProblemData& data, const SolverOptions& options) {
    const ConvexProgram program = build_edo(data);
    EdoSolution out;
    out.report = solve(program, options);
    if (out.report.status == SolveStatus::Infeasible) throw Error("empirical problem reported infeasible");
    out.theta.assign(out.report.solution.begin(), out.report.solution.end() - 1);
    double total = 0.0;
    for (const Sample& s : data.dataset.samples()) total += data.loss->evaluate(out.theta, s.features, s.label);
    out.value = total / static_cast<double>(data.sample_count());
    return out;
}

}  // namespace wdro
