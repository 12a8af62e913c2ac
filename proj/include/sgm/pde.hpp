#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "sgm/cavity.hpp"
#include "sgm/error.hpp"
#include "sgm/network.hpp"
#include "sgm/pointcloud.hpp"

namespace sgm {

enum class ProblemKind { poisson2d, poisson2d_param, ldc_lite };

inline ProblemKind problem_from_name(std::string_view s) {
    if (s == "poisson2d") return ProblemKind::poisson2d;
    if (s == "poisson2d_param") return ProblemKind::poisson2d_param;
    if (s == "ldc_lite") return ProblemKind::ldc_lite;
    throw ConfigError("unknown problem '" + std::string(s) + "' (valid: poisson2d, poisson2d_param, ldc_lite)");
}

inline std::string to_string(ProblemKind k) {
    switch (k) {
        case ProblemKind::poisson2d: return "poisson2d";
        case ProblemKind::poisson2d_param: return "poisson2d_param";
        case ProblemKind::ldc_lite: return "ldc_lite";
    }
    return "?";
}

struct LossWeights {
    double interior = 1.0;
    double boundary = 100.0;
};

struct LossReport {
    double total = 0.0;
    double interior = 0.0;
    double boundary = 0.0;
    std::vector<double> interior_terms;  // weighted mean squared residual per operator
    std::vector<double> boundary_terms;  // weighted mean squared residual per constrained output
};

/// Residual operators, boundary data and analytic/FD references of one benchmark PDE.
class Problem {
public:
    explicit Problem(ProblemKind kind, LossWeights w = {}, double reynolds = 100.0)
        : kind_(kind), weights_(w), reynolds_(reynolds) {
        if (w.interior < 0 || w.boundary < 0) throw ConfigError("loss weights must be non-negative");
        if (kind == ProblemKind::ldc_lite && !(reynolds > 0)) throw ConfigError("reynolds number must be positive");
    }

    ProblemKind kind() const { return kind_; }
    std::string name() const { return to_string(kind_); }
    const LossWeights& weights() const { return weights_; }
    double viscosity() const { return 1.0 / reynolds_; }
    double reynolds() const { return reynolds_; }

    DomainSpec domain() const {
        return DomainSpec::from_name(kind_ == ProblemKind::poisson2d_param ? "unit-square-param" : "unit-square");
    }
    std::size_t in_dim() const { return kind_ == ProblemKind::poisson2d_param ? 3 : 2; }
    std::size_t out_dim() const { return kind_ == ProblemKind::ldc_lite ? 3 : 1; }
    std::size_t interior_terms() const { return kind_ == ProblemKind::ldc_lite ? 3 : 1; }
    /// Outputs carrying a Dirichlet condition (pressure is left free in the cavity).
    std::vector<std::size_t> constrained_outputs() const {
        return kind_ == ProblemKind::ldc_lite ? std::vector<std::size_t>{0, 1} : std::vector<std::size_t>{0};
    }
    /// Outputs validated against the reference.
    std::vector<std::string> error_outputs() const {
        return kind_ == ProblemKind::ldc_lite ? std::vector<std::string>{"u", "v"} : std::vector<std::string>{"u"};
    }
    JetSpec jet_spec() const { return JetSpec::laplacian({0, 1}); }

    double param(const Eigen::MatrixXd& x, Eigen::Index c) const {
        return kind_ == ProblemKind::poisson2d_param ? x(2, c) : 1.0;
    }

    /// Manufactured solution sin(a pi x) sin(a pi y) (a = 1 without the parameter column).
    double exact(double px, double py, double a = 1.0) const {
        return std::sin(a * std::numbers::pi * px) * std::sin(a * std::numbers::pi * py);
    }

    double forcing(double px, double py, double a = 1.0) const {
        const double k = a * std::numbers::pi;
        return -2.0 * k * k * std::sin(k * px) * std::sin(k * py);
    }

    /// Analytic jet of the manufactured solution (Poisson problems only).
    Jet analytic_jet(const Eigen::MatrixXd& x) const {
        if (kind_ == ProblemKind::ldc_lite) throw ConfigError("ldc_lite has no analytic solution");
        const Eigen::Index b = x.cols();
        Jet j;
        j.value.resize(1, b);
        j.d1.assign(2, Eigen::MatrixXd(1, b));
        j.d2.assign(2, Eigen::MatrixXd(1, b));
        for (Eigen::Index c = 0; c < b; ++c) {
            const double k = param(x, c) * std::numbers::pi;
            const double sx = std::sin(k * x(0, c)), cx = std::cos(k * x(0, c));
            const double sy = std::sin(k * x(1, c)), cy = std::cos(k * x(1, c));
            j.value(0, c) = sx * sy;
            j.d1[0](0, c) = k * cx * sy;
            j.d1[1](0, c) = k * sx * cy;
            j.d2[0](0, c) = -k * k * sx * sy;
            j.d2[1](0, c) = -k * k * sx * sy;
        }
        return j;
    }

    /// Interior residuals, one row per operator, one column per point.
    Eigen::MatrixXd residuals(const Jet& j, const Eigen::MatrixXd& x) const {
        const Eigen::Index b = x.cols();
        if (kind_ != ProblemKind::ldc_lite) {
            Eigen::MatrixXd r = j.d2[0] + j.d2[1];
            for (Eigen::Index c = 0; c < b; ++c) r(0, c) -= forcing(x(0, c), x(1, c), param(x, c));
            return r;
        }
        const double nu = viscosity();
        const auto u = j.value.row(0).array(), v = j.value.row(1).array();
        const auto ux = j.d1[0].row(0).array(), uy = j.d1[1].row(0).array();
        const auto vx = j.d1[0].row(1).array(), vy = j.d1[1].row(1).array();
        const auto px = j.d1[0].row(2).array(), py = j.d1[1].row(2).array();
        Eigen::MatrixXd r(3, b);
        r.row(0) = (ux + vy).matrix();
        r.row(1) = (u * ux + v * uy + px - nu * (j.d2[0].row(0).array() + j.d2[1].row(0).array())).matrix();
        r.row(2) = (u * vx + v * vy + py - nu * (j.d2[0].row(1).array() + j.d2[1].row(1).array())).matrix();
        return r;
    }

    /// Chain rule from residual adjoints `gr` (same shape as residuals) to jet-channel adjoints.
    Jet residual_adjoint(const Jet& j, const Eigen::MatrixXd& gr) const {
        Jet a = Jet::zeros_like(j);
        if (kind_ != ProblemKind::ldc_lite) {
            a.d2[0] = gr;
            a.d2[1] = gr;
            return a;
        }
        const double nu = viscosity();
        const auto g0 = gr.row(0).array(), g1 = gr.row(1).array(), g2 = gr.row(2).array();
        const auto u = j.value.row(0).array(), v = j.value.row(1).array();
        a.value.row(0) = (g1 * j.d1[0].row(0).array() + g2 * j.d1[0].row(1).array()).matrix();
        a.value.row(1) = (g1 * j.d1[1].row(0).array() + g2 * j.d1[1].row(1).array()).matrix();
        a.d1[0].row(0) = (g0 + g1 * u).matrix();
        a.d1[1].row(0) = (g1 * v).matrix();
        a.d1[0].row(1) = (g2 * u).matrix();
        a.d1[1].row(1) = (g0 + g2 * v).matrix();
        a.d1[0].row(2) = g1.matrix();
        a.d1[1].row(2) = g2.matrix();
        for (int d = 0; d < 2; ++d) {
            a.d2[d].row(0) = (-nu * g1).matrix();
            a.d2[d].row(1) = (-nu * g2).matrix();
        }
        return a;
    }

    /// Dirichlet data for the constrained outputs at boundary points (rows follow constrained_outputs()).
    Eigen::MatrixXd boundary_targets(const Eigen::MatrixXd& x, const std::vector<PointTag>& tags) const {
        const Eigen::Index b = x.cols();
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(constrained_outputs().size()), b);
        for (Eigen::Index c = 0; c < b; ++c) {
            if (kind_ == ProblemKind::ldc_lite)
                g(0, c) = tags[static_cast<std::size_t>(c)] == 2 ? 1.0 : 0.0;  // lid is the top edge
            else
                g(0, c) = exact(x(0, c), x(1, c), param(x, c));
        }
        return g;
    }

private:
    ProblemKind kind_;
    LossWeights weights_;
    double reynolds_;
};

/// Points as columns: the network's input layout.
inline Eigen::MatrixXd as_columns(const PointCloud& pc, const std::vector<std::size_t>& rows, std::size_t in_dim) {
    std::vector<std::size_t> cols(in_dim);
    for (std::size_t c = 0; c < in_dim; ++c) cols[c] = c;
    return pc.select(rows, cols).transpose();
}

namespace detail {

inline void require_finite(const Eigen::MatrixXd& r, const Eigen::MatrixXd& x, const char* what) {
    if (r.allFinite()) return;
    for (Eigen::Index c = 0; c < r.cols(); ++c) {
        if (!r.col(c).allFinite()) {
            std::string pt;
            for (Eigen::Index d = 0; d < x.rows(); ++d) pt += (d ? "," : "") + std::to_string(x(d, c));
            throw NumericError(std::string("non-finite ") + what + " at point (" + pt + ")");
        }
    }
}

}  // namespace detail

/// Per-point interior loss sum_i w_F r_i(x)^2, without parameter gradients.
inline std::vector<double> pointwise_loss(const Problem& pb, const Network& net, const Eigen::MatrixXd& x) {
    const Jet j = net.forward_jet(x, pb.jet_spec());
    const Eigen::MatrixXd r = pb.residuals(j, x);
    detail::require_finite(r, x, "residual");
    std::vector<double> out(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) out[static_cast<std::size_t>(c)] = pb.weights().interior * r.col(c).squaredNorm();
    return out;
}

/// Monte-Carlo loss over one interior and one boundary batch; optionally the parameter
/// gradient (overwritten) and the per-point interior losses.
inline LossReport batch_loss(const Problem& pb, const Network& net, const Eigen::MatrixXd& xi, const Eigen::MatrixXd& xb,
                             const std::vector<PointTag>& tags_b, Eigen::VectorXd* grad = nullptr,
                             std::vector<double>* per_point = nullptr) {
    if (xi.cols() == 0 || xb.cols() == 0) throw ConfigError("batch_loss: batches must be nonempty");
    LossReport rep;
    const double wf = pb.weights().interior, wc = pb.weights().boundary;
    if (grad) *grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.param_count()));

    JetTape tape;
    const Jet j = net.forward_jet(xi, pb.jet_spec(), grad ? &tape : nullptr);
    const Eigen::MatrixXd r = pb.residuals(j, xi);
    detail::require_finite(r, xi, "residual");
    const auto bi = static_cast<double>(xi.cols());
    for (Eigen::Index t = 0; t < r.rows(); ++t) rep.interior_terms.push_back(wf * r.row(t).squaredNorm() / bi);
    if (per_point) {
        per_point->resize(static_cast<std::size_t>(xi.cols()));
        for (Eigen::Index c = 0; c < xi.cols(); ++c) (*per_point)[static_cast<std::size_t>(c)] = wf * r.col(c).squaredNorm();
    }
    if (grad) net.backward(tape, pb.residual_adjoint(j, (2.0 * wf / bi) * r), *grad);

    JetTape tape_b;
    const Jet jb = net.forward_jet(xb, JetSpec{}, grad ? &tape_b : nullptr);
    const Eigen::MatrixXd g = pb.boundary_targets(xb, tags_b);
    const auto outs = pb.constrained_outputs();
    Eigen::MatrixXd rb(g.rows(), g.cols());
    for (std::size_t k = 0; k < outs.size(); ++k)
        rb.row(static_cast<Eigen::Index>(k)) = jb.value.row(static_cast<Eigen::Index>(outs[k])) - g.row(static_cast<Eigen::Index>(k));
    detail::require_finite(rb, xb, "boundary residual");
    const auto bb = static_cast<double>(xb.cols());
    for (Eigen::Index k = 0; k < rb.rows(); ++k) rep.boundary_terms.push_back(wc * rb.row(k).squaredNorm() / bb);
    if (grad) {
        Jet adj = Jet::zeros_like(jb);
        for (std::size_t k = 0; k < outs.size(); ++k)
            adj.value.row(static_cast<Eigen::Index>(outs[k])) = (2.0 * wc / bb) * rb.row(static_cast<Eigen::Index>(k));
        net.backward(tape_b, adj, *grad);
    }

    for (double v : rep.interior_terms) rep.interior += v;
    for (double v : rep.boundary_terms) rep.boundary += v;
    rep.total = rep.interior + rep.boundary;
    return rep;
}

/// Relative L2 error of the validated outputs on a uniform grid over the unit square;
/// parameterized problems pool three parameter slices.
class ReferenceEvaluator {
public:
    static constexpr std::size_t default_resolution = 101;
    static inline const std::vector<double> param_slices{0.75, 0.875, 1.0};

    explicit ReferenceEvaluator(const Problem& pb, std::size_t resolution = default_resolution,
                                std::size_t cavity_nodes = 129)
        : pb_(pb) {
        if (resolution < 16) throw ConfigError("reference grid resolution must be >= 16");
        const std::vector<double> slices =
            pb.kind() == ProblemKind::poisson2d_param ? param_slices : std::vector<double>{1.0};
        const auto per = static_cast<Eigen::Index>(resolution * resolution);
        x_.resize(static_cast<Eigen::Index>(pb.in_dim()), per * static_cast<Eigen::Index>(slices.size()));
        const auto n_out = static_cast<Eigen::Index>(pb.error_outputs().size());
        ref_.resize(n_out, x_.cols());
        std::shared_ptr<const CavitySolution> cav;
        if (pb.kind() == ProblemKind::ldc_lite) cav = cached_cavity({cavity_nodes, pb.reynolds()});
        Eigen::Index c = 0;
        for (double a : slices) {
            slice_begin_.push_back(c);
            for (std::size_t i = 0; i < resolution; ++i)
                for (std::size_t k = 0; k < resolution; ++k, ++c) {
                    const double px = static_cast<double>(i) / static_cast<double>(resolution - 1);
                    const double py = static_cast<double>(k) / static_cast<double>(resolution - 1);
                    x_(0, c) = px;
                    x_(1, c) = py;
                    if (pb.kind() == ProblemKind::poisson2d_param) x_(2, c) = a;
                    if (cav) {
                        ref_(0, c) = cav->sample_u(px, py);
                        ref_(1, c) = cav->sample_v(px, py);
                    } else {
                        ref_(0, c) = pb.exact(px, py, a);
                    }
                }
        }
        slice_begin_.push_back(c);
    }

    const Eigen::MatrixXd& grid() const { return x_; }
    const Eigen::MatrixXd& reference() const { return ref_; }
    std::size_t slice_count() const { return slice_begin_.size() - 1; }

    /// Pooled relative L2 error per validated output.
    std::vector<double> errors(const Network& net) const { return errors_of(prediction(net), 0, x_.cols()); }

    /// Same, restricted to each parameter slice.
    std::vector<std::vector<double>> slice_errors(const Network& net) const {
        const Eigen::MatrixXd y = prediction(net);
        std::vector<std::vector<double>> out;
        for (std::size_t s = 0; s + 1 < slice_begin_.size(); ++s)
            out.push_back(errors_of(y, slice_begin_[s], slice_begin_[s + 1] - slice_begin_[s]));
        return out;
    }

    /// Errors of an arbitrary field given on the grid (rows follow error_outputs()).
    std::vector<double> errors_of(const Eigen::MatrixXd& y, Eigen::Index begin, Eigen::Index count) const {
        std::vector<double> e;
        for (Eigen::Index k = 0; k < ref_.rows(); ++k) {
            const auto ref = ref_.row(k).segment(begin, count);
            e.push_back((y.row(k).segment(begin, count) - ref).norm() / ref.norm());
        }
        return e;
    }

private:
    Eigen::MatrixXd prediction(const Network& net) const {
        const Eigen::MatrixXd y = net.forward(x_);
        return y.topRows(ref_.rows());  // u (and v) are the leading outputs
    }

    Problem pb_;
    Eigen::MatrixXd x_, ref_;
    std::vector<Eigen::Index> slice_begin_;
};

}  // namespace sgm
