#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/text_io.hpp"

namespace sgm {

enum class Encoder { identity, fourier };

inline Encoder encoder_from_name(std::string_view s) {
    if (s == "identity") return Encoder::identity;
    if (s == "fourier") return Encoder::fourier;
    throw ConfigError("unknown encoder '" + std::string(s) + "' (valid: identity, fourier)");
}

inline std::string to_string(Encoder e) { return e == Encoder::identity ? "identity" : "fourier"; }

struct NetworkShape {
    std::size_t in_dim = 2;
    std::size_t out_dim = 1;
    std::size_t width = 32;
    std::size_t depth = 3;  // hidden layers
    Encoder encoder = Encoder::identity;
    std::size_t fourier_features = 16;
    double fourier_scale = 1.0;
    double init_gain = 2.0;  // Xavier-uniform gain; 1/SiLU'(0) keeps activations from shrinking
};

/// Which input-derivative channels a jet carries: first derivatives along the listed
/// coordinate axes, and second derivatives for pairs of positions within that list.
struct JetSpec {
    std::vector<std::size_t> axes;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;

    std::size_t channels() const { return 1 + axes.size() + pairs.size(); }

    /// First derivatives along `axes` plus the pure second derivative of each.
    static JetSpec laplacian(std::vector<std::size_t> axes) {
        JetSpec s;
        s.axes = std::move(axes);
        for (std::size_t i = 0; i < s.axes.size(); ++i) s.pairs.push_back({i, i});
        return s;
    }
};

/// Value and input derivatives of every output over a batch; each matrix is out_dim x batch.
struct Jet {
    Eigen::MatrixXd value;
    std::vector<Eigen::MatrixXd> d1;  // per JetSpec axis
    std::vector<Eigen::MatrixXd> d2;  // per JetSpec pair

    static Jet zeros_like(const Jet& j) {
        Jet z;
        z.value = Eigen::MatrixXd::Zero(j.value.rows(), j.value.cols());
        for (const auto& m : j.d1) z.d1.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
        for (const auto& m : j.d2) z.d2.push_back(Eigen::MatrixXd::Zero(m.rows(), m.cols()));
        return z;
    }
};

namespace detail {

/// SiLU z*s(z) and its first three derivatives, elementwise.
struct Silu {
    Eigen::ArrayXXd f, f1, f2, f3;

    explicit Silu(const Eigen::ArrayXXd& z, int order) {
        const Eigen::ArrayXXd s = 1.0 / (1.0 + (-z).exp());
        f = z * s;
        if (order < 1) return;
        const Eigen::ArrayXXd ds = s * (1.0 - s);
        f1 = s + z * ds;
        if (order < 2) return;
        const Eigen::ArrayXXd one_m2s = 1.0 - 2.0 * s;
        f2 = ds * (2.0 + z * one_m2s);
        if (order < 3) return;
        f3 = ds * (one_m2s * (3.0 + z * one_m2s) - 2.0 * z * ds);
    }
};

}  // namespace detail

/// Activations cached by forward_jet for the reverse pass. Channels of one layer are
/// stacked horizontally: [value | d1 ... | d2 ...], each block `batch` columns wide.
struct JetTape {
    JetSpec spec;
    Eigen::Index batch = 0;
    std::vector<Eigen::MatrixXd> inputs;  // stacked input to each affine layer
    std::vector<Eigen::MatrixXd> pre;     // stacked pre-activation of each hidden layer
};

/// Fully connected SiLU network with an optional fixed Fourier-feature encoder.
/// Parameters live in one flat vector: per layer W (column-major) followed by b.
class Network {
public:
    Network() = default;

    explicit Network(const NetworkShape& shape, std::uint64_t seed = 0) : shape_(shape) {
        if (shape.in_dim == 0 || shape.out_dim == 0 || shape.width == 0)
            throw ConfigError("network: in_dim, out_dim and width must be positive");
        std::mt19937_64 rng(seed);
        if (shape.encoder == Encoder::fourier) {
            if (shape.fourier_features == 0) throw ConfigError("network: fourier_features must be positive");
            std::normal_distribution<double> nd(0.0, shape.fourier_scale);
            fourier_ = Eigen::MatrixXd(shape.fourier_features, shape.in_dim);
            for (Eigen::Index i = 0; i < fourier_.size(); ++i) fourier_.data()[i] = nd(rng);
        }
        build_layout();
        theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(param_count_));
        for (std::size_t l = 0; l < dims_.size() - 1; ++l) {
            const double fan_in = static_cast<double>(dims_[l]), fan_out = static_cast<double>(dims_[l + 1]);
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            const double a = shape.init_gain * std::sqrt(6.0 / (fan_in + fan_out));
            auto w = weight(l);
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = a * u(rng);
        }
    }

    /// Builds from explicit layer dimensions (no encoder); all parameters zero.
    static Network from_dims(std::vector<std::size_t> dims) {
        if (dims.size() < 2) throw ConfigError("network: need at least input and output dimensions");
        Network n;
        n.shape_.in_dim = dims.front();
        n.shape_.out_dim = dims.back();
        n.shape_.depth = dims.size() - 2;
        n.shape_.width = dims.size() > 2 ? dims[1] : dims.back();
        n.dims_ = std::move(dims);
        n.layout_params();
        n.theta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n.param_count_));
        return n;
    }

    const NetworkShape& shape() const { return shape_; }
    std::size_t in_dim() const { return shape_.in_dim; }
    std::size_t out_dim() const { return shape_.out_dim; }
    std::size_t layer_count() const { return dims_.size() - 1; }
    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t param_count() const { return param_count_; }
    const Eigen::MatrixXd& fourier_matrix() const { return fourier_; }

    Eigen::VectorXd& params() { return theta_; }
    const Eigen::VectorXd& params() const { return theta_; }

    Eigen::Map<Eigen::MatrixXd> weight(std::size_t l) {
        return {theta_.data() + w_off_[l], static_cast<Eigen::Index>(dims_[l + 1]), static_cast<Eigen::Index>(dims_[l])};
    }
    Eigen::Map<const Eigen::MatrixXd> weight(std::size_t l) const {
        return {theta_.data() + w_off_[l], static_cast<Eigen::Index>(dims_[l + 1]), static_cast<Eigen::Index>(dims_[l])};
    }
    Eigen::Map<Eigen::VectorXd> bias(std::size_t l) {
        return {theta_.data() + b_off_[l], static_cast<Eigen::Index>(dims_[l + 1])};
    }
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const {
        return {theta_.data() + b_off_[l], static_cast<Eigen::Index>(dims_[l + 1])};
    }

    /// Outputs for a batch of inputs given as columns (in_dim x batch).
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
        check_input(x);
        Eigen::MatrixXd a = encode(x);
        for (std::size_t l = 0; l + 1 < layer_count(); ++l) {
            Eigen::MatrixXd z = weight(l) * a;
            z.colwise() += bias(l);
            a = detail::Silu(z.array(), 0).f.matrix();
        }
        Eigen::MatrixXd out = weight(layer_count() - 1) * a;
        out.colwise() += bias(layer_count() - 1);
        return out;
    }

    Eigen::VectorXd forward_point(const Eigen::VectorXd& x) const { return forward(Eigen::MatrixXd(x)).col(0); }

    /// Value plus exact first/second input derivatives by truncated Taylor propagation.
    Jet forward_jet(const Eigen::MatrixXd& x, const JetSpec& spec, JetTape* tape = nullptr) const {
        check_input(x);
        for (auto a : spec.axes)
            if (a >= in_dim()) throw ConfigError("jet axis " + std::to_string(a) + " out of range");
        for (auto [i, j] : spec.pairs)
            if (i >= spec.axes.size() || j >= spec.axes.size()) throw ConfigError("jet pair index out of range");
        const Eigen::Index b = x.cols();
        const std::size_t nd = spec.axes.size(), np = spec.pairs.size();
        auto blk = [b](Eigen::MatrixXd& m, std::size_t c) { return m.middleCols(static_cast<Eigen::Index>(c) * b, b); };

        Eigen::MatrixXd h = encode_jet(x, spec);
        if (tape) {
            tape->spec = spec;
            tape->batch = b;
            tape->inputs.clear();
            tape->pre.clear();
        }
        for (std::size_t l = 0; l + 1 < layer_count(); ++l) {
            Eigen::MatrixXd z = weight(l) * h;
            blk(z, 0).colwise() += bias(l);
            const detail::Silu s(blk(z, 0).array(), 2);
            Eigen::MatrixXd a(z.rows(), z.cols());
            blk(a, 0) = s.f.matrix();
            for (std::size_t d = 0; d < nd; ++d) blk(a, 1 + d) = (s.f1 * blk(z, 1 + d).array()).matrix();
            for (std::size_t p = 0; p < np; ++p) {
                const auto [i, j] = spec.pairs[p];
                blk(a, 1 + nd + p) =
                    (s.f2 * blk(z, 1 + i).array() * blk(z, 1 + j).array() + s.f1 * blk(z, 1 + nd + p).array()).matrix();
            }
            if (tape) {
                tape->inputs.push_back(std::move(h));
                tape->pre.push_back(std::move(z));
            }
            h = std::move(a);
        }
        Eigen::MatrixXd out = weight(layer_count() - 1) * h;
        blk(out, 0).colwise() += bias(layer_count() - 1);
        if (tape) tape->inputs.push_back(std::move(h));

        Jet jet;
        jet.value = blk(out, 0);
        for (std::size_t d = 0; d < nd; ++d) jet.d1.push_back(blk(out, 1 + d));
        for (std::size_t p = 0; p < np; ++p) jet.d2.push_back(blk(out, 1 + nd + p));
        return jet;
    }

    /// Reverse pass through a taped jet: accumulates d(loss)/d(theta) into `grad` given
    /// the adjoint of every output channel.
    void backward(const JetTape& tape, const Jet& adjoint, Eigen::VectorXd& grad) const {
        if (grad.size() != static_cast<Eigen::Index>(param_count_)) grad = Eigen::VectorXd::Zero(param_count_);
        const Eigen::Index b = tape.batch;
        const auto& spec = tape.spec;
        const std::size_t nd = spec.axes.size(), np = spec.pairs.size(), nc = spec.channels();
        auto blk = [b](auto& m, std::size_t c) { return m.middleCols(static_cast<Eigen::Index>(c) * b, b); };

        Eigen::MatrixXd g(static_cast<Eigen::Index>(out_dim()), b * static_cast<Eigen::Index>(nc));
        blk(g, 0) = adjoint.value;
        for (std::size_t d = 0; d < nd; ++d) blk(g, 1 + d) = adjoint.d1[d];
        for (std::size_t p = 0; p < np; ++p) blk(g, 1 + nd + p) = adjoint.d2[p];

        for (std::size_t l = layer_count(); l-- > 0;) {
            const Eigen::MatrixXd& h = tape.inputs[l];
            Eigen::Map<Eigen::MatrixXd> gw(grad.data() + w_off_[l], static_cast<Eigen::Index>(dims_[l + 1]),
                                           static_cast<Eigen::Index>(dims_[l]));
            gw.noalias() += g * h.transpose();
            grad.segment(static_cast<Eigen::Index>(b_off_[l]), static_cast<Eigen::Index>(dims_[l + 1])) +=
                blk(g, 0).rowwise().sum();
            if (l == 0) break;
            const Eigen::MatrixXd ga = weight(l).transpose() * g;  // adjoint of the stacked activations
            const Eigen::MatrixXd& z = tape.pre[l - 1];
            const detail::Silu s(blk(z, 0).array(), np ? 3 : 2);
            Eigen::MatrixXd gz(ga.rows(), ga.cols());
            Eigen::ArrayXXd g0 = s.f1 * blk(ga, 0).array();
            for (std::size_t d = 0; d < nd; ++d) {
                g0 += s.f2 * blk(z, 1 + d).array() * blk(ga, 1 + d).array();
                blk(gz, 1 + d) = (s.f1 * blk(ga, 1 + d).array()).matrix();
            }
            for (std::size_t p = 0; p < np; ++p) {
                const auto [i, j] = spec.pairs[p];
                const auto gp = blk(ga, 1 + nd + p).array();
                g0 += (s.f3 * blk(z, 1 + i).array() * blk(z, 1 + j).array() + s.f2 * blk(z, 1 + nd + p).array()) * gp;
                blk(gz, 1 + i) += (s.f2 * blk(z, 1 + j).array() * gp).matrix();
                blk(gz, 1 + j) += (s.f2 * blk(z, 1 + i).array() * gp).matrix();
                blk(gz, 1 + nd + p) = (s.f1 * gp).matrix();
            }
            blk(gz, 0) = g0.matrix();
            g = std::move(gz);
        }
    }

    /// Versioned text checkpoint; doubles are written in shortest round-trip form.
    void save(const std::string& path) const {
        auto f = text::open_out(path);
        f << "sgm-network 1\n";
        f << "encoder " << to_string(shape_.encoder) << ' ' << fourier_.rows() << ' ' << fourier_.cols() << '\n';
        f << "dims";
        for (auto d : dims_) f << ' ' << d;
        f << '\n';
        for (Eigen::Index i = 0; i < fourier_.size(); ++i) f << text::format_double(fourier_.data()[i]) << '\n';
        for (Eigen::Index i = 0; i < theta_.size(); ++i) f << text::format_double(theta_[i]) << '\n';
        if (!f) throw ConfigError("cannot write checkpoint '" + path + "'");
    }

    static Network load(const std::string& path) {
        auto f = text::open_in(path);
        std::string line;
        std::size_t ln = 0;
        auto next = [&]() -> std::string_view {
            if (!std::getline(f, line)) throw ParseError("unexpected end of checkpoint", ln + 1);
            ++ln;
            return text::trim(line);
        };
        if (next() != "sgm-network 1") throw ParseError("not an sgm-network v1 checkpoint", ln);
        auto enc = text::tokens(next());
        if (enc.size() != 4 || enc[0] != "encoder") throw ParseError("bad encoder line", ln);
        Network n;
        n.shape_.encoder = encoder_from_name(enc[1]);
        const auto fr = text::parse_int<std::size_t>(enc[2], ln), fc = text::parse_int<std::size_t>(enc[3], ln);
        auto dl = text::tokens(next());
        if (dl.size() < 3 || dl[0] != "dims") throw ParseError("bad dims line", ln);
        for (std::size_t i = 1; i < dl.size(); ++i) n.dims_.push_back(text::parse_int<std::size_t>(dl[i], ln));
        n.fourier_ = Eigen::MatrixXd(static_cast<Eigen::Index>(fr), static_cast<Eigen::Index>(fc));
        for (Eigen::Index i = 0; i < n.fourier_.size(); ++i) n.fourier_.data()[i] = text::parse_double(next(), ln);
        n.shape_.in_dim = n.shape_.encoder == Encoder::fourier ? fc : n.dims_.front();
        n.shape_.fourier_features = fr;
        n.shape_.out_dim = n.dims_.back();
        n.shape_.depth = n.dims_.size() - 2;
        n.shape_.width = n.dims_.size() > 2 ? n.dims_[1] : n.dims_.back();
        n.layout_params();
        n.theta_ = Eigen::VectorXd(static_cast<Eigen::Index>(n.param_count_));
        for (Eigen::Index i = 0; i < n.theta_.size(); ++i) n.theta_[i] = text::parse_double(next(), ln);
        return n;
    }

private:
    void build_layout() {
        dims_.clear();
        dims_.push_back(shape_.encoder == Encoder::fourier ? 2 * shape_.fourier_features : shape_.in_dim);
        for (std::size_t i = 0; i < shape_.depth; ++i) dims_.push_back(shape_.width);
        dims_.push_back(shape_.out_dim);
        layout_params();
    }

    void layout_params() {
        w_off_.clear();
        b_off_.clear();
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
            w_off_.push_back(off);
            off += dims_[l] * dims_[l + 1];
            b_off_.push_back(off);
            off += dims_[l + 1];
        }
        param_count_ = off;
    }

    void check_input(const Eigen::MatrixXd& x) const {
        if (static_cast<std::size_t>(x.rows()) != in_dim())
            throw ConfigError("network expects " + std::to_string(in_dim()) + " inputs, got " +
                              std::to_string(x.rows()));
    }

    Eigen::MatrixXd encode(const Eigen::MatrixXd& x) const {
        if (shape_.encoder == Encoder::identity) return x;
        const Eigen::ArrayXXd z = (2.0 * std::numbers::pi * fourier_ * x).array();
        Eigen::MatrixXd out(2 * fourier_.rows(), x.cols());
        out.topRows(fourier_.rows()) = z.sin().matrix();
        out.bottomRows(fourier_.rows()) = z.cos().matrix();
        return out;
    }

    /// Stacked jet of the encoded input; for the identity encoder the seed directions are unit vectors.
    Eigen::MatrixXd encode_jet(const Eigen::MatrixXd& x, const JetSpec& spec) const {
        const Eigen::Index b = x.cols();
        const std::size_t nd = spec.axes.size(), np = spec.pairs.size();
        const auto rows = static_cast<Eigen::Index>(dims_.front());
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(rows, b * static_cast<Eigen::Index>(spec.channels()));
        auto blk = [b](Eigen::MatrixXd& m, std::size_t c) { return m.middleCols(static_cast<Eigen::Index>(c) * b, b); };
        if (shape_.encoder == Encoder::identity) {
            blk(h, 0) = x;
            for (std::size_t d = 0; d < nd; ++d) blk(h, 1 + d).row(static_cast<Eigen::Index>(spec.axes[d])).setOnes();
            return h;
        }
        const double tau = 2.0 * std::numbers::pi;
        const Eigen::Index m = fourier_.rows();
        const Eigen::ArrayXXd z = (tau * fourier_ * x).array();
        const Eigen::ArrayXXd sn = z.sin(), cs = z.cos();
        blk(h, 0).topRows(m) = sn.matrix();
        blk(h, 0).bottomRows(m) = cs.matrix();
        for (std::size_t d = 0; d < nd; ++d) {
            const Eigen::ArrayXd zd = tau * fourier_.col(static_cast<Eigen::Index>(spec.axes[d])).array();
            blk(h, 1 + d).topRows(m) = (cs.colwise() * zd).matrix();
            blk(h, 1 + d).bottomRows(m) = (-(sn.colwise() * zd)).matrix();
        }
        for (std::size_t p = 0; p < np; ++p) {
            const auto [i, j] = spec.pairs[p];
            const Eigen::ArrayXd zz = tau * tau * fourier_.col(static_cast<Eigen::Index>(spec.axes[i])).array() *
                                      fourier_.col(static_cast<Eigen::Index>(spec.axes[j])).array();
            blk(h, 1 + nd + p).topRows(m) = (-(sn.colwise() * zz)).matrix();
            blk(h, 1 + nd + p).bottomRows(m) = (-(cs.colwise() * zz)).matrix();
        }
        return h;
    }

    NetworkShape shape_;
    std::vector<std::size_t> dims_;
    std::vector<std::size_t> w_off_, b_off_;
    std::size_t param_count_ = 0;
    Eigen::VectorXd theta_;
    Eigen::MatrixXd fourier_;
};

/// Step-decay learning rate alpha0 * gamma^floor(t / T).
struct LrSchedule {
    double lr0 = 1e-3;
    double gamma = 0.95;
    std::size_t decay_steps = 4000;

    double at(std::size_t t) const {
        return lr0 * std::pow(gamma, static_cast<double>(decay_steps ? t / decay_steps : 0));
    }
};

enum class OptimizerKind { sgd, adam };

inline OptimizerKind optimizer_from_name(std::string_view s) {
    if (s == "sgd") return OptimizerKind::sgd;
    if (s == "adam") return OptimizerKind::adam;
    throw ConfigError("unknown optimizer '" + std::string(s) + "' (valid: sgd, adam)");
}

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

class Optimizer {
public:
    Optimizer(OptimizerKind kind = OptimizerKind::adam, LrSchedule schedule = {}) : kind_(kind), schedule_(schedule) {
        if (!(schedule.lr0 > 0.0)) throw ConfigError("optimizer: learning rate must be positive");
        if (!(schedule.gamma > 0.0 && schedule.gamma <= 1.0)) throw ConfigError("optimizer: decay gamma must be in (0,1]");
    }

    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    std::size_t steps() const { return t_; }
    double current_lr() const { return schedule_.at(t_); }
    OptimizerKind kind() const { return kind_; }

    void step(Eigen::VectorXd& theta, const Eigen::VectorXd& grad) {
        if (grad.size() != theta.size()) throw ConfigError("optimizer: gradient size does not match parameters");
        const double lr = schedule_.at(t_);
        ++t_;
        if (kind_ == OptimizerKind::sgd) {
            theta -= lr * grad;
            return;
        }
        if (m_.size() != theta.size()) {
            m_ = Eigen::VectorXd::Zero(theta.size());
            v_ = Eigen::VectorXd::Zero(theta.size());
        }
        m_ = beta1 * m_ + (1.0 - beta1) * grad;
        v_ = beta2 * v_ + (1.0 - beta2) * grad.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        theta.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
    }

private:
    OptimizerKind kind_;
    LrSchedule schedule_;
    std::size_t t_ = 0;
    Eigen::VectorXd m_, v_;
};

}  // namespace sgm
