#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "sgm/error.hpp"
#include "sgm/text_io.hpp"

namespace sgm {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    bool contains(double v) const { return v >= lo && v <= hi; }
    double width() const { return hi - lo; }
};

struct FeatureSchema {
    std::vector<std::string> names;
    std::vector<std::size_t> spatial_dims;
    std::vector<std::size_t> param_dims;
    std::vector<Interval> bounds;

    std::size_t size() const { return names.size(); }

    void validate() const {
        if (names.empty()) throw ConfigError("feature schema has no features");
        if (bounds.size() != names.size()) throw ConfigError("feature schema: bounds/names size mismatch");
        for (const auto& b : bounds)
            if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || b.lo > b.hi)
                throw ConfigError("feature schema: bound interval must be finite with lo <= hi");
        std::vector<int> seen(names.size(), 0);
        for (auto d : spatial_dims) {
            if (d >= names.size()) throw ConfigError("feature schema: spatial index out of range");
            seen[d] |= 1;
        }
        for (auto d : param_dims) {
            if (d >= names.size()) throw ConfigError("feature schema: parameter index out of range");
            if (seen[d] & 1) throw ConfigError("feature schema: spatial and parameter dims overlap");
        }
    }

    /// Spatial followed by parameter indices.
    std::vector<std::size_t> spatial_and_params() const {
        auto out = spatial_dims;
        out.insert(out.end(), param_dims.begin(), param_dims.end());
        return out;
    }
};

/// -1 marks an interior point; j >= 0 marks a point of boundary constraint j.
using PointTag = int;
inline constexpr PointTag interior_tag = -1;

enum class DomainKind { unit_square, unit_square_param, annulus_lite };

struct DomainSpec {
    DomainKind kind = DomainKind::unit_square;
    /// Design-parameter interval (parameterized square: a; annulus: inner radius).
    Interval param{0.5, 2.0};
    bool latin_hypercube = false;

    static constexpr double annulus_outer_radius = 2.0;

    static DomainSpec from_name(std::string_view name) {
        DomainSpec d;
        if (name == "unit-square") {
            d.kind = DomainKind::unit_square;
        } else if (name == "unit-square-param") {
            d.kind = DomainKind::unit_square_param;
            d.param = {0.5, 2.0};
        } else if (name == "annulus-lite") {
            d.kind = DomainKind::annulus_lite;
            d.param = {0.75, 1.1};
        } else {
            throw ConfigError("unknown domain '" + std::string(name) +
                              "' (valid: unit-square, unit-square-param, annulus-lite)");
        }
        return d;
    }

    std::string name() const {
        switch (kind) {
            case DomainKind::unit_square: return "unit-square";
            case DomainKind::unit_square_param: return "unit-square-param";
            case DomainKind::annulus_lite: return "annulus-lite";
        }
        return {};
    }

    FeatureSchema schema() const {
        FeatureSchema s;
        switch (kind) {
            case DomainKind::unit_square:
                s.names = {"x", "y"};
                s.spatial_dims = {0, 1};
                s.bounds = {{0, 1}, {0, 1}};
                break;
            case DomainKind::unit_square_param:
                s.names = {"x", "y", "a"};
                s.spatial_dims = {0, 1};
                s.param_dims = {2};
                s.bounds = {{0, 1}, {0, 1}, param};
                break;
            case DomainKind::annulus_lite: {
                const double r = annulus_outer_radius;
                s.names = {"x", "y", "ri"};
                s.spatial_dims = {0, 1};
                s.param_dims = {2};
                s.bounds = {{-r, r}, {-r, r}, param};
                break;
            }
        }
        return s;
    }

    int n_constraints() const { return kind == DomainKind::annulus_lite ? 2 : 4; }

    /// Geometric predicate of boundary constraint j. Square edges are
    /// 0 bottom, 1 right, 2 top, 3 left; annulus: 0 inner circle, 1 outer circle.
    bool on_boundary(int j, const double* p, double tol = 1e-12) const {
        if (kind == DomainKind::annulus_lite) {
            const double rho = std::hypot(p[0], p[1]);
            if (j == 0) return std::abs(rho - p[2]) <= tol;
            if (j == 1) return std::abs(rho - annulus_outer_radius) <= tol;
            return false;
        }
        switch (j) {
            case 0: return std::abs(p[1]) <= tol;
            case 1: return std::abs(p[0] - 1.0) <= tol;
            case 2: return std::abs(p[1] - 1.0) <= tol;
            case 3: return std::abs(p[0]) <= tol;
            default: return false;
        }
    }

    bool strictly_inside(const double* p) const {
        if (kind == DomainKind::annulus_lite) {
            const double rho = std::hypot(p[0], p[1]);
            return rho > p[2] && rho < annulus_outer_radius;
        }
        return p[0] > 0.0 && p[0] < 1.0 && p[1] > 0.0 && p[1] < 1.0;
    }
};

/// N x M sample matrix with a feature schema and per-point constraint tags.
class PointCloud {
public:
    PointCloud() = default;

    PointCloud(FeatureSchema schema, RowMatrix data, std::vector<PointTag> tags)
        : schema_(std::move(schema)), data_(std::move(data)), tags_(std::move(tags)) {
        schema_.validate();
        if (data_.rows() < 1) throw ConfigError("point cloud must contain at least one point");
        if (static_cast<std::size_t>(data_.cols()) != schema_.size())
            throw ConfigError("point cloud: column count does not match schema");
        if (tags_.size() != static_cast<std::size_t>(data_.rows()))
            throw ConfigError("point cloud: tag count does not match row count");
        for (Eigen::Index i = 0; i < data_.rows(); ++i)
            for (Eigen::Index c = 0; c < data_.cols(); ++c)
                if (!std::isfinite(data_(i, c)) || !schema_.bounds[c].contains(data_(i, c)))
                    throw ConfigError("point cloud: point " + std::to_string(i) + " lies outside the schema bounds");
    }

    const FeatureSchema& schema() const { return schema_; }
    const RowMatrix& data() const { return data_; }
    const std::vector<PointTag>& tags() const { return tags_; }
    std::size_t size() const { return static_cast<std::size_t>(data_.rows()); }
    std::size_t dims() const { return static_cast<std::size_t>(data_.cols()); }
    const double* point(std::size_t i) const { return data_.row(static_cast<Eigen::Index>(i)).data(); }

    std::vector<std::size_t> interior_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < tags_.size(); ++i)
            if (tags_[i] == interior_tag) out.push_back(i);
        return out;
    }
    std::vector<std::size_t> boundary_indices() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < tags_.size(); ++i)
            if (tags_[i] != interior_tag) out.push_back(i);
        return out;
    }

    /// Rows `rows`, columns `cols` as a dense matrix.
    RowMatrix select(const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) const {
        RowMatrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < cols.size(); ++c)
                out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    data_(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(cols[c]));
        return out;
    }

    /// Subset of the cloud (rows in the given order).
    PointCloud subset(const std::vector<std::size_t>& rows) const {
        std::vector<std::size_t> cols(dims());
        for (std::size_t c = 0; c < cols.size(); ++c) cols[c] = c;
        std::vector<PointTag> t(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) t[r] = tags_[rows[r]];
        return PointCloud(schema_, select(rows, cols), std::move(t));
    }

private:
    FeatureSchema schema_;
    RowMatrix data_;
    std::vector<PointTag> tags_;
};

namespace detail {

/// Uniform variate in the open interval (0, 1).
inline double open_unit(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double v = 0.0;
    do { v = u(rng); } while (v <= 0.0);
    return v;
}

/// n x d matrix of open-unit variates, optionally Latin-hypercube stratified per column.
inline RowMatrix unit_variates(std::size_t n, std::size_t d, bool lhs, std::mt19937_64& rng) {
    RowMatrix u(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    if (!lhs) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < d; ++c) u(i, c) = open_unit(rng);
        return u;
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t c = 0; c < d; ++c) {
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < n; ++i)
            u(i, c) = (static_cast<double>(perm[i]) + open_unit(rng)) / static_cast<double>(n);
    }
    return u;
}

}  // namespace detail

/// Random collocation cloud: uniform i.i.d. interior points (or Latin hypercube when
/// requested) followed by boundary points assigned round-robin to the constraints.
inline PointCloud generate(const DomainSpec& domain, std::size_t n_interior, std::size_t n_boundary,
                           std::uint64_t seed) {
    if (n_interior < 1 || n_boundary < 1) throw ConfigError("generate: point counts must be >= 1");
    if (!(domain.param.lo <= domain.param.hi)) throw ConfigError("generate: invalid parameter interval");
    std::mt19937_64 rng(seed);
    const FeatureSchema schema = domain.schema();
    const std::size_t m = schema.size();
    RowMatrix data(static_cast<Eigen::Index>(n_interior + n_boundary), static_cast<Eigen::Index>(m));
    std::vector<PointTag> tags(n_interior + n_boundary, interior_tag);
    const Interval par = domain.param;

    const RowMatrix u = detail::unit_variates(n_interior, m, domain.latin_hypercube, rng);
    for (std::size_t i = 0; i < n_interior; ++i) {
        auto row = data.row(static_cast<Eigen::Index>(i));
        switch (domain.kind) {
            case DomainKind::unit_square:
                row << u(i, 0), u(i, 1);
                break;
            case DomainKind::unit_square_param:
                row << u(i, 0), u(i, 1), par.lo + u(i, 2) * par.width();
                break;
            case DomainKind::annulus_lite: {
                const double ri = par.lo + u(i, 2) * par.width();
                const double ro = DomainSpec::annulus_outer_radius;
                const double rho = std::sqrt(ri * ri + u(i, 0) * (ro * ro - ri * ri));
                const double th = 2.0 * std::numbers::pi * u(i, 1);
                row << rho * std::cos(th), rho * std::sin(th), ri;
                break;
            }
        }
    }

    const int nc = domain.n_constraints();
    for (std::size_t b = 0; b < n_boundary; ++b) {
        const std::size_t i = n_interior + b;
        const int j = static_cast<int>(b % static_cast<std::size_t>(nc));
        tags[i] = j;
        auto row = data.row(static_cast<Eigen::Index>(i));
        const double t = detail::open_unit(rng);
        if (domain.kind == DomainKind::annulus_lite) {
            const double ri = par.lo + detail::open_unit(rng) * par.width();
            const double rho = j == 0 ? ri : DomainSpec::annulus_outer_radius;
            const double th = 2.0 * std::numbers::pi * t;
            row << rho * std::cos(th), rho * std::sin(th), ri;
            continue;
        }
        double x = 0.0, y = 0.0;
        switch (j) {
            case 0: x = t; y = 0.0; break;
            case 1: x = 1.0; y = t; break;
            case 2: x = t; y = 1.0; break;
            default: x = 0.0; y = t; break;
        }
        if (domain.kind == DomainKind::unit_square_param)
            row << x, y, par.lo + detail::open_unit(rng) * par.width();
        else
            row << x, y;
    }
    return PointCloud(schema, std::move(data), std::move(tags));
}

// CSV layout:
//   # features: x,y[,a]
//   # spatial: 0,1
//   # params: 2
//   # bounds: 0:1,0:1,0.5:2
//   <M numeric fields>,<tag>        tag = interior | boundary:<j>

inline void save(const PointCloud& pc, const std::string& path) {
    auto out = text::open_out(path);
    const auto& s = pc.schema();
    auto join_idx = [](const std::vector<std::size_t>& v) {
        std::string r;
        for (std::size_t i = 0; i < v.size(); ++i) r += (i ? "," : "") + std::to_string(v[i]);
        return r;
    };
    out << "# features: ";
    for (std::size_t i = 0; i < s.names.size(); ++i) out << (i ? "," : "") << s.names[i];
    out << "\n# spatial: " << join_idx(s.spatial_dims) << "\n# params: " << join_idx(s.param_dims) << "\n# bounds: ";
    for (std::size_t i = 0; i < s.bounds.size(); ++i)
        out << (i ? "," : "") << text::format_double(s.bounds[i].lo) << ':' << text::format_double(s.bounds[i].hi);
    out << '\n';
    for (std::size_t i = 0; i < pc.size(); ++i) {
        const double* p = pc.point(i);
        for (std::size_t c = 0; c < pc.dims(); ++c) out << text::format_double(p[c]) << ',';
        const PointTag t = pc.tags()[i];
        if (t == interior_tag) out << "interior\n";
        else out << "boundary:" << t << '\n';
    }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline PointCloud load(const std::string& path) {
    auto in = text::open_in(path);
    std::string line;
    std::size_t lineno = 0;
    FeatureSchema schema;
    bool have_header = false, have_spatial = false, have_bounds = false;
    std::vector<double> values;
    std::vector<PointTag> tags;

    auto parse_indices = [](std::string_view body, std::size_t ln) {
        std::vector<std::size_t> v;
        if (text::trim(body).empty()) return v;
        for (auto f : text::split(body, ',')) v.push_back(text::parse_int<std::size_t>(f, ln));
        return v;
    };

    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv = text::trim(line);
        if (sv.empty()) continue;
        if (!have_header) {
            constexpr std::string_view key = "# features:";
            if (sv.substr(0, key.size()) != key) throw ParseError("no header", lineno);
            for (auto f : text::split(sv.substr(key.size()), ',')) {
                if (f.empty()) throw ParseError("empty feature name", lineno);
                schema.names.emplace_back(f);
            }
            have_header = true;
            continue;
        }
        if (sv.front() == '#') {
            auto colon = sv.find(':');
            if (colon == std::string_view::npos) continue;
            const auto key = text::trim(sv.substr(1, colon - 1));
            const auto body = sv.substr(colon + 1);
            if (key == "spatial") {
                schema.spatial_dims = parse_indices(body, lineno);
                have_spatial = true;
            } else if (key == "params") {
                schema.param_dims = parse_indices(body, lineno);
            } else if (key == "bounds") {
                for (auto f : text::split(body, ',')) {
                    auto c = f.find(':');
                    if (c == std::string_view::npos) throw ParseError("bounds entry must be lo:hi", lineno);
                    schema.bounds.push_back({text::parse_double(f.substr(0, c), lineno),
                                             text::parse_double(f.substr(c + 1), lineno)});
                }
                if (schema.bounds.size() != schema.names.size())
                    throw ParseError("bounds count does not match feature count", lineno);
                have_bounds = true;
            }
            continue;
        }
        const auto fields = text::split(sv, ',');
        const std::size_t m = schema.names.size();
        if (fields.size() != m + 1)
            throw ParseError("expected " + std::to_string(m) + " features plus a tag, got " +
                                 std::to_string(fields.size()) + " columns",
                             lineno);
        for (std::size_t c = 0; c < m; ++c) values.push_back(text::parse_double(fields[c], lineno));
        const auto tag = fields[m];
        if (tag == "interior") {
            tags.push_back(interior_tag);
        } else if (tag.substr(0, 9) == "boundary:") {
            tags.push_back(text::parse_int<int>(tag.substr(9), lineno));
        } else {
            throw ParseError("unknown tag '" + std::string(tag) + "'", lineno);
        }
    }
    if (!have_header) throw ParseError("no header", 0);
    if (tags.empty()) throw ParseError("no data rows", lineno);
    const std::size_t m = schema.names.size();
    RowMatrix data(static_cast<Eigen::Index>(tags.size()), static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < tags.size(); ++i)
        for (std::size_t c = 0; c < m; ++c) data(i, c) = values[i * m + c];
    if (!have_spatial) {
        schema.spatial_dims.clear();
        for (std::size_t c = 0; c < m; ++c)
            if (std::find(schema.param_dims.begin(), schema.param_dims.end(), c) == schema.param_dims.end())
                schema.spatial_dims.push_back(c);
    }
    if (!have_bounds) {
        for (std::size_t c = 0; c < m; ++c)
            schema.bounds.push_back({data.col(c).minCoeff(), data.col(c).maxCoeff()});
    }
    return PointCloud(std::move(schema), std::move(data), std::move(tags));
}

}  // namespace sgm
