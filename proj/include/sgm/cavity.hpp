#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "sgm/error.hpp"

namespace sgm {

struct CavityOptions {
    std::size_t n = 129;  // nodes per side, walls included
    double reynolds = 100.0;
    double tol = 1e-8;    // max-norm of the discrete residual
    int max_newton = 40;
};

/// Steady lid-driven cavity on the unit square (lid y = 1 moving with u = 1).
/// Fields are indexed (i, j) with x = i*h, y = j*h.
struct CavitySolution {
    std::size_t n = 0;
    double h = 0.0;
    double residual = 0.0;
    int iterations = 0;
    Eigen::MatrixXd psi, omega, u, v;

    /// Bilinear interpolation of a nodal field.
    double sample(const Eigen::MatrixXd& f, double x, double y) const {
        const double gx = std::clamp(x / h, 0.0, static_cast<double>(n - 1));
        const double gy = std::clamp(y / h, 0.0, static_cast<double>(n - 1));
        const auto i = std::min(static_cast<Eigen::Index>(gx), static_cast<Eigen::Index>(n - 2));
        const auto j = std::min(static_cast<Eigen::Index>(gy), static_cast<Eigen::Index>(n - 2));
        const double tx = gx - static_cast<double>(i), ty = gy - static_cast<double>(j);
        return (1 - tx) * (1 - ty) * f(i, j) + tx * (1 - ty) * f(i + 1, j) + (1 - tx) * ty * f(i, j + 1) +
               tx * ty * f(i + 1, j + 1);
    }
    double sample_u(double x, double y) const { return sample(u, x, y); }
    double sample_v(double x, double y) const { return sample(v, x, y); }
};

/// Stream-function/vorticity finite differences, solved by Newton's method on the
/// fully coupled system. Unknowns: psi at interior nodes, omega at every node. Wall
/// vorticity uses the second-order one-sided (Jensen) formula.
inline CavitySolution solve_cavity(const CavityOptions& opt = {}) {
    const std::size_t n = opt.n;
    if (n < 5) throw ConfigError("cavity: need at least 5 nodes per side");
    const double h = 1.0 / static_cast<double>(n - 1), h2 = h * h, nu = 1.0 / opt.reynolds;
    const auto m = static_cast<Eigen::Index>(n - 2);
    const Eigen::Index n_psi = m * m, n_all = n_psi + static_cast<Eigen::Index>(n * n);
    auto ip = [&](std::size_t i, std::size_t j) { return static_cast<Eigen::Index>((i - 1) * (n - 2) + (j - 1)); };
    auto iw = [&](std::size_t i, std::size_t j) { return n_psi + static_cast<Eigen::Index>(i * n + j); };
    auto interior = [&](std::size_t i, std::size_t j) { return i > 0 && j > 0 && i + 1 < n && j + 1 < n; };

    Eigen::VectorXd z = Eigen::VectorXd::Zero(n_all);
    auto psi = [&](std::size_t i, std::size_t j) { return interior(i, j) ? z[ip(i, j)] : 0.0; };
    auto om = [&](std::size_t i, std::size_t j) { return z[iw(i, j)]; };

    CavitySolution sol;
    sol.n = n;
    sol.h = h;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    for (int it = 0; it <= opt.max_newton; ++it) {
        Eigen::VectorXd f(n_all);
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(n_all) * 12);
        auto add_psi = [&](Eigen::Index row, std::size_t i, std::size_t j, double c) {
            if (interior(i, j)) t.emplace_back(row, ip(i, j), c);
        };
        for (std::size_t i = 1; i + 1 < n; ++i) {
            for (std::size_t j = 1; j + 1 < n; ++j) {
                // Poisson equation for the stream function: lap(psi) + omega = 0
                const Eigen::Index r1 = ip(i, j);
                f[r1] = (psi(i + 1, j) + psi(i - 1, j) + psi(i, j + 1) + psi(i, j - 1) - 4 * psi(i, j)) / h2 + om(i, j);
                add_psi(r1, i + 1, j, 1 / h2);
                add_psi(r1, i - 1, j, 1 / h2);
                add_psi(r1, i, j + 1, 1 / h2);
                add_psi(r1, i, j - 1, 1 / h2);
                add_psi(r1, i, j, -4 / h2);
                t.emplace_back(r1, iw(i, j), 1.0);

                // vorticity transport: u w_x + v w_y - nu lap(w) = 0
                const Eigen::Index r2 = iw(i, j);
                const double u = (psi(i, j + 1) - psi(i, j - 1)) / (2 * h);
                const double v = -(psi(i + 1, j) - psi(i - 1, j)) / (2 * h);
                const double wx = (om(i + 1, j) - om(i - 1, j)) / (2 * h);
                const double wy = (om(i, j + 1) - om(i, j - 1)) / (2 * h);
                const double lw = (om(i + 1, j) + om(i - 1, j) + om(i, j + 1) + om(i, j - 1) - 4 * om(i, j)) / h2;
                f[r2] = u * wx + v * wy - nu * lw;
                add_psi(r2, i, j + 1, wx / (2 * h));
                add_psi(r2, i, j - 1, -wx / (2 * h));
                add_psi(r2, i + 1, j, -wy / (2 * h));
                add_psi(r2, i - 1, j, wy / (2 * h));
                t.emplace_back(r2, iw(i + 1, j), u / (2 * h) - nu / h2);
                t.emplace_back(r2, iw(i - 1, j), -u / (2 * h) - nu / h2);
                t.emplace_back(r2, iw(i, j + 1), v / (2 * h) - nu / h2);
                t.emplace_back(r2, iw(i, j - 1), -v / (2 * h) - nu / h2);
                t.emplace_back(r2, iw(i, j), 4 * nu / h2);
            }
        }
        // second-order wall vorticity: omega_w = -(8 psi_1 - psi_2) / (2 h^2) - 3 U_lid / h
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t last = n - 1;
            struct Wall {
                std::size_t i, j, ai, aj, bi, bj;
                double lid;
            };
            const Wall walls[4] = {{k, 0, k, 1, k, 2, 0.0},
                                   {k, last, k, last - 1, k, last - 2, 1.0},
                                   {0, k, 1, k, 2, k, 0.0},
                                   {last, k, last - 1, k, last - 2, k, 0.0}};
            for (const auto& w : walls) {
                const Eigen::Index r = iw(w.i, w.j);
                const bool corner = (w.i == 0 || w.i == last) && (w.j == 0 || w.j == last);
                if (corner) {
                    f[r] = om(w.i, w.j);
                    t.emplace_back(r, r, 1.0);
                    continue;
                }
                f[r] = om(w.i, w.j) + (8 * psi(w.ai, w.aj) - psi(w.bi, w.bj)) / (2 * h2) + 3 * w.lid / h;
                t.emplace_back(r, r, 1.0);
                add_psi(r, w.ai, w.aj, 4 / h2);
                add_psi(r, w.bi, w.bj, -1 / (2 * h2));
            }
        }
        sol.residual = f.cwiseAbs().maxCoeff();
        sol.iterations = it;
        if (sol.residual < opt.tol) break;
        if (it == opt.max_newton || !std::isfinite(sol.residual))
            throw NumericError("cavity: Newton iteration did not converge (residual " + std::to_string(sol.residual) + ")");
        Eigen::SparseMatrix<double> jac(n_all, n_all);
        jac.setFromTriplets(t.begin(), t.end());  // duplicate wall triplets on shared corners are summed
        jac.makeCompressed();
        if (it == 0) lu.analyzePattern(jac);
        lu.factorize(jac);
        if (lu.info() != Eigen::Success) throw NumericError("cavity: Jacobian factorization failed");
        z -= lu.solve(f);
    }

    sol.psi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    sol.omega = sol.psi;
    sol.u = sol.psi;
    sol.v = sol.psi;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
            sol.psi(a, b) = psi(i, j);
            sol.omega(a, b) = om(i, j);
            if (interior(i, j)) {
                sol.u(a, b) = (psi(i, j + 1) - psi(i, j - 1)) / (2 * h);
                sol.v(a, b) = -(psi(i + 1, j) - psi(i - 1, j)) / (2 * h);
            } else if (j == n - 1 && i > 0 && i + 1 < n) {
                sol.u(a, b) = 1.0;  // corners belong to the stationary side walls
            }
        }
    return sol;
}

/// Process-wide cache: the reference is deterministic and costly relative to a test.
inline std::shared_ptr<const CavitySolution> cached_cavity(const CavityOptions& opt = {}) {
    static std::mutex mu;
    static std::map<std::pair<std::size_t, double>, std::shared_ptr<const CavitySolution>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[{opt.n, opt.reynolds}];
    if (!slot) slot = std::make_shared<const CavitySolution>(solve_cavity(opt));
    return slot;
}

}  // namespace sgm
