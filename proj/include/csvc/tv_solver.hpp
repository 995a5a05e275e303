#pragma once

// Total-variation reconstruction of an image from linear measurements:
//
//     min_x  TV(x)   s.t.  A x = y
//
// solved in penalized form TV(x) + mu/2 |Ax - y|^2 by alternating
// minimization on the split w ~ grad(x). The augmented Lagrangian is
//
//     sum_i |w_i| + beta/2 |Dx - w - nu/beta|^2 + mu/2 |Ax - y - lambda/mu|^2
//
// with w found by shrinkage, x advanced by one Barzilai-Borwein gradient step
// per inner iteration, multipliers (nu, lambda) updated after each stage, and
// mu doubled from stage to stage until it reaches the requested value.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "csvc/errors.hpp"
#include "csvc/measurement.hpp"

namespace csvc {

struct SolverParams {
    double mu = 4096.0;      // final data-fidelity weight (2^12)
    double beta = 64.0;      // splitting weight
    double tol = 1e-4;       // relative change of x ending an inner loop
    int max_outer = 9;       // continuation stages, mu doubles per stage
    int max_inner = 40;      // alternating iterations per stage
    bool isotropic = true;

    void validate() const {
        if (!(mu > 0) || !(beta > 0) || !(tol > 0)) {
            throw InvalidArgument("solver: mu, beta and tol must be positive");
        }
        if (max_outer < 1 || max_inner < 1) throw InvalidArgument("solver: iteration caps must be >= 1");
    }
};

/// Diagnostics for one continuation stage.
struct StageReport {
    double mu = 0;
    double beta = 0;
    int inner_iterations = 0;
    bool reached_tol = false;
    /// |Ax - y| at the end of the stage, in the units of y.
    double residual_norm = 0;
    /// Augmented Lagrangian after each w-update; non-increasing within a stage.
    std::vector<double> objective;
};

struct ReconResult {
    std::vector<double> x;
    int iterations = 0;
    double final_residual_norm = 0;
    /// The last stage ended because the relative change dropped to tol.
    bool converged = false;
    std::vector<StageReport> stages;
};

struct Gradient2D {
    std::vector<double> dx;  // x[r][c+1] - x[r][c], 0 in the last column
    std::vector<double> dy;  // x[r+1][c] - x[r][c], 0 in the last row
};

namespace detail {

inline void check_grid(std::size_t n, int width, int height, const char* op) {
    if (width <= 0 || height <= 0 ||
        n != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
        throw InvalidArgument(std::string(op) + ": vector length " + std::to_string(n) +
                              " does not match " + std::to_string(width) + "x" + std::to_string(height));
    }
}

inline void grad_into(std::span<const double> x, int width, int height, std::span<double> dx,
                      std::span<double> dy) {
    const auto w = static_cast<std::size_t>(width);
    const auto h = static_cast<std::size_t>(height);
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t base = r * w;
        for (std::size_t c = 0; c + 1 < w; ++c) dx[base + c] = x[base + c + 1] - x[base + c];
        dx[base + w - 1] = 0.0;
        if (r + 1 < h) {
            for (std::size_t c = 0; c < w; ++c) dy[base + c] = x[base + w + c] - x[base + c];
        } else {
            for (std::size_t c = 0; c < w; ++c) dy[base + c] = 0.0;
        }
    }
}

// out = div(p, q) = -D^T (p, q)
inline void div_into(std::span<const double> p, std::span<const double> q, int width, int height,
                     std::span<double> out) {
    const auto w = static_cast<std::size_t>(width);
    const auto h = static_cast<std::size_t>(height);
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t base = r * w;
        for (std::size_t c = 0; c < w; ++c) {
            double v = 0.0;
            if (c + 1 < w) v += p[base + c];
            if (c > 0) v -= p[base + c - 1];
            if (r + 1 < h) v += q[base + c];
            if (r > 0) v -= q[base + c - w];
            out[base + c] = v;
        }
    }
}

inline void shrink_pixel(double gx, double gy, double t, bool isotropic, double& ox, double& oy) {
    if (isotropic) {
        const double norm = std::hypot(gx, gy);
        const double f = norm > t ? (norm - t) / norm : 0.0;
        ox = gx * f;
        oy = gy * f;
    } else {
        ox = std::copysign(std::max(std::abs(gx) - t, 0.0), gx);
        oy = std::copysign(std::max(std::abs(gy) - t, 0.0), gy);
    }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace detail

/// Forward differences with replicate boundary (last difference is zero).
inline Gradient2D grad2d(std::span<const double> x, int width, int height) {
    detail::check_grid(x.size(), width, height, "grad2d");
    Gradient2D g{std::vector<double>(x.size()), std::vector<double>(x.size())};
    detail::grad_into(x, width, height, g.dx, g.dy);
    return g;
}

/// Discrete divergence, the negative adjoint of grad2d.
inline std::vector<double> div2d(std::span<const double> p, std::span<const double> q, int width,
                                 int height) {
    detail::check_grid(p.size(), width, height, "div2d");
    detail::check_grid(q.size(), width, height, "div2d");
    std::vector<double> out(p.size());
    detail::div_into(p, q, width, height, out);
    return out;
}

/// Per-pixel shrinkage of a gradient field by threshold t.
inline Gradient2D shrink(std::span<const double> gx, std::span<const double> gy, double t,
                         bool isotropic = true) {
    if (gx.size() != gy.size()) throw InvalidArgument("shrink: component length mismatch");
    if (!(t >= 0)) throw InvalidArgument("shrink: threshold must be >= 0");
    Gradient2D out{std::vector<double>(gx.size()), std::vector<double>(gx.size())};
    for (std::size_t i = 0; i < gx.size(); ++i) {
        detail::shrink_pixel(gx[i], gy[i], t, isotropic, out.dx[i], out.dy[i]);
    }
    return out;
}

/// Total variation of the image x.
inline double total_variation(std::span<const double> x, int width, int height, bool isotropic = true) {
    const auto g = grad2d(x, width, height);
    double tv = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        tv += isotropic ? std::hypot(g.dx[i], g.dy[i]) : std::abs(g.dx[i]) + std::abs(g.dy[i]);
    }
    return tv;
}

/// Recover an image of width x height from y = A x. Deterministic: the same
/// inputs always give bit-identical output.
inline ReconResult reconstruct(const MeasurementMatrix& a, std::span<const double> y, int width,
                               int height, const SolverParams& params = {}) {
    params.validate();
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    if (y.size() != m) {
        throw InvalidArgument("reconstruct: measurement length " + std::to_string(y.size()) +
                              " != matrix rows " + std::to_string(m));
    }
    detail::check_grid(n, width, height, "reconstruct");

    double scale = 0.0;
    for (double v : y) {
        if (!std::isfinite(v)) throw InvalidArgument("reconstruct: non-finite measurement");
        scale = std::max(scale, std::abs(v));
    }

    ReconResult result;
    result.x.assign(n, 0.0);
    if (scale == 0.0) {
        result.converged = true;
        return result;
    }

    // Work on y / max|y| so the penalty weights do not depend on signal amplitude.
    std::vector<double> b(m);
    for (std::size_t i = 0; i < m; ++i) b[i] = y[i] / scale;

    std::vector<double> x(n), ax(m), gx(n), gy(n), wx(n), wy(n), nux(n, 0.0), nuy(n, 0.0);
    std::vector<double> lambda(m, 0.0), r(m), drx(n), dry(n), g(n), g_prev(n), ag(m), dgx(n), dgy(n),
        tmp(n);

    detail::adjoint_into(a, b, x);
    detail::measure_into(a, x, ax);
    detail::grad_into(x, width, height, gx, gy);

    const bool iso = params.isotropic;
    auto w_step = [&](double beta) {
        const double t = 1.0 / beta;
        double tv = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            detail::shrink_pixel(gx[i] - nux[i] / beta, gy[i] - nuy[i] / beta, t, iso, wx[i], wy[i]);
            tv += iso ? std::hypot(wx[i], wy[i]) : std::abs(wx[i]) + std::abs(wy[i]);
        }
        return tv;
    };

    for (int stage = 0; stage < params.max_outer; ++stage) {
        const double f = std::ldexp(1.0, stage - (params.max_outer - 1));
        const double mu = params.mu * f;
        const double beta = params.beta;

        StageReport report;
        report.mu = mu;
        report.beta = beta;

        bool have_prev = false;
        double prev_step = 0.0;
        for (int it = 0; it < params.max_inner; ++it) {
            const double tv_w = w_step(beta);

            double d_norm2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                drx[i] = gx[i] - wx[i] - nux[i] / beta;
                dry[i] = gy[i] - wy[i] - nuy[i] / beta;
                d_norm2 += drx[i] * drx[i] + dry[i] * dry[i];
            }
            double r_norm2 = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                r[i] = ax[i] - b[i] - lambda[i] / mu;
                r_norm2 += r[i] * r[i];
            }
            report.objective.push_back(tv_w + 0.5 * beta * d_norm2 + 0.5 * mu * r_norm2);

            // g = beta * D^T dr + mu * A^T r
            detail::div_into(drx, dry, width, height, tmp);
            detail::adjoint_into(a, r, g);
            double g_norm2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                g[i] = mu * g[i] - beta * tmp[i];
                g_norm2 += g[i] * g[i];
            }
            ++result.iterations;
            ++report.inner_iterations;
            if (g_norm2 == 0.0) {
                report.reached_tol = true;
                break;
            }

            detail::measure_into(a, g, ag);
            detail::grad_into(g, width, height, dgx, dgy);
            const double curvature = beta * (detail::dot(dgx, dgx) + detail::dot(dgy, dgy)) +
                                     mu * detail::dot(ag, ag);
            // With w fixed the Lagrangian is quadratic along -g and minimized at step = |g|^2 / curvature.
            const double exact_step = g_norm2 / curvature;

            double step = exact_step;
            if (have_prev) {
                // BB1 step from s = -prev_step * g_prev and the change in gradient.
                double s_dot_y = 0.0;
                for (std::size_t i = 0; i < n; ++i) s_dot_y += g_prev[i] * (g_prev[i] - g[i]);
                s_dot_y *= prev_step;
                const double s_dot_s = prev_step * prev_step * detail::dot(g_prev, g_prev);
                if (s_dot_y > 0.0) step = s_dot_s / s_dot_y;
            }
            // Armijo with c = 1e-4 on the quadratic reduces to step <= 2(1 - 1e-4) * exact_step.
            while (step > 2.0 * (1.0 - 1e-4) * exact_step) step *= 0.5;

            double x_norm2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                x[i] -= step * g[i];
                gx[i] -= step * dgx[i];
                gy[i] -= step * dgy[i];
                x_norm2 += x[i] * x[i];
            }
            for (std::size_t i = 0; i < m; ++i) ax[i] -= step * ag[i];

            g_prev.swap(g);
            prev_step = step;
            have_prev = true;

            const double rel_change = step * std::sqrt(g_norm2) / std::max(std::sqrt(x_norm2), 1e-300);
            if (rel_change <= params.tol) {
                report.reached_tol = true;
                break;
            }
        }

        w_step(beta);
        for (std::size_t i = 0; i < n; ++i) {
            nux[i] -= beta * (gx[i] - wx[i]);
            nuy[i] -= beta * (gy[i] - wy[i]);
        }
        double res2 = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double ri = ax[i] - b[i];
            lambda[i] -= mu * ri;
            res2 += ri * ri;
        }
        report.residual_norm = std::sqrt(res2) * scale;
        result.converged = report.reached_tol;
        result.stages.push_back(std::move(report));
    }

    // Recompute A x from scratch so the reported residual carries no drift
    // from the incremental updates.
    detail::measure_into(a, x, ax);
    double res2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double ri = ax[i] - b[i];
        res2 += ri * ri;
    }
    result.final_residual_norm = std::sqrt(res2) * scale;
    for (std::size_t i = 0; i < n; ++i) x[i] *= scale;
    result.x = std::move(x);
    return result;
}

}  // namespace csvc
