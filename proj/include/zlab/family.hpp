#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "zlab/complex_matrix.hpp"
#include "zlab/detail/parallel.hpp"
#include "zlab/errors.hpp"
#include "zlab/expmap.hpp"
#include "zlab/group.hpp"
#include "zlab/projective.hpp"

namespace zlab {

/// Indexed family {f_j} of holomorphic maps Omega -> P^n over a group
/// instance. The evaluator must be defined on a neighborhood of the closure
/// of Omega (finite-difference stencils step slightly outside membership).
/// When the analytic frame differential is present it must agree with the
/// numeric one; spot_check_differential enforces that on sampled points.
struct HoloFamily {
    const GroupInstance* source = nullptr;
    std::size_t target_dim = 1; // n of P^n
    std::string description;
    std::function<ProjectivePoint(int, const GroupElement&)> eval;
    /// optional: (j, g) -> frame matrix (target frame rows x source coords)
    std::function<ComplexMatrix(int, const GroupElement&)> frame_differential;
    std::function<bool(const GroupElement&)> in_domain;
};

/// Exp-ball region: image under exp_at(center, .) of the metric ball of the
/// given radius in the algebra, scanned on a lattice with grid_per_axis
/// points per real axis.
struct Region {
    GroupElement center;
    double radius = 0.0;
    std::size_t grid_per_axis = 41;
};

namespace detail {

/// Lattice offsets covering [-r, r]^{2m} restricted to the metric ball,
/// enumerated row-major over the axes (re_0, im_0, re_1, im_1, ...). The
/// enumeration order is the tie-break order of every deterministic scan.
inline std::vector<AlgebraVector> ball_lattice(std::size_t m, double radius,
                                               std::size_t per_axis) {
    if (per_axis == 0) throw invalid_input("ball_lattice: grid must have >= 1 point per axis");
    if (!(radius >= 0.0)) throw invalid_input("ball_lattice: radius must be >= 0");
    const std::size_t axes = 2 * m;
    double total = 1.0;
    for (std::size_t a = 0; a < axes; ++a) total *= double(per_axis);
    if (total > 2e7)
        throw scan_failure("ball_lattice: lattice of " + std::to_string(total) +
                           " nodes exceeds the 2e7 cap; lower the grid resolution");

    // tick = r*(2i/(n-1) - 1): exactly 0 at the center of an odd grid and
    // exactly +/-r at the ends
    std::vector<double> ticks(per_axis, 0.0);
    if (per_axis > 1)
        for (std::size_t i = 0; i < per_axis; ++i)
            ticks[i] = radius * (2.0 * double(i) / double(per_axis - 1) - 1.0);

    std::vector<AlgebraVector> nodes;
    nodes.reserve(std::size_t(std::min(total, 4e6)));
    std::vector<std::size_t> idx(axes, 0);
    const double r2 = radius * radius * (1.0 + 1e-12);
    for (;;) {
        double norm2 = 0.0;
        std::vector<cdouble> c(m);
        for (std::size_t d = 0; d < m; ++d) {
            c[d] = cdouble(ticks[idx[2 * d]], ticks[idx[2 * d + 1]]);
            norm2 += std::norm(c[d]);
        }
        if (norm2 <= r2) nodes.emplace_back(std::move(c));
        std::size_t a = axes;
        while (a > 0) {
            --a;
            if (++idx[a] < per_axis) break;
            idx[a] = 0;
            if (a == 0) return nodes;
        }
    }
}

/// Deterministic unit directions for boundary sampling: all +/- real and
/// imaginary axes plus `extra` seeded random ones.
inline std::vector<AlgebraVector> boundary_directions(std::size_t m, std::size_t extra,
                                                      std::uint64_t seed) {
    std::vector<AlgebraVector> dirs;
    for (std::size_t d = 0; d < m; ++d) {
        for (double s : {1.0, -1.0}) {
            std::vector<cdouble> re(m, cdouble(0.0, 0.0));
            re[d] = s;
            dirs.emplace_back(std::move(re));
            std::vector<cdouble> im(m, cdouble(0.0, 0.0));
            im[d] = cdouble(0.0, s);
            dirs.emplace_back(std::move(im));
        }
    }
    GaussianStream gs(seed);
    for (std::size_t k = 0; k < extra; ++k) dirs.push_back(random_unit(gs, m));
    return dirs;
}

} // namespace detail

/// Checks that the closure of the region's exp-ball lies in the family
/// domain, by membership of boundary samples.
inline void validate_region(const HoloFamily& fam, const Region& region,
                            std::uint64_t seed = 20240809) {
    if (!(region.radius > 0.0)) throw invalid_input("region radius must be positive");
    const std::size_t m = fam.source->dim();
    fam.source->require_same_instance(region.center);
    if (!fam.in_domain(region.center))
        throw domain_violation("region center is outside the family domain");
    for (const AlgebraVector& u : detail::boundary_directions(m, 64, seed)) {
        const GroupElement edge = exp_at(region.center, u.scaled(region.radius));
        if (!fam.in_domain(edge))
            throw domain_violation("region closure leaves the family domain");
    }
}

/// Frame matrix of (df_j)_g by central finite differences of the affine
/// chart map, pushed into the Fubini-Study frame at f_j(g).
inline ComplexMatrix numeric_frame_matrix(const HoloFamily& fam, int j, const GroupElement& g,
                                          double h = 1e-5) {
    const std::size_t m = fam.source->dim();
    const ProjectivePoint q0 = fam.eval(j, g);
    const std::size_t chart = dominant_chart(q0);
    auto map = [&](const std::vector<cdouble>& zeta) {
        return affine_chart(fam.eval(j, exp_at(g, AlgebraVector(zeta))), chart);
    };
    const ComplexMatrix jac = numeric_jacobian(map, std::vector<cdouble>(m, cdouble(0.0, 0.0)), h);
    return chart_to_frame(TargetMetricFrame::at(q0), chart) * jac;
}

/// Frame matrix via the analytic differential when the family provides one,
/// numeric differences otherwise.
inline ComplexMatrix frame_matrix(const HoloFamily& fam, int j, const GroupElement& g) {
    if (fam.frame_differential) return fam.frame_differential(j, g);
    return numeric_frame_matrix(fam, j, g);
}

/// Operator norm of (df_j)_g in the left-trivialized orthonormal source
/// frame and the Fubini-Study target frame.
inline LinearMapNorm df_norm(const HoloFamily& fam, int j, const GroupElement& g) {
    fam.source->require_same_instance(g);
    if (!fam.in_domain(g))
        throw domain_violation("df_norm: point outside the family domain");
    return spectral_norm(frame_matrix(fam, j, g));
}

/// Construction-time check of the analytic differential against the numeric
/// Jacobian on random points of the region. No-op for numeric-only families.
inline void spot_check_differential(const HoloFamily& fam, const Region& region,
                                    std::size_t points = 20, double tol = 1e-6,
                                    std::uint64_t seed = 20240809, int index = 1) {
    if (!fam.frame_differential) return;
    detail::GaussianStream gs(seed);
    const std::size_t m = fam.source->dim();
    for (std::size_t k = 0; k < points; ++k) {
        double u = 0.0;
        do { u = std::abs(gs()) / 2.0; } while (u >= 1.0);
        const AlgebraVector v = detail::random_unit(gs, m).scaled(region.radius * u);
        const GroupElement g = exp_at(region.center, v);
        const ComplexMatrix analytic = fam.frame_differential(index, g);
        const ComplexMatrix numeric = numeric_frame_matrix(fam, index, g);
        const double scale = std::max(1.0, analytic.max_abs());
        if ((analytic - numeric).max_abs() > tol * scale)
            throw internal_error(fam.description +
                                 ": analytic differential disagrees with the numeric Jacobian");
    }
}

// ---------------------------------------------------------------------------
// Marty scan.

struct IndexMax {
    int index = 0;
    double max_norm = 0.0;
    std::vector<cdouble> argmax_offset; // algebra coords relative to the region center
    std::size_t failed_nodes = 0;
    std::size_t nodes = 0;
};

struct NormalityReport {
    std::vector<IndexMax> maxima;
    double growth_exponent = 0.0; // least-squares slope of log max vs log index (tail)
    bool bounded = true;
    std::string verdict;          // "normal" or "non-normal"
    double cap = 0.0;
    std::size_t grid = 0;
};

struct MartyOptions {
    double cap = 1e6;  // norm cap of the heuristic verdict; scenarios tune it
    unsigned threads = 0;
    std::uint64_t seed = 20240809;
};

namespace detail {

inline double tail_growth_exponent(const std::vector<IndexMax>& maxima) {
    std::vector<std::pair<double, double>> pts;
    for (const IndexMax& im : maxima)
        if (im.max_norm > 0.0 && im.index > 0)
            pts.emplace_back(std::log(double(im.index)), std::log(im.max_norm));
    const std::size_t tail = std::max<std::size_t>(5, pts.size() / 2);
    if (pts.size() > tail) pts.erase(pts.begin(), pts.end() - std::ptrdiff_t(tail));
    if (pts.size() < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) { sx += x; sy += y; sxx += x * x; sxy += x * y; }
    const double n = double(pts.size());
    const double den = n * sxx - sx * sx;
    if (std::abs(den) < 1e-15) return 0.0;
    return (n * sxy - sx * sy) / den;
}

inline bool monotone_tail(const std::vector<IndexMax>& maxima, std::size_t window = 5) {
    if (maxima.size() < window) return false;
    for (std::size_t k = maxima.size() - window; k + 1 < maxima.size(); ++k)
        if (!(maxima[k + 1].max_norm > maxima[k].max_norm)) return false;
    return true;
}

} // namespace detail

/// Per-index grid maxima of ||df_j|| over the region, with the heuristic
/// normality verdict: non-normal when the maxima exceed the configured cap
/// and grow monotonically over the last five indices. The reduction order
/// is deterministic (max with lexicographic tie-break on the node index),
/// so reports are bit-stable for any thread count.
inline NormalityReport marty_scan(const HoloFamily& fam, const Region& region,
                                  const std::vector<int>& indices,
                                  const MartyOptions& opts = {}) {
    if (indices.empty()) throw invalid_input("marty_scan: empty index list");
    validate_region(fam, region, opts.seed);
    const std::size_t m = fam.source->dim();
    const std::vector<AlgebraVector> offsets =
        detail::ball_lattice(m, region.radius, region.grid_per_axis);
    if (offsets.empty()) throw scan_failure("marty_scan: empty grid");

    NormalityReport report;
    report.cap = opts.cap;
    report.grid = region.grid_per_axis;
    report.maxima.reserve(indices.size());

    double overall_max = 0.0;
    for (int j : indices) {
        auto eval = [&](std::size_t i) {
            return df_norm(fam, j, exp_at(region.center, offsets[i])).value;
        };
        const detail::ScanOutcome out =
            detail::deterministic_max_scan(offsets.size(), eval, opts.threads);
        if (out.failed.size() * 100 > offsets.size())
            throw scan_failure("marty_scan: more than 1% of grid nodes failed at index " +
                               std::to_string(j));
        if (out.evaluated == 0)
            throw scan_failure("marty_scan: every grid node failed at index " + std::to_string(j));
        IndexMax im;
        im.index = j;
        im.max_norm = out.best;
        im.argmax_offset = offsets[out.best_index].coords();
        im.failed_nodes = out.failed.size();
        im.nodes = offsets.size();
        overall_max = std::max(overall_max, im.max_norm);
        report.maxima.push_back(std::move(im));
    }

    report.growth_exponent = detail::tail_growth_exponent(report.maxima);
    const bool growing = detail::monotone_tail(report.maxima) && overall_max > opts.cap;
    report.bounded = !growing;
    report.verdict = growing ? "non-normal" : "normal";
    return report;
}

} // namespace zlab
