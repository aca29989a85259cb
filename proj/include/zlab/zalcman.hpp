#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zlab/detail/parallel.hpp"
#include "zlab/errors.hpp"
#include "zlab/family.hpp"

namespace zlab {

/// Result of maximizing ||(df_j)_g(xi)|| over the closed exp-ball of radius
/// 1/j around p0: the maximum, its location, the maximizing unit direction,
/// and the offset bookkeeping.
struct ArgmaxResult {
    double max_value = 0.0;   // M_j
    GroupElement point;       // p_j
    AlgebraVector direction;  // xi_j, unit norm
    AlgebraVector offset;     // algebra coords of p_j relative to p0
    double dist_p0 = 0.0;     // ||offset||, <= 1/j by construction
};

struct ArgmaxOptions {
    std::size_t grid_per_axis = 41;
    double polish_step_rel = 1e-4; // step relative to the ball radius
    int polish_iters = 50;
    unsigned threads = 0;
    std::uint64_t seed = 20240809;
};

/// Grid search over the closed exp-ball of radius 1/j around p0, taking the
/// top singular value of the frame differential at each node, refined by a
/// local coordinate ascent. Ties resolve to the lexicographically smallest
/// grid index.
inline ArgmaxResult argmax_Mj(const HoloFamily& fam, int j, const GroupElement& p0,
                              const ArgmaxOptions& opts = {}) {
    if (j <= 0) throw invalid_input("argmax_Mj: index must be positive");
    const double radius = 1.0 / double(j);
    Region ball{p0, radius, opts.grid_per_axis};
    validate_region(fam, ball, opts.seed); // throws domain_violation when not contained

    const std::size_t m = fam.source->dim();
    const std::vector<AlgebraVector> offsets =
        detail::ball_lattice(m, radius, opts.grid_per_axis);

    auto sigma_at = [&](const AlgebraVector& v) {
        const GroupElement g = exp_at(p0, v);
        if (!fam.in_domain(g))
            throw domain_violation("argmax_Mj: candidate left the family domain");
        return top_singular_pair(frame_matrix(fam, j, g)).sigma;
    };

    const detail::ScanOutcome scan = detail::deterministic_max_scan(
        offsets.size(), [&](std::size_t i) { return sigma_at(offsets[i]); }, opts.threads);
    if (scan.evaluated == 0)
        throw scan_failure("argmax_Mj: every grid node failed at index " + std::to_string(j));

    AlgebraVector best = offsets[scan.best_index];
    double best_val = scan.best;

    // local coordinate ascent, clipped to the closed ball
    const double step = opts.polish_step_rel * radius;
    const cdouble dirs[] = {cdouble(1, 0), cdouble(-1, 0), cdouble(0, 1), cdouble(0, -1)};
    for (int it = 0; it < opts.polish_iters; ++it) {
        bool improved = false;
        for (std::size_t k = 0; k < m; ++k) {
            for (cdouble d : dirs) {
                std::vector<cdouble> c = best.coords();
                c[k] += step * d;
                AlgebraVector cand{std::move(c)};
                if (cand.norm() > radius) continue;
                double v;
                try {
                    v = sigma_at(cand);
                } catch (const error&) {
                    continue;
                }
                if (v > best_val) {
                    best_val = v;
                    best = cand;
                    improved = true;
                }
            }
        }
        if (!improved) break;
    }

    if (best_val <= 0.0)
        throw degenerate_family("argmax_Mj: family has identically vanishing differential on the ball");

    const GroupElement p = exp_at(p0, best);
    SingularPair pair = top_singular_pair(frame_matrix(fam, j, p));
    ArgmaxResult out{best_val, p, AlgebraVector(pair.right).normalized(), best, best.norm()};
    return out;
}

// ---------------------------------------------------------------------------
// Rescaling steps.

/// One Zalcman datum: phi_j(z) = f_j(exp_{p_j}(rho_j * eps z^T)) together
/// with its certified domain radii. `radius_ball` comes from the 1/j-ball
/// bookkeeping of the construction (exp-curve length bounded through the
/// d-exp norm bound), `radius_omega` from bisection on domain membership;
/// the certified radius is their minimum. rho * M == 1 holds by
/// construction (rho is stored as 1/M bitwise).
struct RescalingStep {
    int j = 0;
    GroupElement p;
    AlgebraVector xi;
    double M = 0.0;
    double rho = 0.0;
    double dist_p0 = 0.0;
    double radius_ball = 0.0;
    double radius_omega = 0.0;
    double radius = 0.0;
    const HoloFamily* family = nullptr;

    ProjectivePoint phi(const std::vector<cdouble>& z) const {
        if (z.size() != family->source->dim())
            throw invalid_input("RescalingStep::phi: wrong number of coordinates");
        const AlgebraVector v = left_translate_frame(p, AlgebraVector(z)).scaled(rho);
        return family->eval(j, exp_at(p, v));
    }
};

namespace detail {

/// Largest R such that boundary samples exp_at(p, rho*R*u) stay in the
/// family domain, found by doubling then bisection. Capped at 1e12 for
/// unbounded domains; evaluation failures count as "outside".
inline double omega_radius(const HoloFamily& fam, const GroupElement& p, double rho,
                           std::uint64_t seed) {
    const std::size_t m = fam.source->dim();
    const std::vector<AlgebraVector> dirs = boundary_directions(m, 32, seed);
    auto contained = [&](double r) {
        for (const AlgebraVector& u : dirs) {
            try {
                if (!fam.in_domain(exp_at(p, u.scaled(rho * r)))) return false;
            } catch (const error&) {
                return false;
            }
        }
        return true;
    };
    constexpr double cap = 1e12;
    double lo = 0.0;
    double hi = 1.0 / rho < cap ? 1.0 / rho : cap; // start near unit algebra radius
    if (!contained(hi)) {
        // shrink to find a contained starting point
        while (hi > 1e-300 && !contained(hi)) hi /= 2.0;
        if (hi <= 1e-300) return 0.0;
        lo = hi;
        hi *= 2.0;
    }
    while (contained(hi)) {
        lo = hi;
        hi *= 2.0;
        if (hi >= cap) return cap;
    }
    for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (contained(mid)) lo = mid; else hi = mid;
    }
    return lo;
}

} // namespace detail

/// Assembles the rescaled map phi_j and certifies the radius on which it is
/// known to stay inside the domain and inside the 1/j-ball around p0. The
/// ball radius solves len(rho R) = 1/j - dist with the exp-curve length
/// bound len(x) = (e^{Cx}-1)/C (x itself when the instance is abelian).
inline RescalingStep build_rescaled(const HoloFamily& fam, int j, const GroupElement& p,
                                    const AlgebraVector& xi, double rho, double dist_p0 = 0.0,
                                    std::uint64_t seed = 20240809) {
    if (!(rho > 0.0)) throw invalid_input("build_rescaled: rho must be positive");
    fam.source->require_same_instance(p);
    if (!fam.in_domain(p)) throw domain_violation("build_rescaled: basepoint outside the domain");
    if (std::abs(xi.norm() - 1.0) > 1e-9)
        throw invalid_input("build_rescaled: direction must be a unit vector");

    double radius_ball = 0.0;
    const double slack = 1.0 / double(j) - dist_p0;
    if (slack > 0.0) {
        const double c = fam.source->bracket_upper_bound();
        const double x = c == 0.0 ? slack : std::log1p(c * slack) / c;
        radius_ball = x / rho;
    }
    const double radius_omega = detail::omega_radius(fam, p, rho, seed);
    return RescalingStep{j,
                         p,
                         xi,
                         1.0 / rho,
                         rho,
                         dist_p0,
                         radius_ball,
                         radius_omega,
                         std::min(radius_ball, radius_omega),
                         &fam};
}

/// Frame matrix of (d phi_j)_z by central differences of the affine chart
/// around phi_j(z).
inline ComplexMatrix phi_frame_matrix(const RescalingStep& step, const std::vector<cdouble>& z,
                                      double h = 1e-5) {
    const std::size_t m = step.family->source->dim();
    const ProjectivePoint q0 = step.phi(z);
    const std::size_t chart = dominant_chart(q0);
    auto map = [&](const std::vector<cdouble>& w) {
        std::vector<cdouble> zz(z);
        for (std::size_t k = 0; k < m; ++k) zz[k] += w[k];
        return affine_chart(step.phi(zz), chart);
    };
    const ComplexMatrix jac = numeric_jacobian(map, std::vector<cdouble>(m, cdouble(0.0, 0.0)), h);
    return chart_to_frame(TargetMetricFrame::at(q0), chart) * jac;
}

/// ||(d phi_j)_0(t_j)||_N with t_j the preimage of rho_j xi_j under the
/// frame map at 0, which in left-trivialized coordinates is xi_j itself.
/// The construction normalizes this to rho_j M_j = 1. The difference step
/// scales with the certified radii so degenerate steps (forced runs on
/// normal families) are still evaluated inside their domain.
inline double nonconstancy_witness(const RescalingStep& step) {
    double h = 1e-5;
    if (step.radius > 0.0) {
        h = std::min(h, 0.05 * step.radius);
    } else if (step.radius_omega > 0.0) {
        h = std::min(h, 0.02 * step.radius_omega);
    } else {
        throw internal_error("nonconstancy_witness: step has no evaluable neighborhood");
    }
    const std::size_t m = step.family->source->dim();
    const ProjectivePoint q0 = step.phi(std::vector<cdouble>(m, cdouble(0.0, 0.0)));
    const std::size_t chart = dominant_chart(q0);
    auto line = [&](const std::vector<cdouble>& s) {
        std::vector<cdouble> z(m);
        for (std::size_t k = 0; k < m; ++k) z[k] = s[0] * step.xi[k];
        return affine_chart(step.phi(z), chart);
    };
    const ComplexMatrix jac = numeric_jacobian(line, {cdouble(0.0, 0.0)}, h);
    const ComplexMatrix col = chart_to_frame(TargetMetricFrame::at(q0), chart) * jac;
    return col.frobenius_norm();
}

// ---------------------------------------------------------------------------
// Convergence diagnostics.

/// Sup of the Fubini-Study distance between two maps over the lattice of
/// the ball ||z|| <= R in C^m (deterministic reduction).
inline double sup_distance(const std::function<ProjectivePoint(const std::vector<cdouble>&)>& a,
                           const std::function<ProjectivePoint(const std::vector<cdouble>&)>& b,
                           std::size_t m, double radius, std::size_t grid_per_axis,
                           unsigned threads = 0) {
    const std::vector<AlgebraVector> nodes = detail::ball_lattice(m, radius, grid_per_axis);
    const detail::ScanOutcome out = detail::deterministic_max_scan(
        nodes.size(),
        [&](std::size_t i) { return fs_distance(a(nodes[i].coords()), b(nodes[i].coords())); },
        threads);
    if (out.evaluated != nodes.size())
        throw scan_failure("sup_distance: evaluation failed on " +
                           std::to_string(nodes.size() - out.evaluated) + " nodes");
    return out.best;
}

struct ConvergencePair {
    int j_from = 0;
    int j_to = 0;
    double sup_dist = 0.0;
};

struct LimitSample {
    std::vector<cdouble> z;
    ProjectivePoint value;
};

struct ConvergenceReport {
    double radius = 0.0;
    std::size_t grid = 0;
    double tolerance = 0.0;
    std::vector<ConvergencePair> distances; // consecutive pairs
    bool cauchy = false;
    std::vector<LimitSample> limit_samples; // from the largest index
    double witness_last = 0.0;
};

/// Pairwise sup Fubini-Study distances of consecutive steps on the ball
/// ||z|| <= R. Cauchy verdict: distances non-increasing (within roundoff
/// slack) with the last one below the tolerance.
inline ConvergenceReport converge_check(const std::vector<RescalingStep>& steps, double radius,
                                        std::size_t grid_per_axis, double tolerance = 1e-6,
                                        unsigned threads = 0) {
    if (steps.size() < 3) throw invalid_input("converge_check: needs at least 3 steps");
    if (!(radius > 0.0)) throw invalid_input("converge_check: radius must be positive");
    for (const RescalingStep& s : steps)
        if (s.radius < radius)
            throw domain_violation("converge_check: R exceeds the certified radius of step j=" +
                                   std::to_string(s.j));

    const std::size_t m = steps.front().family->source->dim();
    ConvergenceReport report;
    report.radius = radius;
    report.grid = grid_per_axis;
    report.tolerance = tolerance;

    for (std::size_t k = 0; k + 1 < steps.size(); ++k) {
        const RescalingStep& a = steps[k];
        const RescalingStep& b = steps[k + 1];
        const double d = sup_distance([&](const std::vector<cdouble>& z) { return a.phi(z); },
                                      [&](const std::vector<cdouble>& z) { return b.phi(z); },
                                      m, radius, grid_per_axis, threads);
        report.distances.push_back({a.j, b.j, d});
    }

    bool cauchy = true;
    for (std::size_t k = 0; k + 1 < report.distances.size(); ++k)
        if (report.distances[k + 1].sup_dist >
            report.distances[k].sup_dist * (1.0 + 1e-9) + 1e-12)
            cauchy = false;
    if (report.distances.back().sup_dist > tolerance) cauchy = false;
    report.cauchy = cauchy;

    const RescalingStep& last = steps.back();
    std::vector<std::vector<cdouble>> sample_points;
    sample_points.emplace_back(m, cdouble(0.0, 0.0));
    for (std::size_t d = 0; d < m; ++d) {
        std::vector<cdouble> zr(m, cdouble(0.0, 0.0));
        zr[d] = radius / 2.0;
        sample_points.push_back(zr);
        std::vector<cdouble> zi(m, cdouble(0.0, 0.0));
        zi[d] = cdouble(0.0, radius / 2.0);
        sample_points.push_back(zi);
    }
    for (auto& z : sample_points) report.limit_samples.push_back({z, last.phi(z)});
    report.witness_last = nonconstancy_witness(last);
    return report;
}

// ---------------------------------------------------------------------------
// Driver over an index list.

struct ZalcmanOptions {
    ArgmaxOptions argmax;
    bool snap_unit_roots = false;    // torus only: move p_j to the nearest j-th root of unity
    double converge_radius = -1.0;   // <0: auto (0.95 * min R_j); 0: skip; >0: as given
    std::size_t converge_grid = 21;
    double cauchy_tolerance = 1e-6;
};

struct ZalcmanRun {
    std::vector<RescalingStep> steps;
    std::vector<double> witnesses; // NaN where evaluation failed (reported, not asserted)
    std::optional<ConvergenceReport> convergence;
};

namespace detail {

inline GroupElement snap_to_unit_root(const TorusGroup& torus, const GroupElement& p, int j) {
    const cdouble w = p.value()(0, 0);
    const double angle = std::arg(w);
    const double two_pi = 6.283185307179586476925286766559;
    const long k = std::lround(angle * double(j) / two_pi);
    ComplexMatrix v(1, 1);
    if (k == 0)
        v(0, 0) = 1.0;
    else
        v(0, 0) = std::exp(cdouble(0.0, two_pi * double(k) / double(j)));
    return torus.make_element(std::move(v));
}

} // namespace detail

/// Full rescaling run: per index the argmax, the optional root-of-unity
/// snap (with M_j recomputed at the snapped point so rho_j M_j stays exact),
/// the step build and the witness; then the convergence diagnostics.
inline ZalcmanRun run_zalcman(const HoloFamily& fam, const GroupElement& p0,
                              const std::vector<int>& indices, const ZalcmanOptions& opts = {}) {
    if (indices.empty()) throw invalid_input("run_zalcman: empty index list");
    for (std::size_t k = 0; k + 1 < indices.size(); ++k)
        if (indices[k + 1] <= indices[k])
            throw invalid_input("run_zalcman: indices must be strictly increasing");

    const TorusGroup* torus = dynamic_cast<const TorusGroup*>(fam.source);
    if (opts.snap_unit_roots && (torus == nullptr || fam.source->dim() != 1))
        throw invalid_input("run_zalcman: snap_unit_roots needs the one-dimensional torus");

    ZalcmanRun run;
    run.steps.reserve(indices.size());
    for (int j : indices) {
        ArgmaxResult am = argmax_Mj(fam, j, p0, opts.argmax);
        if (opts.snap_unit_roots) {
            const GroupElement snapped = detail::snap_to_unit_root(*torus, am.point, j);
            const SingularPair pair = top_singular_pair(frame_matrix(fam, j, snapped));
            if (pair.sigma <= 0.0)
                throw degenerate_family("run_zalcman: vanishing differential at snapped point");
            const cdouble ratio = snapped.value()(0, 0) / p0.value()(0, 0);
            const cdouble logr = std::log(ratio);
            am.max_value = pair.sigma;
            am.point = snapped;
            am.direction = AlgebraVector(pair.right).normalized();
            am.dist_p0 = std::abs(logr);
        }
        const double rho = 1.0 / am.max_value;
        RescalingStep step = build_rescaled(fam, j, am.point, am.direction, rho, am.dist_p0,
                                            opts.argmax.seed);
        double witness = std::numeric_limits<double>::quiet_NaN();
        try {
            witness = nonconstancy_witness(step);
        } catch (const error&) {
            // degenerate steps (forced runs on normal families) stay reported
        }
        run.steps.push_back(std::move(step));
        run.witnesses.push_back(witness);
    }

    double auto_radius = std::numeric_limits<double>::infinity();
    for (const RescalingStep& s : run.steps) auto_radius = std::min(auto_radius, s.radius);
    double radius = opts.converge_radius;
    if (radius < 0.0) radius = auto_radius > 0.0 ? 0.95 * auto_radius : 0.0;
    if (radius > 0.0 && run.steps.size() >= 3)
        run.convergence = converge_check(run.steps, radius, opts.converge_grid,
                                         opts.cauchy_tolerance, opts.argmax.threads);
    return run;
}

} // namespace zlab
