#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "zlab/complex_matrix.hpp"
#include "zlab/errors.hpp"
#include "zlab/group.hpp"

namespace zlab {

/// gamma_X(z) = exp(zX), the holomorphic one-parameter subgroup generated
/// by X, evaluated in closed form per instance.
inline GroupElement one_param(const GroupInstance& inst, const AlgebraVector& x, cdouble z) {
    return inst.one_param(x, z);
}

/// Base-pointed exponential exp_g(xi) = g * exp(X). In left-trivialized
/// coordinates (dL_{g^{-1}})_g is the identity, so X and xi share coords.
inline GroupElement exp_at(const GroupElement& g, const AlgebraVector& xi) {
    return mul(g, g.instance().one_param(xi, 1.0));
}

/// Independent integration of the left-invariant ODE gamma' = (dL_gamma)_e X
/// along the straight segment from 0 to z. One step right-multiplies by the
/// degree-4 truncated exponential of the local increment, so the iterate
/// stays on the group (the instance's make_element/mul reconditioning
/// absorbs constraint drift) while the integration error is the classical
/// O(steps^-4). Exact for the additive instance.
inline GroupElement ode_exp_oracle(const GroupInstance& inst, const AlgebraVector& x,
                                   cdouble z, std::size_t steps) {
    inst.require_dim(x);
    if (steps < 100) throw invalid_input("ode_exp_oracle: needs at least 100 steps");
    const double mag = std::abs(z) * x.norm();
    if (mag > 700.0)
        throw range_overflow("ode_exp_oracle: |z|*||X|| = " + std::to_string(mag) + " exceeds limit 700");
    const AlgebraVector increment = x.scaled(z / cdouble(double(steps), 0.0));
    const GroupElement step = inst.taylor_exp4(increment);
    GroupElement cur = inst.identity();
    for (std::size_t k = 0; k < steps; ++k) cur = inst.mul(cur, step);
    return cur;
}

// ---------------------------------------------------------------------------
// One-parameter curves as checked values.

/// gamma_X with its generator, validated at construction: gamma(0) must be
/// the identity to 1e-12 and the evaluator must pass a Cauchy-Riemann
/// finite-difference holomorphy test (residual <= 1e-6) at sample points.
class OneParamCurve {
public:
    OneParamCurve(const GroupInstance& inst, AlgebraVector generator)
        : inst_(&inst), x_(std::move(generator)) {
        inst.require_dim(x_);
        if (element_distance((*this)(0.0), inst.identity()) > 1e-12)
            throw internal_error("one-parameter curve does not start at the identity");
        if (holomorphy_residual() > 1e-6)
            throw internal_error("one-parameter curve failed the Cauchy-Riemann check");
    }

    const GroupInstance& instance() const { return *inst_; }
    const AlgebraVector& generator() const { return x_; }

    GroupElement operator()(cdouble z) const { return inst_->one_param(x_, z); }

    /// Max over sample points and coordinates of the mismatch between the
    /// real-direction and imaginary-direction difference quotients.
    double holomorphy_residual(double h = 1e-5) const {
        const cdouble samples[] = {cdouble(0.31, 0.17), cdouble(-0.42, 0.55), cdouble(0.8, -0.63)};
        double worst = 0.0;
        for (cdouble z : samples) {
            const ComplexMatrix dre =
                ((*this)(z + h).value() - (*this)(z - h).value()).scaled(1.0 / (2.0 * h));
            const ComplexMatrix dim =
                ((*this)(z + cdouble(0.0, h)).value() - (*this)(z - cdouble(0.0, h)).value())
                    .scaled(cdouble(0.0, -1.0) * (1.0 / (2.0 * h)));
            worst = std::max(worst, (dre - dim).max_abs());
        }
        return worst;
    }

private:
    const GroupInstance* inst_;
    AlgebraVector x_;
};

// ---------------------------------------------------------------------------
// Structure constant.

/// C_g = sup of ||[X, Y]|| over unit pairs, estimated by dense random
/// sampling refined with a local hill climb. `sampled_max` is a certified
/// lower bound; `upper_bound` is the crude sum of basis bracket norms.
struct StructureConstant {
    double sampled_max = 0.0;
    double upper_bound = 0.0;
    std::uint64_t samples = 0;
    std::uint64_t seed = 0;
};

namespace detail {

/// Deterministic standard normals via Box-Muller on the raw mt19937_64
/// stream (std::normal_distribution sequences differ across library
/// implementations; this does not).
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (have_) {
            have_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_ = true;
        return r * std::cos(a);
    }

    std::vector<cdouble> complex_vector(std::size_t m) {
        std::vector<cdouble> v(m);
        for (auto& z : v) z = cdouble((*this)(), (*this)());
        return v;
    }

private:
    double uniform() { return double(rng_() >> 11) * (1.0 / 9007199254740992.0); }

    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool have_ = false;
};

inline AlgebraVector random_unit(GaussianStream& gs, std::size_t m) {
    for (;;) {
        AlgebraVector v{gs.complex_vector(m)};
        if (v.norm() > 1e-6) return v.normalized();
    }
}

} // namespace detail

inline StructureConstant structure_constant(const GroupInstance& inst,
                                            std::uint64_t samples = 1000000,
                                            std::uint64_t seed = 20240809,
                                            bool polish = true) {
    StructureConstant out;
    out.upper_bound = inst.bracket_upper_bound();
    out.samples = samples;
    out.seed = seed;
    if (inst.abelian()) return out; // all brackets vanish identically

    const std::size_t m = inst.dim();
    detail::GaussianStream gs(seed);

    // flat bracket tensor and reusable buffers keep the 10^7-sample loop
    // free of allocations
    std::vector<cdouble> tensor(m * m * m);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = 0; b < m; ++b)
            for (std::size_t c = 0; c < m; ++c)
                tensor[(a * m + b) * m + c] = inst.bracket_basis(a, b)[c];

    std::vector<cdouble> x(m), y(m), br(m);
    auto draw_unit = [&](std::vector<cdouble>& v) {
        for (;;) {
            double n2 = 0.0;
            for (cdouble& z : v) {
                z = cdouble(gs(), gs());
                n2 += std::norm(z);
            }
            if (std::sqrt(n2) > 1e-6) {
                const double inv = 1.0 / std::sqrt(n2);
                for (cdouble& z : v) z *= inv;
                return;
            }
        }
    };

    double best = 0.0;
    AlgebraVector bx = AlgebraVector::basis(m, 0);
    AlgebraVector by = AlgebraVector::basis(m, m > 1 ? 1 : 0);
    for (std::uint64_t k = 0; k < samples; ++k) {
        draw_unit(x);
        draw_unit(y);
        std::fill(br.begin(), br.end(), cdouble(0.0, 0.0));
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) {
                const cdouble f = x[a] * y[b];
                const cdouble* t = &tensor[(a * m + b) * m];
                for (std::size_t c = 0; c < m; ++c) br[c] += f * t[c];
            }
        double n2 = 0.0;
        for (const cdouble& z : br) n2 += std::norm(z);
        const double v = std::sqrt(n2);
        if (v > best) {
            best = v;
            bx = AlgebraVector(x);
            by = AlgebraVector(y);
        }
    }

    if (polish && best > 0.0) {
        auto value = [&](const AlgebraVector& x, const AlgebraVector& y) {
            return inst.bracket(x.normalized(), y.normalized()).norm();
        };
        double step = 0.1;
        double cur = value(bx, by);
        const cdouble dirs[] = {cdouble(1, 0), cdouble(-1, 0), cdouble(0, 1), cdouble(0, -1)};
        for (int sweep = 0; sweep < 2000 && step > 1e-10; ++sweep) {
            bool improved = false;
            for (std::size_t k = 0; k < m; ++k) {
                for (cdouble d : dirs) {
                    for (int side = 0; side < 2; ++side) {
                        AlgebraVector x = bx, y = by;
                        std::vector<cdouble> c = (side == 0 ? x : y).coords();
                        c[k] += step * d;
                        AlgebraVector cand{std::move(c)};
                        if (cand.norm() < 1e-9) continue;
                        const double v = side == 0 ? value(cand, y) : value(x, cand);
                        if (v > cur + 1e-15) {
                            cur = v;
                            if (side == 0) bx = cand.normalized(); else by = cand.normalized();
                            improved = true;
                        }
                    }
                }
            }
            if (!improved) step *= 0.5;
        }
        best = std::max(best, cur);
    }

    out.sampled_max = best;
    return out;
}

// ---------------------------------------------------------------------------
// Differential of the exponential.

/// Left-trivialized differential of exp_g at xi: the truncated series
/// sum_{k<=K} (-1)^k/(k+1)! ad_xi^k. The outer translation isometries are
/// coordinate identities, so the matrix does not depend on the basepoint.
struct DexpOperator {
    GroupElement base;
    AlgebraVector xi;
    ComplexMatrix matrix;
    int order = 0;          // truncation degree K
    double tail_bound = 0.0; // sum_{k>K} (C ||xi||)^k/(k+1)!, certified <= 1e-12
};

inline DexpOperator dexp_at(const GroupElement& g, const AlgebraVector& xi) {
    const GroupInstance& inst = g.instance();
    inst.require_dim(xi);
    const std::size_t m = inst.dim();

    const double x = inst.bracket_upper_bound() * xi.norm();
    int order = 0;
    double tail = 0.0;
    double b = 1.0; // b_k = x^k/(k+1)!
    for (;; ++order) {
        const double bnext = b * x / double(order + 2);
        const double q = x / double(order + 3);
        if (q < 1.0) {
            tail = bnext / (1.0 - q);
            if (tail <= 1e-12) break;
        }
        b = bnext;
        if (order > 100000)
            throw internal_error("dexp_at: series truncation failed to converge");
    }

    ComplexMatrix sum = ComplexMatrix::identity(m);
    if (order > 0) {
        const ComplexMatrix ad = inst.ad_matrix(xi);
        ComplexMatrix term = ComplexMatrix::identity(m);
        for (int k = 1; k <= order; ++k) {
            term = (term * ad).scaled(-1.0 / double(k + 1));
            sum = sum + term;
        }
    }
    return DexpOperator{g, xi, std::move(sum), order, tail};
}

/// (e^{Cr} - 1)/(Cr) with r = ||xi||; the operator-norm bound on the
/// differential of exp. Returns the analytic limit 1 when Cr is negligible.
inline double dexp_norm_bound(double structure_const, double xi_norm) {
    const double x = structure_const * xi_norm;
    if (x < 1e-14) return 1.0;
    return std::expm1(x) / x;
}

/// Convenience overload using the instance's certified upper bound for C.
inline double dexp_norm_bound(const GroupInstance& inst, const AlgebraVector& xi) {
    inst.require_dim(xi);
    return dexp_norm_bound(inst.bracket_upper_bound(), xi.norm());
}

/// Finite-difference oracle for dexp_at: the numeric Jacobian of
/// xi' -> exp_g(xi') in ambient coordinates, pulled back to the algebra by
/// left trivialization at exp_g(xi). Independent of the series path.
inline ComplexMatrix dexp_numeric(const GroupElement& g, const AlgebraVector& xi, double h = 1e-5) {
    const GroupInstance& inst = g.instance();
    inst.require_dim(xi);
    const std::size_t m = inst.dim();
    const GroupElement q = exp_at(g, xi);
    const std::size_t vr = q.value().rows();
    const std::size_t vc = q.value().cols();

    auto map = [&](const std::vector<cdouble>& c) {
        return exp_at(g, AlgebraVector(c)).value().data();
    };
    const ComplexMatrix jac = numeric_jacobian(map, xi.coords(), h);

    ComplexMatrix out(m, m);
    for (std::size_t b = 0; b < m; ++b) {
        ComplexMatrix velocity(vr, vc);
        for (std::size_t i = 0; i < vr; ++i)
            for (std::size_t j = 0; j < vc; ++j)
                velocity(i, j) = jac(i * vc + j, b);
        const AlgebraVector w = inst.left_trivialize(q, velocity);
        for (std::size_t a = 0; a < m; ++a) out(a, b) = w[a];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Verification suite for the one-parameter/exponential contracts.

struct PropertyResult {
    std::string name;
    double max_residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct ExpVerifyReport {
    std::vector<PropertyResult> properties;
    StructureConstant structure;
    bool all_pass = true;
};

namespace detail {

inline AlgebraVector random_algebra(GaussianStream& gs, std::size_t m, double max_norm) {
    AlgebraVector v = random_unit(gs, m);
    double r = 0.0;
    do { r = std::abs(gs()) / 2.0; } while (r > 1.0);
    return v.scaled(max_norm * r);
}

inline GroupElement random_element(GaussianStream& gs, const GroupInstance& inst) {
    return inst.one_param(random_algebra(gs, inst.dim(), 1.0), 1.0);
}

} // namespace detail

/// Random-sample residual checks of the one-parameter subgroup law, the
/// base-pointed decomposition, the derivative identity, the isometry of
/// (d exp_g)_0, the Duhamel series against its finite-difference oracle,
/// the ODE oracle, and the d-exp norm bound.
inline ExpVerifyReport verify_exp_properties(const GroupInstance& inst,
                                             std::size_t samples = 1000,
                                             std::uint64_t seed = 20240809,
                                             std::uint64_t structure_samples = 1000000) {
    ExpVerifyReport report;
    detail::GaussianStream gs(seed);
    const std::size_t m = inst.dim();
    const std::size_t few = std::max<std::size_t>(1, samples / 10);

    double r_law = 0.0, r_p27 = 0.0, r_cor28 = 0.0, r_p23 = 0.0, r_p29 = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const AlgebraVector x = detail::random_algebra(gs, m, 1.0);
        const cdouble zs = cdouble(gs(), gs()) / 2.0;
        const cdouble zt = cdouble(gs(), gs()) / 2.0;

        // one-parameter subgroup law
        const GroupElement lhs = inst.one_param(x, zs + zt);
        const GroupElement rhs = inst.mul(inst.one_param(x, zs), inst.one_param(x, zt));
        r_law = std::max(r_law, element_distance(lhs, rhs));

        const GroupElement g = detail::random_element(gs, inst);

        // exp_g(z xi) = g exp(zX)
        const GroupElement a = exp_at(g, x.scaled(zs));
        const GroupElement b = inst.mul(g, inst.one_param(x, zs));
        r_p27 = std::max(r_p27, element_distance(a, b));

        // exp_g = L_g o exp o (dL_{g^-1})_g, with the translation identity on coords
        const GroupElement c = inst.mul(g, inst.one_param(left_translate_frame(g, x), 1.0));
        r_cor28 = std::max(r_cor28, element_distance(exp_at(g, x), c));

        // d/dz exp(zX) = (dL_{exp(zX)})_e(X)
        const double h = 1e-5;
        const ComplexMatrix fd =
            (inst.one_param(x, zs + h).value() - inst.one_param(x, zs - h).value())
                .scaled(1.0 / (2.0 * h));
        const ComplexMatrix lt = inst.embed_velocity(inst.one_param(x, zs), x);
        r_p23 = std::max(r_p23, (fd - lt).max_abs());

        // (d exp_g)_0 is a linear isometry
        r_p29 = std::max(r_p29,
                         std::abs(spectral_norm(dexp_at(g, AlgebraVector::zero(m)).matrix).value - 1.0));
    }

    double r_duhamel = 0.0, r_bound = 0.0;
    for (std::size_t s = 0; s < few; ++s) {
        const GroupElement g = detail::random_element(gs, inst);
        const AlgebraVector xi = detail::random_algebra(gs, m, 2.0);
        const DexpOperator op = dexp_at(g, xi);
        r_duhamel = std::max(r_duhamel, spectral_norm(op.matrix - dexp_numeric(g, xi)).value);
        const double excess =
            spectral_norm(op.matrix).value - dexp_norm_bound(inst, xi);
        r_bound = std::max(r_bound, excess);
    }

    double r_ode = 0.0;
    for (std::size_t s = 0; s < few; ++s) {
        const AlgebraVector x = detail::random_algebra(gs, m, 1.0);
        const cdouble z = cdouble(gs(), gs()) / 2.0;
        r_ode = std::max(r_ode,
                         element_distance(inst.one_param(x, z), ode_exp_oracle(inst, x, z, 1000)));
    }

    report.structure = structure_constant(inst, structure_samples, seed + 1);

    auto push = [&](const std::string& name, double residual, double tol) {
        PropertyResult pr{name, residual, tol, residual <= tol};
        report.all_pass = report.all_pass && pr.pass;
        report.properties.push_back(std::move(pr));
    };
    push("one_param_law", r_law, 1e-10);
    push("exp_base_scaling", r_p27, 1e-10);
    push("exp_base_decomposition", r_cor28, 1e-10);
    push("one_param_derivative_fd", r_p23, 1e-6);
    push("dexp_at_zero_isometry", r_p29, 1e-10);
    push("duhamel_vs_numeric", r_duhamel, 1e-6);
    push("dexp_norm_bound_slack", r_bound, 1e-9);
    push("one_param_vs_ode", r_ode, 1e-8);
    return report;
}

} // namespace zlab
