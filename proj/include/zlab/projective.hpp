#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "zlab/complex_matrix.hpp"
#include "zlab/errors.hpp"

namespace zlab {

/// Point of P^n stored as a unit-norm homogeneous representative with the
/// first nonzero coordinate made real-positive. The Fubini-Study scale is
/// fixed so the induced metric on the affine chart of P^1 is
/// |dw|^2/(1+|w|^2)^2 (geodesic diameter pi/2); with this choice the
/// operator norm of a map C -> P^1 is the classical spherical derivative.
class ProjectivePoint {
public:
    explicit ProjectivePoint(std::vector<cdouble> homogeneous) : h_(std::move(homogeneous)) {
        if (h_.empty()) throw invalid_input("ProjectivePoint: empty coordinate vector");
        for (const cdouble& z : h_)
            if (!detail::is_finite(z)) throw invalid_input("ProjectivePoint: non-finite coordinate");
        const double n = detail::vec_norm(h_);
        if (n == 0.0) throw invalid_input("ProjectivePoint: all homogeneous coordinates zero");
        for (cdouble& z : h_) z /= n;
        for (const cdouble& z : h_) {
            const double a = std::abs(z);
            if (a > 1e-14) {
                const cdouble phase = std::conj(z) / a;
                for (cdouble& w : h_) w *= phase;
                break;
            }
        }
    }

    std::size_t dim() const { return h_.size() - 1; } // complex dimension n of P^n
    const std::vector<cdouble>& coords() const { return h_; }

private:
    std::vector<cdouble> h_;
};

/// Geodesic Fubini-Study distance arccos|<p,q>| of unit representatives,
/// evaluated in the atan2 form (the orthogonal component supplies the sine)
/// so that nearly coincident points do not suffer the arccos noise floor.
inline double fs_distance(const ProjectivePoint& p, const ProjectivePoint& q) {
    if (p.dim() != q.dim()) throw invalid_input("fs_distance: dimension mismatch");
    if (p.coords() == q.coords()) return 0.0;
    cdouble ip = 0.0;
    for (std::size_t k = 0; k < p.coords().size(); ++k)
        ip += p.coords()[k] * std::conj(q.coords()[k]);
    double s2 = 0.0;
    for (std::size_t k = 0; k < p.coords().size(); ++k)
        s2 += std::norm(p.coords()[k] - ip * q.coords()[k]);
    return std::atan2(std::sqrt(s2), std::clamp(std::abs(ip), 0.0, 1.0));
}

/// Index of the largest-modulus homogeneous coordinate; the affine chart
/// used for differentiating maps near this point.
inline std::size_t dominant_chart(const ProjectivePoint& q) {
    std::size_t best = 0;
    double bv = -1.0;
    for (std::size_t k = 0; k < q.coords().size(); ++k) {
        const double a = std::abs(q.coords()[k]);
        if (a > bv) { bv = a; best = k; }
    }
    return best;
}

/// Affine coordinates of p in chart k (the n ratios p_i/p_k, i != k).
inline std::vector<cdouble> affine_chart(const ProjectivePoint& p, std::size_t chart) {
    if (chart >= p.coords().size()) throw invalid_input("affine_chart: chart index out of range");
    const cdouble pk = p.coords()[chart];
    if (std::abs(pk) < 1e-100)
        throw domain_violation("affine_chart: point lies on the chart hyperplane");
    std::vector<cdouble> w;
    w.reserve(p.dim());
    for (std::size_t i = 0; i < p.coords().size(); ++i)
        if (i != chart) w.push_back(p.coords()[i] / pk);
    return w;
}

/// Orthonormal frame of the holomorphic tangent space at a point: the
/// columns span the orthogonal complement of the unit representative, with
/// the Fubini-Study inner product equal to the Euclidean one there.
class TargetMetricFrame {
public:
    static TargetMetricFrame at(const ProjectivePoint& base) {
        const std::vector<cdouble>& q = base.coords();
        const std::size_t n1 = q.size();
        const std::size_t skip = dominant_chart(base);

        // modified Gram-Schmidt of the standard basis vectors (minus the one
        // most parallel to q) against q and each other
        std::vector<std::vector<cdouble>> cols;
        for (std::size_t k = 0; k < n1; ++k) {
            if (k == skip) continue;
            std::vector<cdouble> v(n1, cdouble(0.0, 0.0));
            v[k] = 1.0;
            cdouble pq = 0.0;
            for (std::size_t i = 0; i < n1; ++i) pq += std::conj(q[i]) * v[i];
            for (std::size_t i = 0; i < n1; ++i) v[i] -= pq * q[i];
            for (const auto& c : cols) {
                cdouble pc = 0.0;
                for (std::size_t i = 0; i < n1; ++i) pc += std::conj(c[i]) * v[i];
                for (std::size_t i = 0; i < n1; ++i) v[i] -= pc * c[i];
            }
            const double nv = detail::vec_norm(v);
            if (nv < 1e-8)
                throw internal_error("TargetMetricFrame: Gram-Schmidt collapse");
            for (cdouble& z : v) z /= nv;
            cols.push_back(std::move(v));
        }

        ComplexMatrix frame(n1, cols.size());
        for (std::size_t c = 0; c < cols.size(); ++c)
            for (std::size_t i = 0; i < n1; ++i) frame(i, c) = cols[c][i];
        return TargetMetricFrame(base, std::move(frame));
    }

    /// Wraps externally supplied frame vectors without the strict
    /// construction check; orthonormality is then enforced at use by
    /// differential_norm (Gram residual <= 1e-9).
    static TargetMetricFrame from_vectors(const ProjectivePoint& base, ComplexMatrix vectors) {
        if (vectors.rows() != base.coords().size() || vectors.cols() != base.dim())
            throw invalid_input("TargetMetricFrame: vector block has the wrong shape");
        return TargetMetricFrame(base, std::move(vectors), false);
    }

    const ProjectivePoint& base() const { return base_; }

    /// (n+1) x n matrix whose columns are the frame vectors.
    const ComplexMatrix& vectors() const { return frame_; }

    /// Max-entry deviation of the frame Gram matrix from the identity.
    double gram_residual() const {
        const ComplexMatrix g = frame_.adjoint() * frame_;
        ComplexMatrix dev = g - ComplexMatrix::identity(g.rows());
        return dev.max_abs();
    }

private:
    TargetMetricFrame(ProjectivePoint base, ComplexMatrix frame, bool strict = true)
        : base_(std::move(base)), frame_(std::move(frame)) {
        if (strict && gram_residual() > 1e-12)
            throw internal_error("TargetMetricFrame: frame failed orthonormality at construction");
    }

    ProjectivePoint base_;
    ComplexMatrix frame_;
};

/// n x n matrix taking affine-chart velocities at the frame's basepoint to
/// frame coordinates of the corresponding tangent vector. For a chart lift
/// F with F_chart = 1 the differential into the tangent model is
/// P_{q^perp}(V)/||F||, and ||F|| = 1/|q_chart|.
inline ComplexMatrix chart_to_frame(const TargetMetricFrame& frame, std::size_t chart) {
    const std::vector<cdouble>& q = frame.base().coords();
    if (chart >= q.size()) throw invalid_input("chart_to_frame: chart index out of range");
    const double qk = std::abs(q[chart]);
    if (qk < 1e-100)
        throw domain_violation("chart_to_frame: basepoint lies on the chart hyperplane");
    const std::size_t n = frame.base().dim();
    const ComplexMatrix qh = frame.vectors().adjoint(); // n x (n+1); rows orthogonal to q
    ComplexMatrix out(n, n);
    std::size_t col = 0;
    for (std::size_t slot = 0; slot < q.size(); ++slot) {
        if (slot == chart) continue;
        for (std::size_t a = 0; a < n; ++a) out(a, col) = qk * qh(a, slot);
        ++col;
    }
    return out;
}

/// Operator norm of a differential already expressed in orthonormal frames
/// on both sides. The target frame is revalidated (residual <= 1e-9).
inline LinearMapNorm differential_norm(const ComplexMatrix& df_in_frames,
                                       const TargetMetricFrame& target_frame) {
    if (target_frame.gram_residual() > 1e-9)
        throw invalid_frame("differential_norm: target frame lost orthonormality");
    if (df_in_frames.rows() != target_frame.base().dim())
        throw invalid_input("differential_norm: row count does not match target dimension");
    return spectral_norm(df_in_frames);
}

/// Frame matrix of a map into P^1 given a homogeneous lift value (f0, f1)
/// and the derivative rows of the lift with respect to the source
/// coordinates. Scale-invariant in the lift; the chart is chosen from the
/// dominant coordinate so large |f1/f0| stays stable.
inline ComplexMatrix p1_frame_row(cdouble f0, cdouble f1,
                                  const std::vector<cdouble>& df0,
                                  const std::vector<cdouble>& df1) {
    if (df0.size() != df1.size() || df0.empty())
        throw invalid_input("p1_frame_row: derivative rows malformed");
    const double s = std::max(std::abs(f0), std::abs(f1));
    if (s == 0.0) throw invalid_input("p1_frame_row: zero homogeneous lift");
    const cdouble a0 = f0 / s, a1 = f1 / s;
    ProjectivePoint q{{a0, a1}};
    const std::size_t chart = dominant_chart(q);
    const std::size_t m = df0.size();

    // chart derivative of w = f_other/f_chart: (df_other * f_chart - f_other * df_chart)/f_chart^2
    const cdouble fc = (chart == 0) ? a0 : a1;
    const cdouble fo = (chart == 0) ? a1 : a0;
    ComplexMatrix jac(1, m);
    for (std::size_t k = 0; k < m; ++k) {
        const cdouble dc = ((chart == 0) ? df0[k] : df1[k]) / s;
        const cdouble dother = ((chart == 0) ? df1[k] : df0[k]) / s;
        jac(0, k) = (dother * fc - fo * dc) / (fc * fc);
    }
    return chart_to_frame(TargetMetricFrame::at(q), chart) * jac;
}

} // namespace zlab
