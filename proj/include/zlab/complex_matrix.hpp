#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <utility>
#include <vector>

#include "zlab/errors.hpp"

namespace zlab {

using cdouble = std::complex<double>;

namespace detail {

inline bool is_finite(cdouble z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

} // namespace detail

/// Dense complex matrix, row-major. Sizes here are tiny (algebra dimensions
/// m <= 4 and small grids of them), so everything is plain loops; no attempt
/// at BLAS-level performance is made.
class ComplexMatrix {
public:
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), a_(rows * cols, cdouble(0.0, 0.0)) {
        if (rows == 0 || cols == 0)
            throw invalid_input("ComplexMatrix: rows and cols must be >= 1");
    }

    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cdouble> entries)
        : rows_(rows), cols_(cols), a_(std::move(entries)) {
        if (rows == 0 || cols == 0)
            throw invalid_input("ComplexMatrix: rows and cols must be >= 1");
        if (a_.size() != rows * cols)
            throw invalid_input("ComplexMatrix: entry count does not match rows*cols");
        for (const cdouble& z : a_)
            if (!detail::is_finite(z))
                throw invalid_input("ComplexMatrix: non-finite entry");
    }

    ComplexMatrix(std::size_t rows, std::size_t cols, std::initializer_list<cdouble> entries)
        : ComplexMatrix(rows, cols, std::vector<cdouble>(entries)) {}

    static ComplexMatrix identity(std::size_t n) {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static ComplexMatrix zero(std::size_t rows, std::size_t cols) { return ComplexMatrix(rows, cols); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    cdouble& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    const cdouble& operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    const std::vector<cdouble>& data() const { return a_; }
    std::vector<cdouble>& data() { return a_; }

    bool is_square() const { return rows_ == cols_; }

    bool all_finite() const {
        for (const cdouble& z : a_)
            if (!detail::is_finite(z)) return false;
        return true;
    }

    ComplexMatrix adjoint() const {
        ComplexMatrix r(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j)
                r(j, i) = std::conj((*this)(i, j));
        return r;
    }

    ComplexMatrix operator+(const ComplexMatrix& o) const {
        require_same_shape(o);
        ComplexMatrix r(rows_, cols_);
        for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = a_[k] + o.a_[k];
        return r;
    }

    ComplexMatrix operator-(const ComplexMatrix& o) const {
        require_same_shape(o);
        ComplexMatrix r(rows_, cols_);
        for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = a_[k] - o.a_[k];
        return r;
    }

    ComplexMatrix operator*(const ComplexMatrix& o) const {
        if (cols_ != o.rows_)
            throw invalid_input("ComplexMatrix: inner dimension mismatch in product");
        ComplexMatrix r(rows_, o.cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < cols_; ++k) {
                const cdouble aik = (*this)(i, k);
                if (aik == cdouble(0.0, 0.0)) continue;
                for (std::size_t j = 0; j < o.cols_; ++j)
                    r(i, j) += aik * o(k, j);
            }
        return r;
    }

    ComplexMatrix scaled(cdouble s) const {
        ComplexMatrix r(rows_, cols_);
        for (std::size_t k = 0; k < a_.size(); ++k) r.a_[k] = s * a_[k];
        return r;
    }

    ComplexMatrix& add_scaled(const ComplexMatrix& o, cdouble s) {
        require_same_shape(o);
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += s * o.a_[k];
        return *this;
    }

    cdouble trace() const {
        cdouble t = 0.0;
        for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
        return t;
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const cdouble& z : a_) s += std::norm(z);
        return std::sqrt(s);
    }

    double max_abs() const {
        double m = 0.0;
        for (const cdouble& z : a_) m = std::max(m, std::abs(z));
        return m;
    }

    /// Maximum absolute column sum (the matrix 1-norm); used by the
    /// scaling-and-squaring threshold.
    double one_norm() const {
        double m = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < rows_; ++i) s += std::abs((*this)(i, j));
            m = std::max(m, s);
        }
        return m;
    }

    /// Determinant by LU with partial pivoting. Only sensible for the small
    /// square matrices this library deals with.
    cdouble determinant() const {
        if (!is_square()) throw invalid_input("determinant: matrix not square");
        ComplexMatrix lu(*this);
        const std::size_t n = rows_;
        cdouble det = 1.0;
        for (std::size_t c = 0; c < n; ++c) {
            std::size_t piv = c;
            double best = std::abs(lu(c, c));
            for (std::size_t r = c + 1; r < n; ++r) {
                double v = std::abs(lu(r, c));
                if (v > best) { best = v; piv = r; }
            }
            if (best == 0.0) return 0.0;
            if (piv != c) {
                for (std::size_t j = 0; j < n; ++j) std::swap(lu(c, j), lu(piv, j));
                det = -det;
            }
            det *= lu(c, c);
            for (std::size_t r = c + 1; r < n; ++r) {
                cdouble f = lu(r, c) / lu(c, c);
                for (std::size_t j = c; j < n; ++j) lu(r, j) -= f * lu(c, j);
            }
        }
        return det;
    }

    /// Gauss-Jordan inverse with partial pivoting.
    ComplexMatrix inverse() const {
        if (!is_square()) throw invalid_input("inverse: matrix not square");
        const std::size_t n = rows_;
        ComplexMatrix work(*this);
        ComplexMatrix inv = identity(n);
        for (std::size_t c = 0; c < n; ++c) {
            std::size_t piv = c;
            double best = std::abs(work(c, c));
            for (std::size_t r = c + 1; r < n; ++r) {
                double v = std::abs(work(r, c));
                if (v > best) { best = v; piv = r; }
            }
            if (best <= 1e-300)
                throw degenerate_element("inverse: pivot vanished, matrix numerically singular");
            if (piv != c) {
                for (std::size_t j = 0; j < n; ++j) {
                    std::swap(work(c, j), work(piv, j));
                    std::swap(inv(c, j), inv(piv, j));
                }
            }
            const cdouble d = work(c, c);
            for (std::size_t j = 0; j < n; ++j) { work(c, j) /= d; inv(c, j) /= d; }
            for (std::size_t r = 0; r < n; ++r) {
                if (r == c) continue;
                const cdouble f = work(r, c);
                if (f == cdouble(0.0, 0.0)) continue;
                for (std::size_t j = 0; j < n; ++j) {
                    work(r, j) -= f * work(c, j);
                    inv(r, j) -= f * inv(c, j);
                }
            }
        }
        return inv;
    }

private:
    void require_same_shape(const ComplexMatrix& o) const {
        if (rows_ != o.rows_ || cols_ != o.cols_)
            throw invalid_input("ComplexMatrix: shape mismatch");
    }

    std::size_t rows_;
    std::size_t cols_;
    std::vector<cdouble> a_;
};

/// Nonnegative finite operator norm of a linear map between metric frames.
struct LinearMapNorm {
    double value = 0.0;

    LinearMapNorm() = default;
    explicit LinearMapNorm(double v) : value(v) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw invalid_input("LinearMapNorm: value must be finite and >= 0");
    }
};

struct SingularPair {
    double sigma = 0.0;
    std::vector<cdouble> right; // unit right-singular vector, first nonzero entry real-positive
};

namespace detail {

inline double vec_norm(const std::vector<cdouble>& v) {
    double s = 0.0;
    for (const cdouble& z : v) s += std::norm(z);
    return std::sqrt(s);
}

inline void fix_phase(std::vector<cdouble>& v) {
    for (cdouble& z : v) {
        double a = std::abs(z);
        if (a > 1e-12) {
            cdouble phase = std::conj(z) / a;
            for (cdouble& w : v) w *= phase;
            return;
        }
    }
}

} // namespace detail

/// Largest singular value of M together with the maximizing unit input
/// direction. Power iteration on M^H M with a fixed seed vector; threshold
/// 1e-12 on the Rayleigh quotient, capped at 10000 iterations. Dimensions
/// here stay tiny, so a full SVD would be overkill.
inline SingularPair top_singular_pair(const ComplexMatrix& m) {
    if (!m.all_finite())
        throw invalid_input("top_singular_pair: non-finite entries");
    const std::size_t n = m.cols();
    const ComplexMatrix mh = m.adjoint();
    const ComplexMatrix b = mh * m;

    std::vector<cdouble> v(n);
    for (std::size_t k = 0; k < n; ++k)
        v[k] = std::polar(1.0 / std::sqrt(double(k + 1)), 0.7 * double(k));
    double nv = detail::vec_norm(v);
    for (cdouble& z : v) z /= nv;

    auto apply = [&](const std::vector<cdouble>& x) {
        std::vector<cdouble> y(n, cdouble(0.0, 0.0));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                y[i] += b(i, j) * x[j];
        return y;
    };

    double lambda = -1.0;
    std::size_t basis_fallback = 0;
    for (int it = 0; it < 10000; ++it) {
        std::vector<cdouble> w = apply(v);
        double nw = detail::vec_norm(w);
        if (nw == 0.0) {
            // v landed in the null space of M^H M; restart from a basis vector.
            if (basis_fallback >= n) {
                SingularPair p;
                p.sigma = 0.0;
                p.right.assign(n, cdouble(0.0, 0.0));
                p.right[0] = 1.0;
                return p;
            }
            v.assign(n, cdouble(0.0, 0.0));
            v[basis_fallback++] = 1.0;
            lambda = -1.0;
            continue;
        }
        cdouble num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            num += std::conj(v[k]) * w[k];
            den += std::conj(v[k]) * v[k];
        }
        const double lam = num.real() / den.real();
        for (std::size_t k = 0; k < n; ++k) v[k] = w[k] / nw;
        if (lambda >= 0.0 && std::abs(lam - lambda) <= 1e-12 * std::max(1.0, std::abs(lam))) {
            lambda = lam;
            break;
        }
        lambda = lam;
    }
    SingularPair p;
    p.sigma = std::sqrt(std::max(lambda, 0.0));
    detail::fix_phase(v);
    p.right = std::move(v);
    return p;
}

/// Largest singular value of M (relative accuracy ~1e-10 for gapped spectra).
inline LinearMapNorm spectral_norm(const ComplexMatrix& m) {
    return LinearMapNorm(top_singular_pair(m).sigma);
}

/// e^M by scaling-and-squaring: scale until the 1-norm is <= 0.5, truncate
/// the Taylor series at degree 18, then square back. Good to ~1e-12 relative
/// in spectral norm for ||M|| <= 10, which covers the operating range.
inline ComplexMatrix matrix_exp(const ComplexMatrix& m) {
    if (!m.is_square()) throw invalid_input("matrix_exp: matrix not square");
    const std::size_t n = m.rows();

    int squarings = 0;
    double nrm = m.one_norm();
    while (nrm > 0.5) {
        nrm *= 0.5;
        ++squarings;
    }
    ComplexMatrix a = m.scaled(std::ldexp(1.0, -squarings));

    ComplexMatrix sum = ComplexMatrix::identity(n);
    ComplexMatrix term = ComplexMatrix::identity(n);
    for (int k = 1; k <= 18; ++k) {
        term = term * a;
        term = term.scaled(1.0 / double(k));
        sum = sum + term;
    }
    for (int s = 0; s < squarings; ++s) sum = sum * sum;
    return sum;
}

/// Central complex finite-difference Jacobian of a holomorphic map between
/// coordinate patches. Differences are taken along the real axis of each
/// complex coordinate, which for holomorphic maps gives the complex
/// derivative with O(h^2) error. Default step 1e-5 balances truncation
/// against roundoff at double precision.
inline ComplexMatrix numeric_jacobian(
    const std::function<std::vector<cdouble>(const std::vector<cdouble>&)>& map,
    const std::vector<cdouble>& x,
    double h = 1e-5) {
    if (!(h > 0.0)) throw invalid_input("numeric_jacobian: step must be positive");
    const std::size_t in_dim = x.size();
    if (in_dim == 0) throw invalid_input("numeric_jacobian: empty input point");

    std::vector<cdouble> xp = x, xm = x;
    xp[0] += h;
    xm[0] -= h;
    std::vector<cdouble> fp = map(xp), fm = map(xm);
    if (fp.size() != fm.size() || fp.empty())
        throw invalid_input("numeric_jacobian: map output dimension unstable or empty");
    const std::size_t out_dim = fp.size();

    ComplexMatrix jac(out_dim, in_dim);
    for (std::size_t c = 0;; ++c) {
        for (std::size_t r = 0; r < out_dim; ++r)
            jac(r, c) = (fp[r] - fm[r]) / (2.0 * h);
        if (c + 1 >= in_dim) break;
        xp = x; xm = x;
        xp[c + 1] += h;
        xm[c + 1] -= h;
        fp = map(xp);
        fm = map(xm);
        if (fp.size() != out_dim || fm.size() != out_dim)
            throw invalid_input("numeric_jacobian: map output dimension unstable");
    }
    if (!jac.all_finite())
        throw invalid_input("numeric_jacobian: non-finite difference quotient");
    return jac;
}

} // namespace zlab
