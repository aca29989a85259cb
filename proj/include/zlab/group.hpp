#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "zlab/complex_matrix.hpp"
#include "zlab/errors.hpp"

namespace zlab {

class GroupInstance;

/// Element of the holomorphic Lie algebra in the fixed basis eps; by left
/// trivialization the same coordinates stand for a tangent vector at any
/// basepoint.
class AlgebraVector {
public:
    explicit AlgebraVector(std::vector<cdouble> coords) : c_(std::move(coords)) {
        if (c_.empty()) throw invalid_input("AlgebraVector: empty coordinate list");
        for (const cdouble& z : c_)
            if (!detail::is_finite(z)) throw invalid_input("AlgebraVector: non-finite coordinate");
    }

    static AlgebraVector zero(std::size_t m) {
        return AlgebraVector(std::vector<cdouble>(m, cdouble(0.0, 0.0)));
    }

    static AlgebraVector basis(std::size_t m, std::size_t k) {
        std::vector<cdouble> c(m, cdouble(0.0, 0.0));
        c.at(k) = 1.0;
        return AlgebraVector(std::move(c));
    }

    std::size_t dim() const { return c_.size(); }
    const std::vector<cdouble>& coords() const { return c_; }
    const cdouble& operator[](std::size_t k) const { return c_[k]; }

    double norm() const { return detail::vec_norm(c_); }

    AlgebraVector scaled(cdouble s) const {
        std::vector<cdouble> c(c_);
        for (cdouble& z : c) z *= s;
        return AlgebraVector(std::move(c));
    }

    AlgebraVector plus(const AlgebraVector& o) const {
        if (o.dim() != dim()) throw invalid_input("AlgebraVector: dimension mismatch");
        std::vector<cdouble> c(c_);
        for (std::size_t k = 0; k < c.size(); ++k) c[k] += o.c_[k];
        return AlgebraVector(std::move(c));
    }

    AlgebraVector normalized() const {
        double n = norm();
        if (n == 0.0) throw invalid_input("AlgebraVector: cannot normalize zero vector");
        return scaled(1.0 / n);
    }

private:
    std::vector<cdouble> c_;
};

/// Point of a concrete group instance. The raw value is a 1 x m coordinate
/// row for the vector-like instances and an n x n matrix for the matrix
/// instances; interpretation belongs to the owning instance.
class GroupElement {
public:
    GroupElement(const GroupInstance& inst, ComplexMatrix value)
        : inst_(&inst), value_(std::move(value)) {}

    const GroupInstance& instance() const { return *inst_; }
    const ComplexMatrix& value() const { return value_; }

private:
    const GroupInstance* inst_;
    ComplexMatrix value_;
};

/// Euclidean distance of the raw coordinate values; the comparison metric
/// used by residual checks in tests and the verification suite.
inline double element_distance(const GroupElement& a, const GroupElement& b) {
    if (&a.instance() != &b.instance())
        throw invalid_input("element_distance: elements from different instances");
    return (a.value() - b.value()).frobenius_norm();
}

/// Abstract complex Lie group with a fixed orthonormal basis eps of its
/// algebra. Tangent vectors are always carried in left-trivialized eps
/// coordinates, so every translation differential is the coordinate
/// identity and the metric of a coordinate vector is its 2-norm.
class GroupInstance {
public:
    virtual ~GroupInstance() = default;

    GroupInstance(const GroupInstance&) = delete;
    GroupInstance& operator=(const GroupInstance&) = delete;

    const std::string& name() const { return name_; }
    std::size_t dim() const { return dim_; }

    /// [eps_a, eps_b] in eps coordinates.
    const AlgebraVector& bracket_basis(std::size_t a, std::size_t b) const {
        return table_.at(a * dim_ + b);
    }

    /// Bilinear bracket via the table.
    AlgebraVector bracket(const AlgebraVector& x, const AlgebraVector& y) const {
        require_dim(x);
        require_dim(y);
        std::vector<cdouble> out(dim_, cdouble(0.0, 0.0));
        for (std::size_t a = 0; a < dim_; ++a) {
            if (x[a] == cdouble(0.0, 0.0)) continue;
            for (std::size_t b = 0; b < dim_; ++b) {
                const cdouble f = x[a] * y[b];
                if (f == cdouble(0.0, 0.0)) continue;
                const AlgebraVector& t = bracket_basis(a, b);
                for (std::size_t c = 0; c < dim_; ++c) out[c] += f * t[c];
            }
        }
        return AlgebraVector(std::move(out));
    }

    /// Matrix of ad_X in the basis eps; bilinear in X by construction.
    ComplexMatrix ad_matrix(const AlgebraVector& x) const {
        require_dim(x);
        ComplexMatrix m(dim_, dim_);
        for (std::size_t b = 0; b < dim_; ++b) {
            AlgebraVector col = bracket(x, AlgebraVector::basis(dim_, b));
            for (std::size_t c = 0; c < dim_; ++c) m(c, b) = col[c];
        }
        return m;
    }

    /// Crude certified upper bound for the structure constant: the sum of
    /// ||[eps_a, eps_b]|| over all ordered basis pairs. Sound because unit
    /// vectors have every |coefficient| <= 1.
    double bracket_upper_bound() const { return upper_bound_; }

    bool abelian() const { return upper_bound_ == 0.0; }

    virtual GroupElement identity() const = 0;

    /// Validates (and for SL2 reconditions) a raw value into an element.
    virtual GroupElement make_element(ComplexMatrix raw) const = 0;

    virtual GroupElement mul(const GroupElement& g, const GroupElement& h) const = 0;
    virtual GroupElement inv(const GroupElement& g) const = 0;

    /// exp(zX) in closed form. Overflow in the scalar/matrix exponential
    /// range fails loudly with the offending magnitude.
    virtual GroupElement one_param(const AlgebraVector& x, cdouble z) const = 0;

    /// Degree-4 truncated exponential from the identity; the one-step update
    /// of the classical 4th-order integrator behind ode_exp_oracle.
    virtual GroupElement taylor_exp4(const AlgebraVector& x) const = 0;

    /// Coordinates of an ambient velocity at q pulled back to the algebra by
    /// (dL_{q^{-1}})_q.
    virtual AlgebraVector left_trivialize(const GroupElement& q, const ComplexMatrix& velocity) const = 0;

    /// Ambient velocity (dL_q)_e(X) at q.
    virtual ComplexMatrix embed_velocity(const GroupElement& q, const AlgebraVector& x) const = 0;

    void require_dim(const AlgebraVector& x) const {
        if (x.dim() != dim_)
            throw invalid_input("algebra vector dimension does not match group " + name_);
    }

    void require_same_instance(const GroupElement& g) const {
        if (&g.instance() != this)
            throw invalid_input("group element does not belong to instance " + name_);
    }

protected:
    GroupInstance(std::string name, std::size_t dim) : name_(std::move(name)), dim_(dim) {
        if (dim == 0) throw invalid_input("GroupInstance: dimension must be >= 1");
    }

    /// Install the bracket table and check antisymmetry and the Jacobi
    /// identity on basis triples to 1e-12.
    void set_bracket_table(std::vector<AlgebraVector> table) {
        if (table.size() != dim_ * dim_)
            throw internal_error("bracket table has wrong size for " + name_);
        table_ = std::move(table);
        upper_bound_ = 0.0;
        for (std::size_t a = 0; a < dim_; ++a)
            for (std::size_t b = 0; b < dim_; ++b) {
                const AlgebraVector& ab = bracket_basis(a, b);
                const AlgebraVector& ba = bracket_basis(b, a);
                for (std::size_t c = 0; c < dim_; ++c)
                    if (std::abs(ab[c] + ba[c]) > 1e-12)
                        throw internal_error("bracket table of " + name_ + " is not antisymmetric");
                upper_bound_ += ab.norm();
            }
        for (std::size_t a = 0; a < dim_; ++a)
            for (std::size_t b = 0; b < dim_; ++b)
                for (std::size_t c = 0; c < dim_; ++c) {
                    AlgebraVector s = bracket(bracket_basis(a, b), AlgebraVector::basis(dim_, c))
                                          .plus(bracket(bracket_basis(b, c), AlgebraVector::basis(dim_, a)))
                                          .plus(bracket(bracket_basis(c, a), AlgebraVector::basis(dim_, b)));
                    if (s.norm() > 1e-12)
                        throw internal_error("bracket table of " + name_ + " violates the Jacobi identity");
                }
    }

    static void guard_exponent(double magnitude) {
        if (magnitude > 700.0) {
            std::ostringstream os;
            os << "exponential argument magnitude " << magnitude
               << " exceeds the double-precision range (limit 700)";
            throw range_overflow(os.str());
        }
    }

private:
    std::string name_;
    std::size_t dim_;
    std::vector<AlgebraVector> table_;
    double upper_bound_ = 0.0;
};

// ---------------------------------------------------------------------------
// Additive group C^m.

class AdditiveGroup final : public GroupInstance {
public:
    explicit AdditiveGroup(std::size_t m) : GroupInstance("additive", m) {
        set_bracket_table(std::vector<AlgebraVector>(m * m, AlgebraVector::zero(m)));
    }

    GroupElement identity() const override { return GroupElement(*this, ComplexMatrix(1, dim())); }

    GroupElement make_element(ComplexMatrix raw) const override {
        if (raw.rows() != 1 || raw.cols() != dim())
            throw invalid_input("additive element must be a 1 x m coordinate row");
        return GroupElement(*this, std::move(raw));
    }

    GroupElement mul(const GroupElement& g, const GroupElement& h) const override {
        require_same_instance(g);
        require_same_instance(h);
        return GroupElement(*this, g.value() + h.value());
    }

    GroupElement inv(const GroupElement& g) const override {
        require_same_instance(g);
        return GroupElement(*this, g.value().scaled(-1.0));
    }

    GroupElement one_param(const AlgebraVector& x, cdouble z) const override {
        require_dim(x);
        ComplexMatrix v(1, dim());
        for (std::size_t k = 0; k < dim(); ++k) v(0, k) = z * x[k];
        return GroupElement(*this, std::move(v));
    }

    GroupElement taylor_exp4(const AlgebraVector& x) const override {
        return one_param(x, 1.0); // the linear flow is exact at any order
    }

    AlgebraVector left_trivialize(const GroupElement& q, const ComplexMatrix& velocity) const override {
        require_same_instance(q);
        return AlgebraVector(velocity.data());
    }

    ComplexMatrix embed_velocity(const GroupElement& q, const AlgebraVector& x) const override {
        require_same_instance(q);
        require_dim(x);
        ComplexMatrix v(1, dim());
        for (std::size_t k = 0; k < dim(); ++k) v(0, k) = x[k];
        return v;
    }
};

// ---------------------------------------------------------------------------
// Torus (C*)^m, componentwise multiplication.

class TorusGroup final : public GroupInstance {
public:
    explicit TorusGroup(std::size_t m) : GroupInstance("torus", m) {
        set_bracket_table(std::vector<AlgebraVector>(m * m, AlgebraVector::zero(m)));
    }

    GroupElement identity() const override {
        ComplexMatrix v(1, dim());
        for (std::size_t k = 0; k < dim(); ++k) v(0, k) = 1.0;
        return GroupElement(*this, std::move(v));
    }

    GroupElement make_element(ComplexMatrix raw) const override {
        if (raw.rows() != 1 || raw.cols() != dim())
            throw invalid_input("torus element must be a 1 x m coordinate row");
        for (std::size_t k = 0; k < dim(); ++k)
            if (std::abs(raw(0, k)) == 0.0)
                throw degenerate_element("torus coordinate vanished");
        return GroupElement(*this, std::move(raw));
    }

    GroupElement mul(const GroupElement& g, const GroupElement& h) const override {
        require_same_instance(g);
        require_same_instance(h);
        ComplexMatrix v(1, dim());
        for (std::size_t k = 0; k < dim(); ++k) v(0, k) = g.value()(0, k) * h.value()(0, k);
        return make_element(std::move(v));
    }

    GroupElement inv(const GroupElement& g) const override {
        require_same_instance(g);
        ComplexMatrix v(1, dim());
        for (std::size_t k = 0; k < dim(); ++k) {
            const cdouble w = g.value()(0, k);
            if (std::abs(w) == 0.0) throw degenerate_element("torus coordinate vanished");
            v(0, k) = 1.0 / w;
        }
        return GroupElement(*this, std::move(v));
    }

    GroupElement one_param(const AlgebraVector& x, cdouble z) const override {
        require_dim(x);
        guard_exponent(std::abs(z) * x.norm());
        ComplexMatrix v(1, dim());
        for (std::size_t k = 0; k < dim(); ++k) v(0, k) = std::exp(z * x[k]);
        return make_element(std::move(v));
    }

    GroupElement taylor_exp4(const AlgebraVector& x) const override {
        require_dim(x);
        ComplexMatrix v(1, dim());
        for (std::size_t k = 0; k < dim(); ++k) {
            const cdouble u = x[k];
            v(0, k) = 1.0 + u * (1.0 + u * (0.5 + u * (1.0 / 6.0 + u * (1.0 / 24.0))));
        }
        return make_element(std::move(v));
    }

    AlgebraVector left_trivialize(const GroupElement& q, const ComplexMatrix& velocity) const override {
        require_same_instance(q);
        std::vector<cdouble> c(dim());
        for (std::size_t k = 0; k < dim(); ++k) c[k] = velocity(0, k) / q.value()(0, k);
        return AlgebraVector(std::move(c));
    }

    ComplexMatrix embed_velocity(const GroupElement& q, const AlgebraVector& x) const override {
        require_same_instance(q);
        require_dim(x);
        ComplexMatrix v(1, dim());
        for (std::size_t k = 0; k < dim(); ++k) v(0, k) = q.value()(0, k) * x[k];
        return v;
    }
};

// ---------------------------------------------------------------------------
// Matrix instances: common machinery for a basis of concrete matrices.

class MatrixGroupBase : public GroupInstance {
public:
    std::size_t matrix_size() const { return n_; }

    const ComplexMatrix& basis_matrix(std::size_t a) const { return basis_.at(a); }

    ComplexMatrix algebra_to_matrix(const AlgebraVector& x) const {
        require_dim(x);
        ComplexMatrix m(n_, n_);
        for (std::size_t a = 0; a < dim(); ++a)
            if (x[a] != cdouble(0.0, 0.0)) m.add_scaled(basis_[a], x[a]);
        return m;
    }

    /// Hilbert-Schmidt projection onto the basis; exact for matrices in the
    /// algebra since the basis is HS-orthonormal.
    AlgebraVector matrix_to_algebra(const ComplexMatrix& m) const {
        std::vector<cdouble> c(dim(), cdouble(0.0, 0.0));
        for (std::size_t a = 0; a < dim(); ++a) {
            cdouble s = 0.0;
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t j = 0; j < n_; ++j)
                    s += std::conj(basis_[a](i, j)) * m(i, j);
            c[a] = s;
        }
        return AlgebraVector(std::move(c));
    }

    GroupElement identity() const override { return GroupElement(*this, ComplexMatrix::identity(n_)); }

    GroupElement one_param(const AlgebraVector& x, cdouble z) const override {
        require_dim(x);
        guard_exponent(std::abs(z) * x.norm());
        return make_element(matrix_exp(algebra_to_matrix(x).scaled(z)));
    }

    GroupElement taylor_exp4(const AlgebraVector& x) const override {
        require_dim(x);
        const ComplexMatrix p = algebra_to_matrix(x);
        ComplexMatrix sum = ComplexMatrix::identity(n_);
        ComplexMatrix term = ComplexMatrix::identity(n_);
        for (int k = 1; k <= 4; ++k) {
            term = term * p;
            term = term.scaled(1.0 / double(k));
            sum = sum + term;
        }
        return make_element(std::move(sum));
    }

    AlgebraVector left_trivialize(const GroupElement& q, const ComplexMatrix& velocity) const override {
        require_same_instance(q);
        return matrix_to_algebra(q.value().inverse() * velocity);
    }

    ComplexMatrix embed_velocity(const GroupElement& q, const AlgebraVector& x) const override {
        require_same_instance(q);
        return q.value() * algebra_to_matrix(x);
    }

protected:
    MatrixGroupBase(std::string name, std::size_t n, std::vector<ComplexMatrix> basis)
        : GroupInstance(std::move(name), basis.size()), n_(n), basis_(std::move(basis)) {
        std::vector<AlgebraVector> table;
        table.reserve(dim() * dim());
        for (std::size_t a = 0; a < dim(); ++a)
            for (std::size_t b = 0; b < dim(); ++b) {
                const ComplexMatrix comm = basis_[a] * basis_[b] - basis_[b] * basis_[a];
                AlgebraVector coords = matrix_to_algebra(comm);
                // the basis must span the commutator exactly
                ComplexMatrix back(n_, n_);
                for (std::size_t c = 0; c < dim(); ++c) back.add_scaled(basis_[c], coords[c]);
                if ((back - comm).frobenius_norm() > 1e-12)
                    throw internal_error("basis of " + this->name() + " is not closed under the bracket");
                table.push_back(std::move(coords));
            }
        set_bracket_table(std::move(table));
    }

    std::size_t n_;
    std::vector<ComplexMatrix> basis_;
};

/// GL(n, C): basis = the elementary matrices E_ab (HS-orthonormal),
/// algebra dimension n^2. Elements must keep |det| > 1e-12.
class GeneralLinearGroup final : public MatrixGroupBase {
public:
    explicit GeneralLinearGroup(std::size_t n) : MatrixGroupBase("gl", n, elementary_basis(n)) {}

    GroupElement make_element(ComplexMatrix raw) const override {
        if (raw.rows() != n_ || raw.cols() != n_)
            throw invalid_input("gl element must be an n x n matrix");
        if (std::abs(raw.determinant()) <= 1e-12)
            throw degenerate_element("gl element numerically singular (|det| <= 1e-12)");
        return GroupElement(*this, std::move(raw));
    }

    GroupElement mul(const GroupElement& g, const GroupElement& h) const override {
        require_same_instance(g);
        require_same_instance(h);
        return make_element(g.value() * h.value());
    }

    GroupElement inv(const GroupElement& g) const override {
        require_same_instance(g);
        if (std::abs(g.value().determinant()) <= 1e-12)
            throw degenerate_element("gl element numerically singular (|det| <= 1e-12)");
        return GroupElement(*this, g.value().inverse());
    }

private:
    static std::vector<ComplexMatrix> elementary_basis(std::size_t n) {
        if (n == 0) throw invalid_input("gl: matrix size must be >= 1");
        std::vector<ComplexMatrix> basis;
        basis.reserve(n * n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                ComplexMatrix e(n, n);
                e(i, j) = 1.0;
                basis.push_back(std::move(e));
            }
        return basis;
    }
};

/// SL(2, C): basis {H/sqrt(2), E, F} scaled to unit Hilbert-Schmidt norm.
/// Determinant drift from long products is reconditioned by dividing by
/// sqrt(det); elements keep |det - 1| <= 1e-9.
class SpecialLinearGroup2 final : public MatrixGroupBase {
public:
    SpecialLinearGroup2() : MatrixGroupBase("sl2", 2, sl2_basis()) {}

    GroupElement make_element(ComplexMatrix raw) const override {
        if (raw.rows() != 2 || raw.cols() != 2)
            throw invalid_input("sl2 element must be a 2 x 2 matrix");
        const cdouble det = raw.determinant();
        const double drift = std::abs(det - cdouble(1.0, 0.0));
        if (drift > 1e-9) {
            if (std::abs(det) <= 1e-12)
                throw degenerate_element("sl2 element numerically singular");
            throw invalid_input("sl2 element determinant drifted beyond tolerance");
        }
        if (drift > 0.0) raw = raw.scaled(1.0 / std::sqrt(det));
        return GroupElement(*this, std::move(raw));
    }

    GroupElement mul(const GroupElement& g, const GroupElement& h) const override {
        require_same_instance(g);
        require_same_instance(h);
        ComplexMatrix p = g.value() * h.value();
        const cdouble det = p.determinant();
        if (std::abs(det) <= 1e-12)
            throw degenerate_element("sl2 product numerically singular");
        if (det != cdouble(1.0, 0.0)) p = p.scaled(1.0 / std::sqrt(det));
        return GroupElement(*this, std::move(p));
    }

    GroupElement inv(const GroupElement& g) const override {
        require_same_instance(g);
        const ComplexMatrix& m = g.value();
        const cdouble det = m.determinant();
        if (std::abs(det) <= 1e-12)
            throw degenerate_element("sl2 element numerically singular");
        ComplexMatrix adj(2, 2, {m(1, 1), -m(0, 1), -m(1, 0), m(0, 0)});
        return make_element(adj.scaled(1.0 / det));
    }

private:
    static std::vector<ComplexMatrix> sl2_basis() {
        const double s = 1.0 / std::sqrt(2.0);
        std::vector<ComplexMatrix> basis;
        basis.push_back(ComplexMatrix(2, 2, {cdouble(s), 0.0, 0.0, cdouble(-s)})); // H/sqrt2
        basis.push_back(ComplexMatrix(2, 2, {0.0, 1.0, 0.0, 0.0}));                // E
        basis.push_back(ComplexMatrix(2, 2, {0.0, 0.0, 1.0, 0.0}));                // F
        return basis;
    }
};

// ---------------------------------------------------------------------------
// Long-lived shared instances (elements hold raw pointers to them).

inline const AdditiveGroup& additive_group(std::size_t m) {
    static std::map<std::size_t, std::unique_ptr<AdditiveGroup>> cache;
    auto& slot = cache[m];
    if (!slot) slot = std::make_unique<AdditiveGroup>(m);
    return *slot;
}

inline const TorusGroup& torus_group(std::size_t m) {
    static std::map<std::size_t, std::unique_ptr<TorusGroup>> cache;
    auto& slot = cache[m];
    if (!slot) slot = std::make_unique<TorusGroup>(m);
    return *slot;
}

inline const GeneralLinearGroup& gl_group(std::size_t n) {
    static std::map<std::size_t, std::unique_ptr<GeneralLinearGroup>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<GeneralLinearGroup>(n);
    return *slot;
}

inline const SpecialLinearGroup2& sl2_group() {
    static SpecialLinearGroup2 inst;
    return inst;
}

// ---------------------------------------------------------------------------
// Operation-style free functions.

inline GroupElement mul(const GroupElement& g, const GroupElement& h) {
    if (&g.instance() != &h.instance())
        throw invalid_input("mul: elements from different instances");
    return g.instance().mul(g, h);
}

inline GroupElement inv(const GroupElement& g) { return g.instance().inv(g); }

inline ComplexMatrix bracket_ad(const GroupInstance& inst, const AlgebraVector& x) {
    return inst.ad_matrix(x);
}

/// (dL_g)_e(v) in left-trivialized coordinates: the coordinate identity,
/// recording only the basepoint change e -> g.
inline AlgebraVector left_translate_frame(const GroupElement& g, const AlgebraVector& v) {
    g.instance().require_dim(v);
    return v;
}

} // namespace zlab
