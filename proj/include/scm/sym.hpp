#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <utility>

namespace scm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense real symmetric matrix. Construction symmetrizes to (X + X^T)/2 and
/// rejects non-square or non-finite input.
class SymMatrix {
public:
    explicit SymMatrix(const Matrix& raw) {
        if (raw.rows() != raw.cols() || raw.rows() < 1)
            throw std::invalid_argument("SymMatrix: input must be square with dim >= 1");
        if (!raw.allFinite())
            throw std::invalid_argument("SymMatrix: input has non-finite entries");
        m_ = 0.5 * (raw + raw.transpose());
    }

    static SymMatrix identity(Eigen::Index n) { return SymMatrix(Matrix::Identity(n, n)); }
    static SymMatrix zero(Eigen::Index n) { return SymMatrix(Matrix::Zero(n, n)); }

    Eigen::Index dim() const { return m_.rows(); }
    const Matrix& mat() const { return m_; }

private:
    Matrix m_;
};

/// Symmetric matrix whose eigenvalues are all >= floorEps (up to numerical
/// tolerance). Construction demands a Cholesky factorization as the
/// positivity witness.
class SpdMatrix {
public:
    SpdMatrix(SymMatrix base, double floorEps)
        : base_(std::move(base)), floorEps_(floorEps) {
        if (floorEps_ <= 0.0)
            throw std::invalid_argument("SpdMatrix: floorEps must be positive");
        Eigen::LLT<Matrix> llt(base_.mat());
        if (llt.info() != Eigen::Success)
            throw std::domain_error("SpdMatrix: Cholesky factorization failed, matrix not positive definite");
    }

    Eigen::Index dim() const { return base_.dim(); }
    const SymMatrix& sym() const { return base_; }
    const Matrix& mat() const { return base_.mat(); }
    double floorEps() const { return floorEps_; }

private:
    SymMatrix base_;
    double floorEps_;
};

/// Length of the upper-triangle vectorization of an n x n symmetric matrix.
inline Eigen::Index vechDim(Eigen::Index n) { return n * (n + 1) / 2; }

/// Matrix dimension n recovered from a vech length, or -1 if not triangular.
inline Eigen::Index vechMatrixDim(Eigen::Index d) {
    Eigen::Index n = static_cast<Eigen::Index>((std::sqrt(8.0 * static_cast<double>(d) + 1.0) - 1.0) / 2.0 + 0.5);
    return vechDim(n) == d ? n : -1;
}

/// Upper-triangle (row-major) vectorization.
inline Vector vech(const SymMatrix& s) {
    const Matrix& m = s.mat();
    const Eigen::Index n = s.dim();
    Vector v(vechDim(n));
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j)
            v[k++] = m(i, j);
    return v;
}

/// Inverse of vech; symmetric by construction.
inline SymMatrix unvech(const Vector& v) {
    const Eigen::Index n = vechMatrixDim(v.size());
    if (n < 1)
        throw std::invalid_argument("unvech: length is not n*(n+1)/2 for any n");
    Matrix m(n, n);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            m(i, j) = v[k];
            m(j, i) = v[k];
            ++k;
        }
    return SymMatrix(m);
}

} // namespace scm
