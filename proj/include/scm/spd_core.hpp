#pragma once

#include <vector>

#include "scm/sym.hpp"

namespace scm {

struct EigenDecomposition {
    Vector eigenvalues;  // sorted descending
    Matrix eigenvectors; // orthonormal columns, eigenvectors.col(i) pairs with eigenvalues[i]
};

/// Thrown when the Jacobi sweep fails to reach its off-diagonal target.
class EigNonConvergence : public std::runtime_error {
public:
    EigNonConvergence(double residual, int sweeps)
        : std::runtime_error("eigSym: no convergence after " + std::to_string(sweeps) +
                             " sweeps, off-diagonal residual " + std::to_string(residual)),
          offDiagResidual(residual), sweepsDone(sweeps) {}
    double offDiagResidual;
    int sweepsDone;
};

/// Cyclic Jacobi eigendecomposition. Deterministic sweep order; converges when
/// the off-diagonal Frobenius norm drops below 1e-12 * ||input||_F.
EigenDecomposition eigSym(const SymMatrix& m);

/// Eigenvalue clamping onto the SPD cone: S† = Σ max{λ_i, eps} u_i u_i^T.
/// Non-symmetric input is symmetrized to (X + X^T)/2 first.
SpdMatrix projectToSpd(const Matrix& x, double eps);
SpdMatrix projectToSpd(const SymMatrix& x, double eps);

// Spectral matrix functions f(S) = Σ f(λ_i) u_i u_i^T.
SymMatrix matLog(const SpdMatrix& s);
SpdMatrix matExp(const SymMatrix& m);
SpdMatrix matSqrt(const SpdMatrix& s);
SpdMatrix matInvSqrt(const SpdMatrix& s);

/// Affine invariant Riemannian distance ||log(S1^{-1/2} S2 S1^{-1/2})||_F.
double airmDistance(const SpdMatrix& s1, const SpdMatrix& s2);

struct FrechetMeanResult {
    SpdMatrix mean;
    int iterations;
    double gradNorm;
};

class FrechetMeanError : public std::runtime_error {
public:
    FrechetMeanError(SpdMatrix iterate, double residual, int iters)
        : std::runtime_error("frechetMean: residual " + std::to_string(residual) +
                             " after " + std::to_string(iters) + " iterations"),
          lastIterate(std::move(iterate)), gradNorm(residual), iterations(iters) {}
    SpdMatrix lastIterate;
    double gradNorm;
    int iterations;
};

/// Karcher fixed-point iteration μ_{k+1} = μ_k^{1/2} exp(Ḡ) μ_k^{1/2} with Ḡ
/// the whitened mean log, initialized at the SPD-projected arithmetic mean.
FrechetMeanResult frechetMean(const std::vector<SpdMatrix>& set,
                              double tol = 1e-9, int maxIter = 100);

} // namespace scm
