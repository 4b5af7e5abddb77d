#include "scm/spd_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace scm {

namespace {

double offDiagNorm(const Matrix& a) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
}

} // namespace

EigenDecomposition eigSym(const SymMatrix& m) {
    const Eigen::Index n = m.dim();
    Matrix a = m.mat();
    Matrix v = Matrix::Identity(n, n);

    const double inputNorm = a.norm();
    const double target = 1e-12 * inputNorm;
    constexpr int kMaxSweeps = 100;

    if (n > 1) {
        int sweep = 0;
        while (offDiagNorm(a) > target) {
            if (sweep++ >= kMaxSweeps)
                throw EigNonConvergence(offDiagNorm(a), kMaxSweeps);
            for (Eigen::Index p = 0; p < n - 1; ++p) {
                for (Eigen::Index q = p + 1; q < n; ++q) {
                    const double apq = a(p, q);
                    if (apq == 0.0) continue;
                    const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                    // smaller-angle root of t^2 + 2 t theta - 1 = 0
                    double t = (theta >= 0.0 ? 1.0 : -1.0) /
                               (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                    const double c = 1.0 / std::sqrt(t * t + 1.0);
                    const double s = t * c;
                    for (Eigen::Index k = 0; k < n; ++k) {
                        const double akp = a(k, p), akq = a(k, q);
                        a(k, p) = c * akp - s * akq;
                        a(k, q) = s * akp + c * akq;
                    }
                    for (Eigen::Index k = 0; k < n; ++k) {
                        const double apk = a(p, k), aqk = a(q, k);
                        a(p, k) = c * apk - s * aqk;
                        a(q, k) = s * apk + c * aqk;
                    }
                    for (Eigen::Index k = 0; k < n; ++k) {
                        const double vkp = v(k, p), vkq = v(k, q);
                        v(k, p) = c * vkp - s * vkq;
                        v(k, q) = s * vkp + c * vkq;
                    }
                }
            }
        }
    }

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&a](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        out.eigenvalues[k] = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
        Vector col = v.col(order[static_cast<std::size_t>(k)]);
        // sign convention: largest-magnitude component positive
        Eigen::Index imax = 0;
        col.cwiseAbs().maxCoeff(&imax);
        if (col[imax] < 0.0) col = -col;
        out.eigenvectors.col(k) = col;
    }
    return out;
}

namespace {

SymMatrix applySpectral(const SymMatrix& s, double (*f)(double)) {
    EigenDecomposition ed = eigSym(s);
    Vector fv = ed.eigenvalues.unaryExpr([f](double x) { return f(x); });
    return SymMatrix(ed.eigenvectors * fv.asDiagonal() * ed.eigenvectors.transpose());
}

void requireStrictlyPositive(const Vector& eigenvalues, const char* what) {
    const double tol = 1e-12 * std::max(1.0, std::abs(eigenvalues[0]));
    if (eigenvalues[eigenvalues.size() - 1] <= tol)
        throw std::domain_error(std::string(what) + ": matrix has an eigenvalue <= 0 within tolerance");
}

} // namespace

SpdMatrix projectToSpd(const Matrix& x, double eps) {
    return projectToSpd(SymMatrix(x), eps);
}

SpdMatrix projectToSpd(const SymMatrix& x, double eps) {
    if (eps <= 0.0)
        throw std::invalid_argument("projectToSpd: eps must be positive");
    EigenDecomposition ed = eigSym(x);
    Vector clamped = ed.eigenvalues.cwiseMax(eps);
    SymMatrix sym(ed.eigenvectors * clamped.asDiagonal() * ed.eigenvectors.transpose());
    return SpdMatrix(sym, eps);
}

SymMatrix matLog(const SpdMatrix& s) {
    EigenDecomposition ed = eigSym(s.sym());
    requireStrictlyPositive(ed.eigenvalues, "matLog");
    Vector lv = ed.eigenvalues.array().log();
    return SymMatrix(ed.eigenvectors * lv.asDiagonal() * ed.eigenvectors.transpose());
}

SpdMatrix matExp(const SymMatrix& m) {
    SymMatrix e = applySpectral(m, [](double x) { return std::exp(x); });
    return SpdMatrix(e, 1e-300);
}

SpdMatrix matSqrt(const SpdMatrix& s) {
    EigenDecomposition ed = eigSym(s.sym());
    requireStrictlyPositive(ed.eigenvalues, "matSqrt");
    Vector rv = ed.eigenvalues.array().sqrt();
    return SpdMatrix(SymMatrix(ed.eigenvectors * rv.asDiagonal() * ed.eigenvectors.transpose()), 1e-300);
}

SpdMatrix matInvSqrt(const SpdMatrix& s) {
    EigenDecomposition ed = eigSym(s.sym());
    requireStrictlyPositive(ed.eigenvalues, "matInvSqrt");
    Vector rv = ed.eigenvalues.array().rsqrt();
    return SpdMatrix(SymMatrix(ed.eigenvectors * rv.asDiagonal() * ed.eigenvectors.transpose()), 1e-300);
}

double airmDistance(const SpdMatrix& s1, const SpdMatrix& s2) {
    if (s1.dim() != s2.dim())
        throw std::invalid_argument("airmDistance: dimension mismatch");
    SpdMatrix isq = matInvSqrt(s1);
    SymMatrix whitened(isq.mat() * s2.mat() * isq.mat());
    EigenDecomposition ed = eigSym(whitened);
    requireStrictlyPositive(ed.eigenvalues, "airmDistance");
    return std::sqrt(ed.eigenvalues.array().log().square().sum());
}

FrechetMeanResult frechetMean(const std::vector<SpdMatrix>& set, double tol, int maxIter) {
    if (set.empty())
        throw std::invalid_argument("frechetMean: empty set");
    const Eigen::Index n = set.front().dim();
    for (const auto& s : set)
        if (s.dim() != n)
            throw std::invalid_argument("frechetMean: dimension mismatch in set");
    if (set.size() == 1)
        return {set.front(), 0, 0.0};

    Matrix acc = Matrix::Zero(n, n);
    for (const auto& s : set) acc += s.mat();
    acc /= static_cast<double>(set.size());
    SpdMatrix mu = projectToSpd(acc, 1e-12);

    auto meanLog = [&](const SpdMatrix& m) {
        SpdMatrix isq = matInvSqrt(m);
        Matrix g = Matrix::Zero(n, n);
        for (const auto& s : set) {
            SpdMatrix whitened(SymMatrix(isq.mat() * s.mat() * isq.mat()), 1e-300);
            g += matLog(whitened).mat();
        }
        return Matrix(g / static_cast<double>(set.size()));
    };

    double gradNorm = meanLog(mu).norm();
    for (int iter = 0; iter < maxIter; ++iter) {
        if (gradNorm <= tol)
            return {mu, iter, gradNorm};
        Matrix g = meanLog(mu);
        SpdMatrix sq = matSqrt(mu);
        // full Karcher step; halve on gradient-norm increase so widely spread
        // sets cannot oscillate
        double step = 1.0;
        for (int half = 0; half < 30; ++half) {
            SpdMatrix delta = matExp(SymMatrix(Matrix(step * g)));
            SpdMatrix candidate(SymMatrix(sq.mat() * delta.mat() * sq.mat()), 1e-300);
            const double candNorm = meanLog(candidate).norm();
            if (candNorm < gradNorm || half == 29) {
                mu = candidate;
                gradNorm = candNorm;
                break;
            }
            step *= 0.5;
        }
    }
    if (gradNorm <= tol)
        return {mu, maxIter, gradNorm};
    // final residual check before giving up
    {
        SpdMatrix isq = matInvSqrt(mu);
        Matrix g = Matrix::Zero(n, n);
        for (const auto& s : set) {
            SpdMatrix whitened(SymMatrix(isq.mat() * s.mat() * isq.mat()), 1e-300);
            g += matLog(whitened).mat();
        }
        g /= static_cast<double>(set.size());
        gradNorm = g.norm();
        if (gradNorm <= tol)
            return {mu, maxIter, gradNorm};
    }
    throw FrechetMeanError(mu, gradNorm, maxIter);
}

} // namespace scm
