#include "scm/sampler.hpp"

#include <cmath>

#include "scm/spd_core.hpp"

namespace scm {

ScoreFn scoreFnFromNetwork(const ScoreNetwork& net) {
    return [&net](const Matrix& x, double sigma, int band) {
        Vector s = Vector::Constant(x.rows(), sigma);
        std::vector<int> bands(static_cast<std::size_t>(x.rows()), band);
        return net.forward(x, s, bands);
    };
}

Vector langevinStep(const Vector& x, const Vector& score, double stepSize, const Vector& z) {
    if (stepSize <= 0.0)
        throw std::invalid_argument("langevinStep: stepSize must be positive");
    return x + 0.5 * stepSize * score + std::sqrt(stepSize) * z;
}

Vector reverseSdeStep(const Vector& x, double g, double dt, const Vector& score,
                      const Vector& z) {
    if (dt >= 0.0)
        throw std::invalid_argument("reverseSdeStep: dt must be negative (reverse time)");
    return x + (-g * g * dt) * score + g * std::sqrt(-dt) * z;
}

double veDiffusionCoeff(const NoiseSchedule& sched, double t) {
    return sched.sigmaAt(t) * std::sqrt(2.0 * std::log(sched.sigmaMax / sched.sigmaMin));
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

// one RNG stream per chain; derivation rule is part of the determinism contract
std::vector<std::mt19937_64> chainRngs(std::uint64_t seed, int count) {
    std::vector<std::mt19937_64> rngs;
    rngs.reserve(static_cast<std::size_t>(count));
    for (int c = 0; c < count; ++c)
        rngs.emplace_back(splitmix64(seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(c) + 1))));
    return rngs;
}

Matrix gaussianRows(std::vector<std::mt19937_64>& rngs, std::vector<std::normal_distribution<double>>& gauss,
                    Eigen::Index dim) {
    Matrix z(static_cast<Eigen::Index>(rngs.size()), dim);
    for (std::size_t c = 0; c < rngs.size(); ++c)
        for (Eigen::Index k = 0; k < dim; ++k)
            z(static_cast<Eigen::Index>(c), k) = gauss[c](rngs[c]);
    return z;
}

void checkFinite(const Matrix& x, const std::string& where) {
    if (!x.allFinite())
        throw SamplerDivergence(where);
}

std::vector<SymMatrix> devectorize(const Matrix& states) {
    std::vector<SymMatrix> out;
    out.reserve(static_cast<std::size_t>(states.rows()));
    for (Eigen::Index r = 0; r < states.rows(); ++r)
        out.push_back(unvech(states.row(r).transpose()));
    return out;
}

} // namespace

Matrix runLangevin(const ScoreFn& score, const SamplerConfig& cfg, int count, int stateDim,
                   int band) {
    if (count < 0 || stateDim < 1)
        throw std::invalid_argument("runLangevin: invalid count/stateDim");
    if (cfg.langevinLevels < 1 || cfg.langevinStepsPerLevel < 1 || cfg.langevinStepSize <= 0.0)
        throw std::invalid_argument("runLangevin: invalid ladder config");
    if (count == 0) return Matrix(0, stateDim);

    auto rngs = chainRngs(cfg.seed, count);
    std::vector<std::normal_distribution<double>> gauss(rngs.size(),
                                                        std::normal_distribution<double>(0.0, 1.0));

    Matrix x = cfg.schedule.sigmaMax * gaussianRows(rngs, gauss, stateDim);

    const int L = cfg.langevinLevels;
    Vector sigmas(L);
    for (int i = 0; i < L; ++i) {
        const double frac = L == 1 ? 1.0 : static_cast<double>(i) / (L - 1);
        sigmas[i] = cfg.schedule.sigmaMax *
                    std::pow(cfg.schedule.sigmaMin / cfg.schedule.sigmaMax, frac);
    }
    const double sigmaLast = sigmas[L - 1];

    for (int i = 0; i < L; ++i) {
        const double eps = cfg.langevinStepSize * (sigmas[i] / sigmaLast) * (sigmas[i] / sigmaLast);
        for (int step = 0; step < cfg.langevinStepsPerLevel; ++step) {
            Matrix s = score(x, sigmas[i], band);
            Matrix z = gaussianRows(rngs, gauss, stateDim);
            x += 0.5 * eps * s + std::sqrt(eps) * z;
            checkFinite(x, "langevin level " + std::to_string(i) + " step " + std::to_string(step));
        }
    }
    return x;
}

Matrix runReverseSde(const ScoreFn& score, const SamplerConfig& cfg, int count, int stateDim,
                     int band) {
    if (count < 0 || stateDim < 1)
        throw std::invalid_argument("runReverseSde: invalid count/stateDim");
    if (cfg.sdeSteps < 1 || cfg.tEps <= 0.0 || cfg.tEps >= 1.0)
        throw std::invalid_argument("runReverseSde: invalid integration config");
    if (count == 0) return Matrix(0, stateDim);

    auto rngs = chainRngs(cfg.seed, count);
    std::vector<std::normal_distribution<double>> gauss(rngs.size(),
                                                        std::normal_distribution<double>(0.0, 1.0));

    Matrix x = cfg.schedule.sigmaMax * gaussianRows(rngs, gauss, stateDim);

    const int N = cfg.sdeSteps;
    const double dt = (cfg.tEps - 1.0) / N; // negative
    for (int k = 0; k < N; ++k) {
        const double t = 1.0 + k * dt;
        const double sigma = cfg.schedule.sigmaAt(t);
        const double g = veDiffusionCoeff(cfg.schedule, t);
        Matrix s = score(x, sigma, band);
        Matrix z = gaussianRows(rngs, gauss, stateDim);
        x += (-g * g * dt) * s + g * std::sqrt(-dt) * z;
        checkFinite(x, "reverse-sde step " + std::to_string(k) + " (t=" + std::to_string(t) + ")");
    }
    return x;
}

std::vector<SymMatrix> sampleLangevin(const ScoreFn& score, const SamplerConfig& cfg, int count,
                                      int matrixDim, int band) {
    return devectorize(runLangevin(score, cfg, count, static_cast<int>(vechDim(matrixDim)), band));
}

std::vector<SymMatrix> sampleReverseSde(const ScoreFn& score, const SamplerConfig& cfg, int count,
                                        int matrixDim, int band) {
    return devectorize(runReverseSde(score, cfg, count, static_cast<int>(vechDim(matrixDim)), band));
}

std::vector<ScmSample> generate(const ScoreFn& score, const SamplerConfig& cfg, int count,
                                int matrixDim, ClassTag classTag, int band) {
    std::vector<SymMatrix> raw =
        cfg.method == SamplerMethod::langevin
            ? sampleLangevin(score, cfg, count, matrixDim, band)
            : sampleReverseSde(score, cfg, count, matrixDim, band);
    std::vector<ScmSample> out;
    out.reserve(raw.size());
    for (const auto& m : raw) {
        SpdMatrix projected = projectToSpd(m, cfg.projectionEps);
        out.push_back({projected.sym(), classTag, band, Provenance::generated});
    }
    return out;
}

std::vector<ScmSample> generate(const ScoreNetwork& net, const SamplerConfig& cfg, int count,
                                ClassTag classTag, int band) {
    const int matrixDim = static_cast<int>(vechMatrixDim(net.config().inputDim));
    if (matrixDim < 1)
        throw std::invalid_argument("generate: network inputDim is not a vech length");
    return generate(scoreFnFromNetwork(net), cfg, count, matrixDim, classTag, band);
}

} // namespace scm
