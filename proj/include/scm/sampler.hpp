#pragma once

#include <functional>
#include <random>
#include <vector>

#include "scm/data.hpp"
#include "scm/score_model.hpp"
#include "scm/sym.hpp"

namespace scm {

/// Batched score callback: states are rows of x, all at noise level sigma and
/// the given band. Lets the samplers run against either a trained network or
/// an analytic score.
using ScoreFn = std::function<Matrix(const Matrix& x, double sigma, int band)>;

ScoreFn scoreFnFromNetwork(const ScoreNetwork& net);

enum class SamplerMethod { langevin, reverseSde };

struct SamplerConfig {
    SamplerMethod method = SamplerMethod::reverseSde;
    NoiseSchedule schedule;

    // annealed Langevin ladder
    int langevinLevels = 15;
    int langevinStepsPerLevel = 150;
    double langevinStepSize = 3e-5; // step at the final (smallest) level

    // reverse-time SDE integration
    int sdeSteps = 1000;
    double tEps = 1e-3;

    double projectionEps = 1e-4;
    std::uint64_t seed = 0;
};

class SamplerDivergence : public std::runtime_error {
public:
    SamplerDivergence(const std::string& where)
        : std::runtime_error("sampler: non-finite state at " + where) {}
};

/// One Langevin update x + (ε/2)·score + √ε·z.
Vector langevinStep(const Vector& x, const Vector& score, double stepSize, const Vector& z);

/// One Euler-Maruyama reverse-SDE update x - g(t)^2·score·dt + g·√|dt|·z
/// with dt < 0.
Vector reverseSdeStep(const Vector& x, double g, double dt, const Vector& score,
                      const Vector& z);

/// VE diffusion coefficient g(t) = σ(t)·√(2 ln(σ_max/σ_min)); makes the
/// forward marginal variance track σ(t)^2.
double veDiffusionCoeff(const NoiseSchedule& sched, double t);

/// Low-level batched chain runners over state vectors of length stateDim;
/// each returned row is one chain's final state. Chain c draws from its own
/// stream derived from cfg.seed and the chain index (splitmix64 of
/// seed ^ golden-ratio multiple of c+1).
Matrix runLangevin(const ScoreFn& score, const SamplerConfig& cfg, int count, int stateDim,
                   int band = 0);
Matrix runReverseSde(const ScoreFn& score, const SamplerConfig& cfg, int count, int stateDim,
                     int band = 0);

/// Annealed Langevin chains over vech states: geometric σ ladder from σ_max
/// to σ_min with per-level step ε_i = ε_L (σ_i/σ_L)^2, initialized at
/// N(0, σ_max² I). Results are de-vectorized to symmetric matrices.
std::vector<SymMatrix> sampleLangevin(const ScoreFn& score, const SamplerConfig& cfg,
                                      int count, int matrixDim, int band = 0);

/// Reverse-time VE SDE, Euler-Maruyama with uniform steps on [1, tEps].
std::vector<SymMatrix> sampleReverseSde(const ScoreFn& score, const SamplerConfig& cfg,
                                        int count, int matrixDim, int band = 0);

/// Runs the configured sampler and projects each output onto the SPD cone
/// with cfg.projectionEps; stamps provenance = generated.
std::vector<ScmSample> generate(const ScoreFn& score, const SamplerConfig& cfg, int count,
                                int matrixDim, ClassTag classTag, int band);
std::vector<ScmSample> generate(const ScoreNetwork& net, const SamplerConfig& cfg, int count,
                                ClassTag classTag, int band);

} // namespace scm
