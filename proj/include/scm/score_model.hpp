#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "scm/data.hpp"
#include "scm/sym.hpp"

namespace scm {

/// Variance-exploding noise schedule σ(t) = σ_min (σ_max/σ_min)^t on [0,1].
struct NoiseSchedule {
    double sigmaMin = 0.01;
    double sigmaMax = 10.0;

    double sigmaAt(double t) const;
};

struct ScoreNetConfig {
    int inputDim = 0;          // vech dimension n(n+1)/2
    std::vector<int> hidden{256, 256, 256};
    int timeEmbedDim = 64;     // sinusoidal embedding of log sigma
    int bandEmbedDim = 8;      // learned band embedding, 0 disables
    int bands = 1;
    std::uint64_t initSeed = 0;
};

/// Dense score network over vectorized symmetric matrices with sinusoidal
/// log-sigma conditioning and a learned band embedding. tanh hidden layers,
/// linear output of size inputDim. The raw output is scaled by 1/sigma, so
/// the layers learn the well-conditioned quantity sigma * score.
class ScoreNetwork {
public:
    explicit ScoreNetwork(const ScoreNetConfig& cfg);

    const ScoreNetConfig& config() const { return cfg_; }

    /// Batched forward pass; x is batch x inputDim, returns batch x inputDim.
    Matrix forward(const Matrix& x, const Vector& sigma, const std::vector<int>& bands) const;
    Vector forward1(const Vector& x, double sigma, int band = 0) const;

    Eigen::Index parameterCount() const;
    Vector parameters() const;
    void setParameters(const Vector& flat);

private:
    friend class ScoreNetworkBackprop;

    Matrix inputFeatures(const Matrix& x, const Vector& sigma, const std::vector<int>& bands) const;

    ScoreNetConfig cfg_;
    std::vector<Matrix> weights_; // layer i: fanIn x fanOut
    std::vector<Vector> biases_;
    Matrix bandEmbed_;            // bands x bandEmbedDim
    Vector timeFreqs_;            // timeEmbedDim/2 geometric frequencies
};

/// Analytic conditional score of the Gaussian perturbation kernel,
/// -(noisy - clean)/sigma^2.
Vector dsmTarget(const Vector& clean, const Vector& noisy, double sigma);

struct DsmDraw {
    double t;
    Vector z;
};

struct DsmBatch {
    Matrix clean;             // batch x inputDim
    std::vector<int> bands;   // empty means band 0 throughout
};

std::vector<DsmDraw> drawDsmNoise(std::mt19937_64& rng, int batchSize, int dim,
                                  double tEps = 1e-3);

/// Weighted denoising loss (1/B) Σ σ(t)^2 ||s_θ(x̃,t) - dsmTarget||^2 on fixed
/// noise draws. The gradient version returns exact reverse-mode gradients in
/// the flat parameter layout.
double dsmLossFixed(const ScoreNetwork& net, const DsmBatch& batch,
                    const std::vector<DsmDraw>& draws, const NoiseSchedule& sched);
std::pair<double, Vector> dsmLossGrad(const ScoreNetwork& net, const DsmBatch& batch,
                                      const std::vector<DsmDraw>& draws,
                                      const NoiseSchedule& sched);
std::pair<double, Vector> dsmLoss(const ScoreNetwork& net, const DsmBatch& batch,
                                  const NoiseSchedule& sched, std::mt19937_64& rng,
                                  double tEps = 1e-3);

enum class Optimizer { sgd, adam };

struct TrainConfig {
    int iterations = 5000;
    int batchSize = 512;
    double learningRate = 2e-3;
    double lrDecayFactor = 0.05; // geometric decay towards learningRate * factor at the last iteration; 1 = constant
    std::uint64_t seed = 0;
    NoiseSchedule schedule;
    Optimizer optimizer = Optimizer::adam;
    double gradClip = 10.0;
    double tEps = 1e-3;
    int traceEvery = 100;
    std::optional<ClassTag> classFilter;
};

class TrainDivergence : public std::runtime_error {
public:
    TrainDivergence(int iteration, double sigma, double paramNorm)
        : std::runtime_error("train: non-finite loss at iteration " + std::to_string(iteration) +
                             ", sigma " + std::to_string(sigma) +
                             ", parameter norm " + std::to_string(paramNorm)),
          iteration(iteration), sigma(sigma), paramNorm(paramNorm) {}
    int iteration;
    double sigma;
    double paramNorm;
};

struct TrainResult {
    std::vector<std::pair<int, double>> lossTrace;
    int iterations = 0;
};

/// Trains in place on the vech of every dataset sample matching classFilter.
/// Deterministic given cfg.seed.
TrainResult train(ScoreNetwork& net, const ScmDataset& dataset, const TrainConfig& cfg);

struct CheckpointMeta {
    NoiseSchedule schedule;
    std::uint64_t seed = 0;
    int iteration = 0;
    std::optional<ClassTag> classTag;
};

void saveCheckpoint(const ScoreNetwork& net, const CheckpointMeta& meta,
                    const std::filesystem::path& path);
std::pair<ScoreNetwork, CheckpointMeta> loadCheckpoint(const std::filesystem::path& path);

} // namespace scm
