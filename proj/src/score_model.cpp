#include "scm/score_model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace scm {

using nlohmann::json;

double NoiseSchedule::sigmaAt(double t) const {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("sigmaAt: t must lie in [0,1]");
    return sigmaMin * std::pow(sigmaMax / sigmaMin, t);
}

namespace {

Vector makeTimeFreqs(int timeEmbedDim) {
    if (timeEmbedDim % 2 != 0 || timeEmbedDim < 2)
        throw std::invalid_argument("ScoreNetwork: timeEmbedDim must be even and >= 2");
    const int half = timeEmbedDim / 2;
    Vector f(half);
    for (int k = 0; k < half; ++k)
        f[k] = std::exp(std::log(100.0) * (half == 1 ? 0.0 : static_cast<double>(k) / (half - 1)));
    return f;
}

} // namespace

ScoreNetwork::ScoreNetwork(const ScoreNetConfig& cfg) : cfg_(cfg) {
    if (cfg_.inputDim < 1 || cfg_.bands < 1 || cfg_.bandEmbedDim < 0)
        throw std::invalid_argument("ScoreNetwork: invalid config");
    timeFreqs_ = makeTimeFreqs(cfg_.timeEmbedDim);

    std::vector<int> sizes;
    sizes.push_back(cfg_.inputDim + cfg_.timeEmbedDim + cfg_.bandEmbedDim);
    for (int h : cfg_.hidden) sizes.push_back(h);
    sizes.push_back(cfg_.inputDim);

    std::mt19937_64 rng(cfg_.initSeed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
        const int fanIn = sizes[i], fanOut = sizes[i + 1];
        Matrix w(fanIn, fanOut);
        const double scale = std::sqrt(2.0 / fanIn);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                w(r, c) = scale * gauss(rng);
        weights_.push_back(std::move(w));
        biases_.push_back(Vector::Zero(fanOut));
    }
    bandEmbed_.resize(cfg_.bands, cfg_.bandEmbedDim);
    for (Eigen::Index r = 0; r < bandEmbed_.rows(); ++r)
        for (Eigen::Index c = 0; c < bandEmbed_.cols(); ++c)
            bandEmbed_(r, c) = 0.1 * gauss(rng);
}

Matrix ScoreNetwork::inputFeatures(const Matrix& x, const Vector& sigma,
                                   const std::vector<int>& bands) const {
    const Eigen::Index batch = x.rows();
    if (x.cols() != cfg_.inputDim)
        throw std::invalid_argument("ScoreNetwork::forward: input dim mismatch");
    if (sigma.size() != batch)
        throw std::invalid_argument("ScoreNetwork::forward: sigma size mismatch");
    Matrix h(batch, cfg_.inputDim + cfg_.timeEmbedDim + cfg_.bandEmbedDim);
    h.leftCols(cfg_.inputDim) = x;
    const int half = cfg_.timeEmbedDim / 2;
    for (Eigen::Index b = 0; b < batch; ++b) {
        const double ls = std::log(sigma[b]);
        for (int k = 0; k < half; ++k) {
            h(b, cfg_.inputDim + 2 * k) = std::sin(timeFreqs_[k] * ls);
            h(b, cfg_.inputDim + 2 * k + 1) = std::cos(timeFreqs_[k] * ls);
        }
        int band = 0;
        if (!bands.empty()) {
            if (static_cast<Eigen::Index>(bands.size()) != batch)
                throw std::invalid_argument("ScoreNetwork::forward: bands size mismatch");
            band = bands[static_cast<std::size_t>(b)];
        }
        if (band < 0 || band >= cfg_.bands)
            throw std::invalid_argument("ScoreNetwork::forward: band index out of range");
        if (cfg_.bandEmbedDim > 0)
            h.block(b, cfg_.inputDim + cfg_.timeEmbedDim, 1, cfg_.bandEmbedDim) =
                bandEmbed_.row(band);
    }
    return h;
}

Matrix ScoreNetwork::forward(const Matrix& x, const Vector& sigma,
                             const std::vector<int>& bands) const {
    Matrix h = inputFeatures(x, sigma, bands);
    const std::size_t m = weights_.size();
    for (std::size_t i = 0; i + 1 < m; ++i)
        h = ((h * weights_[i]).rowwise() + biases_[i].transpose()).array().tanh();
    Matrix raw = (h * weights_[m - 1]).rowwise() + biases_[m - 1].transpose();
    // noise-scaled head: the network predicts u = sigma * score, so the score
    // estimate keeps the 1/sigma growth of the true perturbed score built in
    return raw.array().colwise() / sigma.array();
}

Vector ScoreNetwork::forward1(const Vector& x, double sigma, int band) const {
    Matrix xb = x.transpose();
    Vector sb = Vector::Constant(1, sigma);
    return forward(xb, sb, {band}).row(0);
}

Eigen::Index ScoreNetwork::parameterCount() const {
    Eigen::Index n = 0;
    for (const auto& w : weights_) n += w.size();
    for (const auto& b : biases_) n += b.size();
    n += bandEmbed_.size();
    return n;
}

Vector ScoreNetwork::parameters() const {
    Vector flat(parameterCount());
    Eigen::Index off = 0;
    for (const auto& w : weights_) {
        flat.segment(off, w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
        off += w.size();
    }
    for (const auto& b : biases_) {
        flat.segment(off, b.size()) = b;
        off += b.size();
    }
    flat.segment(off, bandEmbed_.size()) =
        Eigen::Map<const Vector>(bandEmbed_.data(), bandEmbed_.size());
    return flat;
}

void ScoreNetwork::setParameters(const Vector& flat) {
    if (flat.size() != parameterCount())
        throw std::invalid_argument("setParameters: size mismatch");
    if (!flat.allFinite())
        throw std::invalid_argument("setParameters: non-finite parameters");
    Eigen::Index off = 0;
    for (auto& w : weights_) {
        Eigen::Map<Vector>(w.data(), w.size()) = flat.segment(off, w.size());
        off += w.size();
    }
    for (auto& b : biases_) {
        b = flat.segment(off, b.size());
        off += b.size();
    }
    Eigen::Map<Vector>(bandEmbed_.data(), bandEmbed_.size()) =
        flat.segment(off, bandEmbed_.size());
}

Vector dsmTarget(const Vector& clean, const Vector& noisy, double sigma) {
    if (clean.size() != noisy.size())
        throw std::invalid_argument("dsmTarget: dimension mismatch");
    if (sigma <= 0.0)
        throw std::invalid_argument("dsmTarget: sigma must be positive");
    return -(noisy - clean) / (sigma * sigma);
}

std::vector<DsmDraw> drawDsmNoise(std::mt19937_64& rng, int batchSize, int dim, double tEps) {
    std::uniform_real_distribution<double> uni(tEps, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<DsmDraw> draws;
    draws.reserve(static_cast<std::size_t>(batchSize));
    for (int b = 0; b < batchSize; ++b) {
        DsmDraw d;
        d.t = uni(rng);
        d.z.resize(dim);
        for (int k = 0; k < dim; ++k) d.z[k] = gauss(rng);
        draws.push_back(std::move(d));
    }
    return draws;
}

/// Shares the network internals with the loss/gradient routines.
class ScoreNetworkBackprop {
public:
    static std::pair<double, Vector> lossGrad(const ScoreNetwork& net, const DsmBatch& batch,
                                              const std::vector<DsmDraw>& draws,
                                              const NoiseSchedule& sched, bool wantGrad);
};

std::pair<double, Vector> ScoreNetworkBackprop::lossGrad(const ScoreNetwork& net,
                                                         const DsmBatch& batch,
                                                         const std::vector<DsmDraw>& draws,
                                                         const NoiseSchedule& sched,
                                                         bool wantGrad) {
    const Eigen::Index B = batch.clean.rows();
    const Eigen::Index d = batch.clean.cols();
    if (B < 1)
        throw std::invalid_argument("dsmLoss: empty batch");
    if (static_cast<Eigen::Index>(draws.size()) != B)
        throw std::invalid_argument("dsmLoss: draw count mismatch");
    if (d != net.cfg_.inputDim)
        throw std::invalid_argument("dsmLoss: input dim mismatch");

    Vector sigma(B);
    Matrix noisy(B, d), z(B, d);
    for (Eigen::Index b = 0; b < B; ++b) {
        sigma[b] = sched.sigmaAt(draws[static_cast<std::size_t>(b)].t);
        z.row(b) = draws[static_cast<std::size_t>(b)].z;
        noisy.row(b) = batch.clean.row(b) + sigma[b] * z.row(b);
    }

    // forward with retained activations
    const std::size_t m = net.weights_.size();
    std::vector<Matrix> acts(m);
    acts[0] = net.inputFeatures(noisy, sigma, batch.bands);
    for (std::size_t i = 0; i + 1 < m; ++i)
        acts[i + 1] =
            ((acts[i] * net.weights_[i]).rowwise() + net.biases_[i].transpose()).array().tanh();
    Matrix out = (acts[m - 1] * net.weights_[m - 1]).rowwise() + net.biases_[m - 1].transpose();

    // loss = (1/B) Σ_b σ_b^2 ||score_b - target_b||^2 with target = -z/σ.
    // The head outputs u = σ·score, so the residual σ·score + z is just
    // out + z and the gradient w.r.t. the raw output carries no σ factor.
    double loss = 0.0;
    Matrix g(B, d); // dLoss/dout
    for (Eigen::Index b = 0; b < B; ++b) {
        Vector r = out.row(b).transpose() + z.row(b).transpose();
        loss += r.squaredNorm();
        g.row(b) = (2.0 / static_cast<double>(B)) * r.transpose();
    }
    loss /= static_cast<double>(B);

    if (!wantGrad)
        return {loss, Vector()};

    std::vector<Matrix> gw(m);
    std::vector<Vector> gb(m);
    for (std::size_t i = m; i-- > 0;) {
        gw[i] = acts[i].transpose() * g;
        gb[i] = g.colwise().sum().transpose();
        Matrix gPrev = g * net.weights_[i].transpose();
        if (i > 0)
            g = gPrev.array() * (1.0 - acts[i].array().square());
        else
            g = std::move(gPrev); // gradient w.r.t. the input features
    }

    Matrix gEmb = Matrix::Zero(net.bandEmbed_.rows(), net.bandEmbed_.cols());
    if (net.cfg_.bandEmbedDim > 0) {
        const Eigen::Index off = net.cfg_.inputDim + net.cfg_.timeEmbedDim;
        for (Eigen::Index b = 0; b < B; ++b) {
            const int band = batch.bands.empty() ? 0 : batch.bands[static_cast<std::size_t>(b)];
            gEmb.row(band) += g.block(b, off, 1, net.cfg_.bandEmbedDim);
        }
    }

    Vector flat(net.parameterCount());
    Eigen::Index off = 0;
    for (const auto& w : gw) {
        flat.segment(off, w.size()) = Eigen::Map<const Vector>(w.data(), w.size());
        off += w.size();
    }
    for (const auto& b : gb) {
        flat.segment(off, b.size()) = b;
        off += b.size();
    }
    flat.segment(off, gEmb.size()) = Eigen::Map<const Vector>(gEmb.data(), gEmb.size());
    return {loss, std::move(flat)};
}

double dsmLossFixed(const ScoreNetwork& net, const DsmBatch& batch,
                    const std::vector<DsmDraw>& draws, const NoiseSchedule& sched) {
    return ScoreNetworkBackprop::lossGrad(net, batch, draws, sched, false).first;
}

std::pair<double, Vector> dsmLossGrad(const ScoreNetwork& net, const DsmBatch& batch,
                                      const std::vector<DsmDraw>& draws,
                                      const NoiseSchedule& sched) {
    return ScoreNetworkBackprop::lossGrad(net, batch, draws, sched, true);
}

std::pair<double, Vector> dsmLoss(const ScoreNetwork& net, const DsmBatch& batch,
                                  const NoiseSchedule& sched, std::mt19937_64& rng, double tEps) {
    auto draws = drawDsmNoise(rng, static_cast<int>(batch.clean.rows()),
                              static_cast<int>(batch.clean.cols()), tEps);
    return dsmLossGrad(net, batch, draws, sched);
}

TrainResult train(ScoreNetwork& net, const ScmDataset& dataset, const TrainConfig& cfg) {
    if (cfg.iterations < 1 || cfg.batchSize < 1 || cfg.learningRate <= 0.0)
        throw std::invalid_argument("train: invalid config");

    std::vector<Vector> vectors;
    std::vector<int> bands;
    for (const auto& s : dataset.samples) {
        if (cfg.classFilter && s.label != *cfg.classFilter) continue;
        vectors.push_back(vech(s.matrix));
        bands.push_back(s.band);
    }
    if (vectors.empty())
        throw std::invalid_argument("train: no samples after class filter");
    const Eigen::Index d = vectors.front().size();
    if (d != net.config().inputDim)
        throw std::invalid_argument("train: dataset dim does not match network inputDim");

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<std::size_t> pick(0, vectors.size() - 1);

    Vector params = net.parameters();
    Vector adamM = Vector::Zero(params.size());
    Vector adamV = Vector::Zero(params.size());
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

    TrainResult result;
    for (int it = 1; it <= cfg.iterations; ++it) {
        DsmBatch batch;
        batch.clean.resize(cfg.batchSize, d);
        batch.bands.resize(static_cast<std::size_t>(cfg.batchSize));
        for (int b = 0; b < cfg.batchSize; ++b) {
            const std::size_t idx = pick(rng);
            batch.clean.row(b) = vectors[idx];
            batch.bands[static_cast<std::size_t>(b)] = bands[idx];
        }
        auto draws = drawDsmNoise(rng, cfg.batchSize, static_cast<int>(d), cfg.tEps);
        auto [loss, grad] = dsmLossGrad(net, batch, draws, cfg.schedule);
        if (!std::isfinite(loss))
            throw TrainDivergence(it, cfg.schedule.sigmaAt(draws.front().t), params.norm());

        const double gn = grad.norm();
        if (cfg.gradClip > 0.0 && gn > cfg.gradClip)
            grad *= cfg.gradClip / gn;

        const double lr = cfg.learningRate *
                          std::pow(cfg.lrDecayFactor,
                                   static_cast<double>(it) / static_cast<double>(cfg.iterations));
        if (cfg.optimizer == Optimizer::sgd) {
            params -= lr * grad;
        } else {
            adamM = kBeta1 * adamM + (1.0 - kBeta1) * grad;
            adamV = kBeta2 * adamV + (1.0 - kBeta2) * grad.cwiseProduct(grad);
            const double c1 = 1.0 - std::pow(kBeta1, it);
            const double c2 = 1.0 - std::pow(kBeta2, it);
            params -= lr * (adamM / c1).cwiseQuotient(((adamV / c2).cwiseSqrt().array() + kAdamEps).matrix());
        }
        net.setParameters(params);

        if (it == 1 || it % cfg.traceEvery == 0 || it == cfg.iterations)
            result.lossTrace.emplace_back(it, loss);
    }
    result.iterations = cfg.iterations;
    return result;
}

void saveCheckpoint(const ScoreNetwork& net, const CheckpointMeta& meta,
                    const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("saveCheckpoint: cannot open " + path.string());
    const ScoreNetConfig& c = net.config();
    json header = {{"version", 1},
                   {"inputDim", c.inputDim},
                   {"hidden", c.hidden},
                   {"timeEmbedDim", c.timeEmbedDim},
                   {"bandEmbedDim", c.bandEmbedDim},
                   {"bands", c.bands},
                   {"initSeed", c.initSeed},
                   {"sigmaMin", meta.schedule.sigmaMin},
                   {"sigmaMax", meta.schedule.sigmaMax},
                   {"seed", meta.seed},
                   {"iteration", meta.iteration}};
    if (meta.classTag) header["class"] = toString(*meta.classTag);
    out << header.dump() << "\n";
    Vector p = net.parameters();
    for (Eigen::Index i = 0; i < p.size(); ++i)
        out << formatDouble(p[i]) << "\n";
    if (!out)
        throw std::runtime_error("saveCheckpoint: write failure on " + path.string());
}

std::pair<ScoreNetwork, CheckpointMeta> loadCheckpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("loadCheckpoint: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("loadCheckpoint: empty file " + path.string());
    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object())
        throw std::runtime_error("loadCheckpoint: malformed header in " + path.string());
    if (header.value("version", 0) != 1)
        throw std::runtime_error("loadCheckpoint: unsupported checkpoint version in " + path.string());

    ScoreNetConfig cfg;
    CheckpointMeta meta;
    try {
        cfg.inputDim = header.at("inputDim").get<int>();
        cfg.hidden = header.at("hidden").get<std::vector<int>>();
        cfg.timeEmbedDim = header.at("timeEmbedDim").get<int>();
        cfg.bandEmbedDim = header.at("bandEmbedDim").get<int>();
        cfg.bands = header.at("bands").get<int>();
        cfg.initSeed = header.at("initSeed").get<std::uint64_t>();
        meta.schedule.sigmaMin = header.at("sigmaMin").get<double>();
        meta.schedule.sigmaMax = header.at("sigmaMax").get<double>();
        meta.seed = header.at("seed").get<std::uint64_t>();
        meta.iteration = header.at("iteration").get<int>();
        if (header.contains("class"))
            meta.classTag = classTagFromString(header["class"].get<std::string>());
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("loadCheckpoint: bad header: ") + e.what());
    }

    ScoreNetwork net(cfg);
    Vector p(net.parameterCount());
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (!std::getline(in, line))
            throw std::runtime_error("loadCheckpoint: truncated parameter block in " + path.string());
        std::size_t pos = 0;
        p[i] = std::stod(line, &pos);
    }
    net.setParameters(p);
    return {std::move(net), meta};
}

} // namespace scm
