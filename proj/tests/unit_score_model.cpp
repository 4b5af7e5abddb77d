#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "scm/score_model.hpp"

using namespace scm;

TEST_CASE("sigmaAt endpoints and geometric midpoint") {
    NoiseSchedule sched; // 0.01 .. 10
    CHECK(sched.sigmaAt(0.0) == doctest::Approx(0.01));
    CHECK(sched.sigmaAt(1.0) == doctest::Approx(10.0));
    CHECK(sched.sigmaAt(0.5) == doctest::Approx(std::sqrt(0.1)));
    CHECK_THROWS_AS(sched.sigmaAt(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(sched.sigmaAt(1.1), std::invalid_argument);
}

TEST_CASE("sigmaAt is monotone increasing") {
    NoiseSchedule sched;
    double prev = 0.0;
    for (int i = 0; i <= 100; ++i) {
        const double s = sched.sigmaAt(i / 100.0);
        CHECK(s > prev);
        prev = s;
    }
}

TEST_CASE("dsmTarget analytic form") {
    Vector a(2), b(2);
    a << 1, 2;
    b << 1, 2;
    CHECK(dsmTarget(a, b, 0.5).norm() == 0.0);

    Vector clean = Vector::Zero(3), z(3);
    z << 0.3, -1.0, 2.0;
    const double sigma = 0.7;
    Vector noisy = clean + sigma * z;
    CHECK((dsmTarget(clean, noisy, sigma) + z / sigma).norm() <= 1e-14);

    Vector c(2), n(2);
    c << 1, 2;
    n << 2, 2;
    Vector t = dsmTarget(c, n, 1.0);
    CHECK(t[0] == doctest::Approx(-1.0));
    CHECK(t[1] == doctest::Approx(0.0));

    CHECK_THROWS_AS(dsmTarget(a, Vector::Zero(3), 1.0), std::invalid_argument);
    CHECK_THROWS_AS(dsmTarget(a, b, 0.0), std::invalid_argument);
}

namespace {

ScoreNetConfig smallNet(int inputDim, int bands = 1) {
    ScoreNetConfig cfg;
    cfg.inputDim = inputDim;
    cfg.hidden = {16, 16};
    cfg.timeEmbedDim = 8;
    cfg.bandEmbedDim = bands > 1 ? 4 : 0;
    cfg.bands = bands;
    cfg.initSeed = 12345;
    return cfg;
}

DsmBatch randomBatch(std::mt19937_64& rng, int B, int d, int bands) {
    std::normal_distribution<double> g;
    DsmBatch batch;
    batch.clean.resize(B, d);
    for (int i = 0; i < B; ++i)
        for (int j = 0; j < d; ++j) batch.clean(i, j) = g(rng);
    if (bands > 1) {
        batch.bands.resize(static_cast<std::size_t>(B));
        for (int i = 0; i < B; ++i)
            batch.bands[static_cast<std::size_t>(i)] = static_cast<int>(rng() % bands);
    }
    return batch;
}

} // namespace

TEST_CASE("forward pass shape, determinism and parameter round trip") {
    ScoreNetwork net(smallNet(6, 3));
    std::mt19937_64 rng(2);
    DsmBatch batch = randomBatch(rng, 5, 6, 3);
    Vector sigma = Vector::Constant(5, 0.5);
    Matrix out1 = net.forward(batch.clean, sigma, batch.bands);
    Matrix out2 = net.forward(batch.clean, sigma, batch.bands);
    CHECK(out1.rows() == 5);
    CHECK(out1.cols() == 6);
    CHECK((out1 - out2).norm() == 0.0);

    ScoreNetwork other(smallNet(6, 3));
    Vector p = net.parameters();
    other.setParameters(p);
    CHECK((other.forward(batch.clean, sigma, batch.bands) - out1).norm() == 0.0);
    CHECK((other.parameters() - p).norm() == 0.0);
    CHECK_THROWS_AS(other.setParameters(Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("loss equals the weighted form and the reparameterized form") {
    // (1/B) sum sigma^2 ||s - target||^2 == (1/B) sum ||sigma s + z||^2
    ScoreNetwork net(smallNet(4));
    std::mt19937_64 rng(3);
    DsmBatch batch = randomBatch(rng, 8, 4, 1);
    auto draws = drawDsmNoise(rng, 8, 4);
    NoiseSchedule sched;
    const double loss = dsmLossFixed(net, batch, draws, sched);

    double weighted = 0.0;
    for (int b = 0; b < 8; ++b) {
        const double sigma = sched.sigmaAt(draws[static_cast<std::size_t>(b)].t);
        const Vector& z = draws[static_cast<std::size_t>(b)].z;
        Vector clean = batch.clean.row(b).transpose();
        Vector noisy = clean + sigma * z;
        Vector s = net.forward1(noisy, sigma);
        weighted += sigma * sigma * (s - dsmTarget(clean, noisy, sigma)).squaredNorm();
    }
    weighted /= 8.0;
    CHECK(std::abs(loss - weighted) <= 1e-10 * std::max(1.0, weighted));
}

TEST_CASE("zero network loss has the closed form mean ||z||^2 / B") {
    ScoreNetConfig cfg = smallNet(3);
    ScoreNetwork net(cfg);
    net.setParameters(Vector::Zero(net.parameterCount())); // output identically zero
    std::mt19937_64 rng(5);
    DsmBatch batch = randomBatch(rng, 4, 3, 1);
    auto draws = drawDsmNoise(rng, 4, 3);
    double expected = 0.0;
    for (const auto& d : draws) expected += d.z.squaredNorm();
    expected /= 4.0;
    NoiseSchedule sched;
    CHECK(dsmLossFixed(net, batch, draws, sched) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    ScoreNetwork net(smallNet(4, 2)); // 2 hidden layers, band embedding active
    std::mt19937_64 rng(7);
    NoiseSchedule sched;
    for (int rep = 0; rep < 3; ++rep) {
        DsmBatch batch = randomBatch(rng, 6, 4, 2);
        auto draws = drawDsmNoise(rng, 6, 4);
        auto [loss, grad] = dsmLossGrad(net, batch, draws, sched);
        CHECK(std::isfinite(loss));

        Vector p = net.parameters();
        const double h = 1e-5;
        double maxRel = 0.0;
        for (Eigen::Index k = 0; k < p.size(); ++k) {
            Vector pp = p, pm = p;
            pp[k] += h;
            pm[k] -= h;
            net.setParameters(pp);
            const double lp = dsmLossFixed(net, batch, draws, sched);
            net.setParameters(pm);
            const double lm = dsmLossFixed(net, batch, draws, sched);
            net.setParameters(p);
            const double fd = (lp - lm) / (2.0 * h);
            const double denom = std::max({std::abs(fd), std::abs(grad[k]), 1e-6});
            maxRel = std::max(maxRel, std::abs(fd - grad[k]) / denom);
        }
        CHECK(maxRel < 1e-4);
    }
}

TEST_CASE("de-vectorized score estimates are symmetric by construction") {
    ScoreNetwork net(smallNet(6));
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    Vector x(6);
    for (int i = 0; i < 6; ++i) x[i] = g(rng);
    SymMatrix m = unvech(net.forward1(x, 0.3));
    CHECK((m.mat() - m.mat().transpose()).norm() == 0.0);
}

namespace {

ScmDataset tinyDataset(int trials = 20) {
    SynthConfig cfg;
    cfg.trialsPerClass = trials;
    cfg.bands = 2;
    cfg.channels = 3;
    return generateSyntheticDataset(cfg);
}

TrainConfig quickTrain(int iters = 50) {
    TrainConfig tc;
    tc.iterations = iters;
    tc.batchSize = 16;
    tc.seed = 13;
    return tc;
}

} // namespace

TEST_CASE("training is deterministic and per-class models differ") {
    ScmDataset data = tinyDataset();
    ScoreNetConfig nc = smallNet(6, 2);

    ScoreNetwork n1(nc), n2(nc);
    TrainConfig tc = quickTrain();
    tc.classFilter = ClassTag::left;
    train(n1, data, tc);
    train(n2, data, tc);
    CHECK((n1.parameters() - n2.parameters()).norm() == 0.0);

    ScoreNetwork n3(nc);
    tc.classFilter = ClassTag::right;
    train(n3, data, tc);
    CHECK((n1.parameters() - n3.parameters()).norm() > 0.0);
}

TEST_CASE("training reduces the loss on the synthetic dataset") {
    ScmDataset data = tinyDataset(50);
    ScoreNetConfig nc = smallNet(6, 2);
    nc.hidden = {64, 64};
    ScoreNetwork net(nc);
    TrainConfig tc = quickTrain(800);
    tc.traceEvery = 1;
    TrainResult res = train(net, data, tc);
    REQUIRE(res.lossTrace.size() >= 20u);
    const std::size_t n = res.lossTrace.size();
    auto median = [&](std::size_t lo, std::size_t hi) {
        std::vector<double> v;
        for (std::size_t i = lo; i < hi; ++i) v.push_back(res.lossTrace[i].second);
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    CHECK(median(n - n / 10, n) < median(0, n / 10));
}

TEST_CASE("train validates its inputs") {
    ScmDataset data = tinyDataset();
    ScoreNetwork net(smallNet(6, 2));
    TrainConfig tc = quickTrain();
    tc.iterations = 0;
    CHECK_THROWS_AS(train(net, data, tc), std::invalid_argument);
    ScoreNetwork wrongDim(smallNet(10, 2));
    CHECK_THROWS_AS(train(wrongDim, data, quickTrain()), std::invalid_argument);
}

TEST_CASE("checkpoint save/load round trip preserves weights and metadata") {
    ScmDataset data = tinyDataset();
    ScoreNetwork net(smallNet(6, 2));
    TrainConfig tc = quickTrain();
    tc.classFilter = ClassTag::left;
    train(net, data, tc);

    auto path = std::filesystem::temp_directory_path() / "scmgen_test_ckpt.txt";
    saveCheckpoint(net, {tc.schedule, tc.seed, tc.iterations, tc.classFilter}, path);
    auto [loaded, meta] = loadCheckpoint(path);
    CHECK((loaded.parameters() - net.parameters()).norm() == 0.0);
    CHECK(meta.schedule.sigmaMin == tc.schedule.sigmaMin);
    CHECK(meta.schedule.sigmaMax == tc.schedule.sigmaMax);
    CHECK(meta.seed == tc.seed);
    CHECK(meta.iteration == tc.iterations);
    REQUIRE(meta.classTag.has_value());
    CHECK((*meta.classTag == ClassTag::left));
    std::filesystem::remove(path);
}
