// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Heavier end-to-end runs live here rather than in the unit tests.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include <json.hpp>

#include "scm/eval.hpp"
#include "scm/pipeline.hpp"
#include "scm/sampler.hpp"
#include "scm/spd_core.hpp"

using namespace scm;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("Criterion %d: %s — %s\n", criterion, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix randomSymMatrix(std::mt19937_64& rng, int n, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix x(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) x(i, j) = g(rng);
    return 0.5 * (x + x.transpose());
}

SpdMatrix randomSpdMatrix(std::mt19937_64& rng, int n, double shift = 0.3) {
    std::normal_distribution<double> g;
    Matrix x(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) x(i, j) = g(rng);
    return projectToSpd(Matrix(x * x.transpose() + shift * Matrix::Identity(n, n)), 1e-10);
}

// ---------------------------------------------------------------- criterion 1
void criterion1() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(101);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> scaleDraw(0.1, 3.0);
    double worstSlack = -1e300;
    for (int rep = 0; rep < 100; ++rep) {
        Matrix s = randomSymMatrix(rng, 5);
        SpdMatrix proj = projectToSpd(s, 1e-12);
        const double dProj = (s - proj.mat()).norm();
        for (int c = 0; c < 1000; ++c) {
            const int rank = 1 + static_cast<int>(rng() % 5);
            Matrix a(5, rank);
            for (int i = 0; i < 5; ++i)
                for (int j = 0; j < rank; ++j) a(i, j) = g(rng);
            Matrix p = scaleDraw(rng) * a * a.transpose();
            worstSlack = std::max(worstSlack, dProj - (s - p).norm());
        }
    }
    const double el = seconds(t0);
    report(1, worstSlack <= 1e-10 && el < 10.0,
           "projection optimality, worst slack " + std::to_string(worstSlack) + ", " +
               std::to_string(el) + " s");
}

// ---------------------------------------------------------------- criterion 2
void criterion2() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(202);
    std::normal_distribution<double> g;
    bool ok = true;
    std::string why = "metric axioms + affine invariance on 500 triples";
    for (int rep = 0; rep < 500 && ok; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 9);
        SpdMatrix s1 = randomSpdMatrix(rng, n);
        SpdMatrix s2 = randomSpdMatrix(rng, n);
        SpdMatrix s3 = randomSpdMatrix(rng, n);
        const double d12 = airmDistance(s1, s2);
        const double d13 = airmDistance(s1, s3);
        const double d23 = airmDistance(s2, s3);
        if (d12 < 0.0 || airmDistance(s1, s1) > 1e-9) { ok = false; why = "nonnegativity/identity"; }
        if (std::abs(d12 - airmDistance(s2, s1)) > 1e-10 * std::max(1.0, d12)) {
            ok = false;
            why = "symmetry";
        }
        if (d13 > d12 + d23 + 1e-9) { ok = false; why = "triangle inequality"; }

        Matrix a(n, n);
        do {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) a(i, j) = g(rng);
        } while (std::abs(a.determinant()) < 1e-3);
        SpdMatrix t1 = projectToSpd(Matrix(a.transpose() * s1.mat() * a), 1e-12);
        SpdMatrix t2 = projectToSpd(Matrix(a.transpose() * s2.mat() * a), 1e-12);
        if (std::abs(airmDistance(t1, t2) - d12) > 1e-7 * std::max(1.0, d12)) {
            ok = false;
            why = "affine invariance";
        }
    }
    const double el = seconds(t0);
    report(2, ok && el < 30.0, why + ", " + std::to_string(el) + " s");
}

// ---------------------------------------------------------------- criterion 3
void criterion3() {
    auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(303);
    bool ok = true;
    double worstGrad = 0.0, worstMid = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
        const int n = 2 + static_cast<int>(rng() % 7);
        std::vector<SpdMatrix> set;
        for (int k = 0; k < 10; ++k) set.push_back(randomSpdMatrix(rng, n));
        auto res = frechetMean(set);
        worstGrad = std::max(worstGrad, res.gradNorm);
        if (res.gradNorm > 1e-9) ok = false;

        auto two = frechetMean({set[0], set[1]});
        SpdMatrix h = matSqrt(set[0]);
        Matrix mid =
            h.mat() *
            matSqrt(projectToSpd(
                        Matrix(matInvSqrt(set[0]).mat() * set[1].mat() * matInvSqrt(set[0]).mat()),
                        1e-14))
                .mat() *
            h.mat();
        const double rel = (two.mean.mat() - mid).norm() / mid.norm();
        worstMid = std::max(worstMid, rel);
        if (rel > 1e-8) ok = false;
    }
    const double el = seconds(t0);
    report(3, ok && el < 60.0,
           "Karcher gradient ≤ " + std::to_string(worstGrad) + ", midpoint rel err ≤ " +
               std::to_string(worstMid) + ", " + std::to_string(el) + " s");
}

// ---------------------------------------------------------------- criterion 4
void criterion4() {
    auto t0 = std::chrono::steady_clock::now();
    ScoreNetConfig cfg;
    cfg.inputDim = 4;
    cfg.hidden = {12, 12};
    cfg.timeEmbedDim = 8;
    cfg.bandEmbedDim = 3;
    cfg.bands = 2;
    cfg.initSeed = 404;
    ScoreNetwork net(cfg);
    NoiseSchedule sched;

    std::mt19937_64 rng(404);
    std::normal_distribution<double> g;
    double maxRel = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
        DsmBatch batch;
        batch.clean.resize(5, 4);
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 4; ++j) batch.clean(i, j) = g(rng);
        batch.bands = {0, 1, 0, 1, 0};
        auto draws = drawDsmNoise(rng, 5, 4);
        auto [loss, grad] = dsmLossGrad(net, batch, draws, sched);
        (void)loss;
        Vector p = net.parameters();
        const double h = 1e-5;
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
    }
    const double el = seconds(t0);
    report(4, maxRel < 1e-4 && el < 30.0,
           "max relative gradient error " + std::to_string(maxRel) + ", " + std::to_string(el) +
               " s");
}

// ---------------------------------------------------------------- criterion 5
struct Criterion5Artifacts {
    Matrix langevin;
    Matrix reverseSde;
};

Criterion5Artifacts runCriterion5Samplers() {
    // exact score of a zero-mean Gaussian with a fixed well-conditioned
    // covariance on a 6-dim state
    const int d = 6;
    Matrix cov = Matrix::Identity(d, d);
    for (int i = 0; i < d; ++i) cov(i, i) = 0.6 + 0.15 * i;
    cov(0, 1) = cov(1, 0) = 0.2;
    cov(2, 3) = cov(3, 2) = -0.15;
    ScoreFn score = [cov, d](const Matrix& x, double sigma, int) {
        Matrix prec = (cov + sigma * sigma * Matrix::Identity(d, d)).inverse();
        return Matrix(-(x * prec));
    };
    SamplerConfig cfg;
    cfg.seed = 505;
    Criterion5Artifacts a;
    a.langevin = runLangevin(score, cfg, 5000, d);
    a.reverseSde = runReverseSde(score, cfg, 5000, d);
    return a;
}

void criterion5(Criterion5Artifacts& out) {
    auto t0 = std::chrono::steady_clock::now();
    const int d = 6;
    Matrix cov = Matrix::Identity(d, d);
    for (int i = 0; i < d; ++i) cov(i, i) = 0.6 + 0.15 * i;
    cov(0, 1) = cov(1, 0) = 0.2;
    cov(2, 3) = cov(3, 2) = -0.15;

    out = runCriterion5Samplers();
    auto relErr = [&](const Matrix& states) {
        Matrix sample = states.transpose() * states / static_cast<double>(states.rows());
        return (sample - cov).norm() / cov.norm();
    };
    const double eL = relErr(out.langevin);
    const double eS = relErr(out.reverseSde);
    const double el = seconds(t0);
    report(5, eL < 0.10 && eS < 0.10 && el < 120.0,
           "analytic-score recovery: langevin rel err " + std::to_string(eL) +
               ", reverse-SDE rel err " + std::to_string(eS) + ", " + std::to_string(el) + " s");
}

// ---------------------------------------------------------------- criterion 6
struct GaussianTask {
    Matrix cov;
    Matrix cholesky;
};

GaussianTask makeGaussianTask() {
    // fixed mildly anisotropic covariance, eigenvalues (1.5, 1.0, 0.7)
    const int d = 3;
    Matrix q(d, d);
    q << 2, 1, 0, 0, 1, 1, 1, 0, 2; // made orthonormal below
    Eigen::HouseholderQR<Matrix> qr(q);
    Matrix orth = qr.householderQ();
    Vector lam(d);
    lam << 1.5, 1.0, 0.7;
    GaussianTask task;
    task.cov = orth * lam.asDiagonal() * orth.transpose();
    task.cholesky = Eigen::LLT<Matrix>(task.cov).matrixL();
    return task;
}

ScoreNetwork trainCriterion6Network(const GaussianTask& task) {
    const int d = 3;
    std::mt19937_64 rng(606);
    std::normal_distribution<double> g;
    ScmDataset data;
    data.channelCount = 2; // vech dim 3 pairs with the 3-dim state
    data.bandCount = 1;
    data.channelNames = {"a", "b"};
    for (int i = 0; i < 2000; ++i) {
        Vector z(d);
        for (int k = 0; k < d; ++k) z[k] = g(rng);
        Vector x = task.cholesky * z;
        data.samples.push_back({unvech(x), i % 2 == 0 ? ClassTag::left : ClassTag::right, 0,
                                Provenance::real});
    }

    ScoreNetConfig nc;
    nc.inputDim = d;
    nc.hidden = {128, 128, 128};
    nc.timeEmbedDim = 64;
    nc.bandEmbedDim = 0;
    nc.bands = 1;
    nc.initSeed = 607;
    ScoreNetwork net(nc);

    TrainConfig tc;
    tc.iterations = 10000;
    tc.batchSize = 512;
    tc.learningRate = 2e-3;
    tc.lrDecayFactor = 0.05;
    tc.seed = 608;
    train(net, data, tc);
    return net;
}

void criterion6(Vector& trainedParams) {
    auto t0 = std::chrono::steady_clock::now();
    GaussianTask task = makeGaussianTask();
    ScoreNetwork net = trainCriterion6Network(task);
    trainedParams = net.parameters();

    const int d = 3;
    std::mt19937_64 rng(609);
    std::normal_distribution<double> g;
    bool ok = true;
    std::string detail = "score cosine:";
    for (double sigma : {0.1, 1.0}) {
        Matrix held(100, d);
        for (int i = 0; i < 100; ++i) {
            Vector z(d), e(d);
            for (int k = 0; k < d; ++k) {
                z[k] = g(rng);
                e[k] = g(rng);
            }
            held.row(i) = (task.cholesky * z + sigma * e).transpose();
        }
        Matrix prec = (task.cov + sigma * sigma * Matrix::Identity(d, d)).inverse();
        Matrix truth = -(held * prec);
        Matrix est = net.forward(held, Vector::Constant(100, sigma), {});
        double meanCos = 0.0;
        for (int i = 0; i < 100; ++i)
            meanCos += est.row(i).dot(truth.row(i)) / (est.row(i).norm() * truth.row(i).norm());
        meanCos /= 100.0;
        detail += " sigma=" + std::to_string(sigma) + " -> " + std::to_string(meanCos);
        if (!(meanCos > 0.95)) ok = false;
    }
    const double el = seconds(t0);
    report(6, ok && el < 300.0, detail + ", " + std::to_string(el) + " s");
}

// ---------------------------------------------------------------- criterion 7
fs::path acceptanceDir() {
    fs::path dir = fs::temp_directory_path() / "scmgen_acceptance";
    return dir;
}

PipelineConfig referenceConfig(const fs::path& outDir) {
    PipelineConfig cfg = PipelineConfig::fromJson(nlohmann::json::object());
    cfg.outputDir = outDir;
    return cfg;
}

void criterion7(PipelineResult& result) {
    auto t0 = std::chrono::steady_clock::now();
    const fs::path dir = acceptanceDir() / "run1";
    fs::remove_all(dir);
    result = runPipeline(referenceConfig(dir));
    const double el = seconds(t0);
    const bool ok = result.accuracy >= 0.70 &&
                    result.meanDistancePooled < result.interClassDistance && el < 900.0;
    report(7, ok,
           "end-to-end: accuracy " + std::to_string(result.accuracy) + ", pooled distance " +
               std::to_string(result.meanDistancePooled) + " vs inter-class " +
               std::to_string(result.interClassDistance) + ", " + std::to_string(el) + " s");
}

// ---------------------------------------------------------------- criterion 8
void criterion8(const Criterion5Artifacts& c5, const Vector& c6Params,
                const PipelineResult& c7) {
    auto t0 = std::chrono::steady_clock::now();
    bool ok = true;
    std::string detail;

    Criterion5Artifacts again5 = runCriterion5Samplers();
    if ((again5.langevin - c5.langevin).cwiseAbs().maxCoeff() != 0.0 ||
        (again5.reverseSde - c5.reverseSde).cwiseAbs().maxCoeff() != 0.0) {
        ok = false;
        detail += " sampler rerun differs;";
    }

    ScoreNetwork again6 = trainCriterion6Network(makeGaussianTask());
    if ((again6.parameters() - c6Params).cwiseAbs().maxCoeff() != 0.0) {
        ok = false;
        detail += " training rerun differs;";
    }

    const fs::path dir2 = acceptanceDir() / "run2";
    fs::remove_all(dir2);
    runPipeline(referenceConfig(dir2));
    for (const char* name :
         {"real.jsonl", "generated.jsonl", "checkpoint_left.txt", "checkpoint_right.txt",
          "mdm.jsonl", "report.json"}) {
        if (fileHash(c7.manifestPath.parent_path() / name) != fileHash(dir2 / name)) {
            ok = false;
            detail += std::string(" pipeline artifact ") + name + " differs;";
        }
    }
    if (ok) detail = " all criterion 5-7 artifacts bit-identical across reruns";
    report(8, ok, "determinism:" + detail + ", " + std::to_string(seconds(t0)) + " s");
}

} // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    Criterion5Artifacts c5;
    criterion5(c5);
    Vector c6Params;
    criterion6(c6Params);
    PipelineResult c7;
    criterion7(c7);
    criterion8(c5, c6Params, c7);
    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
