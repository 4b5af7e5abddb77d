#include "scm/pipeline.hpp"

#include <fstream>

#include "scm/eval.hpp"

namespace scm {

using nlohmann::json;

namespace {

MatrixNorm normFromString(const std::string& s) {
    if (s == "spectral") return MatrixNorm::spectral;
    if (s == "frobenius") return MatrixNorm::frobenius;
    throw std::invalid_argument("config: unknown norm '" + s + "'");
}

Optimizer optimizerFromString(const std::string& s) {
    if (s == "adam") return Optimizer::adam;
    if (s == "sgd") return Optimizer::sgd;
    throw std::invalid_argument("config: unknown optimizer '" + s + "'");
}

SamplerMethod methodFromString(const std::string& s) {
    if (s == "langevin") return SamplerMethod::langevin;
    if (s == "reverse-sde") return SamplerMethod::reverseSde;
    throw std::invalid_argument("config: unknown sampler method '" + s + "'");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

PipelineConfig PipelineConfig::fromJson(const json& j) {
    PipelineConfig cfg;
    // desk-scale defaults
    cfg.data.channels = 5;
    cfg.data.bands = 3;
    cfg.data.trialsPerClass = 200;
    cfg.data.classContrast = 0.8;
    cfg.train.iterations = 5000;
    cfg.train.batchSize = 512;

    std::string s;
    if (j.contains("outputDir")) cfg.outputDir = j.at("outputDir").get<std::string>();
    maybe(j, "globalSeed", cfg.globalSeed);
    maybe(j, "sampleCount", cfg.sampleCount);

    if (j.contains("data")) {
        const json& d = j.at("data");
        maybe(d, "channels", cfg.data.channels);
        maybe(d, "bands", cfg.data.bands);
        maybe(d, "trialsPerClass", cfg.data.trialsPerClass);
        maybe(d, "timestamps", cfg.data.timestamps);
        maybe(d, "classContrast", cfg.data.classContrast);
        if (d.contains("norm")) cfg.data.norm = normFromString(d.at("norm").get<std::string>());
    }
    if (j.contains("train")) {
        const json& t = j.at("train");
        maybe(t, "iterations", cfg.train.iterations);
        maybe(t, "batchSize", cfg.train.batchSize);
        maybe(t, "learningRate", cfg.train.learningRate);
        maybe(t, "lrDecayFactor", cfg.train.lrDecayFactor);
        maybe(t, "gradClip", cfg.train.gradClip);
        maybe(t, "tEps", cfg.train.tEps);
        maybe(t, "sigmaMin", cfg.train.schedule.sigmaMin);
        maybe(t, "sigmaMax", cfg.train.schedule.sigmaMax);
        if (t.contains("optimizer"))
            cfg.train.optimizer = optimizerFromString(t.at("optimizer").get<std::string>());
        maybe(t, "hidden", cfg.netHidden);
        maybe(t, "timeEmbedDim", cfg.timeEmbedDim);
        maybe(t, "bandEmbedDim", cfg.bandEmbedDim);
    }
    if (j.contains("sample")) {
        const json& sj = j.at("sample");
        if (sj.contains("method")) cfg.sample.method = methodFromString(sj.at("method").get<std::string>());
        maybe(sj, "langevinLevels", cfg.sample.langevinLevels);
        maybe(sj, "langevinStepsPerLevel", cfg.sample.langevinStepsPerLevel);
        maybe(sj, "langevinStepSize", cfg.sample.langevinStepSize);
        maybe(sj, "sdeSteps", cfg.sample.sdeSteps);
        maybe(sj, "tEps", cfg.sample.tEps);
        maybe(sj, "projectionEps", cfg.sample.projectionEps);
    }

    // stage seeds derive from globalSeed; schedule is shared
    cfg.data.seed = cfg.globalSeed;
    cfg.train.seed = cfg.globalSeed + 1;
    cfg.sample.schedule = cfg.train.schedule;
    cfg.sample.seed = cfg.globalSeed + 201;

    if (cfg.data.channels < 2 || cfg.data.bands < 1 || cfg.data.trialsPerClass < 1 ||
        cfg.train.iterations < 1 || cfg.train.batchSize < 1 || cfg.sampleCount < 0)
        throw std::invalid_argument("config: invalid parameter values");
    return cfg;
}

json PipelineConfig::toJson() const {
    return json{
        {"outputDir", outputDir.string()},
        {"globalSeed", globalSeed},
        {"sampleCount", sampleCount},
        {"data",
         {{"channels", data.channels},
          {"bands", data.bands},
          {"trialsPerClass", data.trialsPerClass},
          {"timestamps", data.timestamps},
          {"classContrast", data.classContrast},
          {"norm", data.norm == MatrixNorm::spectral ? "spectral" : "frobenius"}}},
        {"train",
         {{"iterations", train.iterations},
          {"batchSize", train.batchSize},
          {"learningRate", train.learningRate},
          {"lrDecayFactor", train.lrDecayFactor},
          {"gradClip", train.gradClip},
          {"tEps", train.tEps},
          {"sigmaMin", train.schedule.sigmaMin},
          {"sigmaMax", train.schedule.sigmaMax},
          {"optimizer", train.optimizer == Optimizer::adam ? "adam" : "sgd"},
          {"hidden", netHidden},
          {"timeEmbedDim", timeEmbedDim},
          {"bandEmbedDim", bandEmbedDim}}},
        {"sample",
         {{"method", sample.method == SamplerMethod::langevin ? "langevin" : "reverse-sde"},
          {"langevinLevels", sample.langevinLevels},
          {"langevinStepsPerLevel", sample.langevinStepsPerLevel},
          {"langevinStepSize", sample.langevinStepSize},
          {"sdeSteps", sample.sdeSteps},
          {"tEps", sample.tEps},
          {"projectionEps", sample.projectionEps}}}};
}

json loadConfigFile(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("config: cannot open " + path.string());
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw std::invalid_argument("config: malformed JSON in " + path.string());
    return j;
}

std::string fileHash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("fileHash: cannot open " + path.string());
    std::uint64_t h = 0xCBF29CE484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001B3ULL;
        }
        if (!in) break;
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

PipelineResult runPipeline(const PipelineConfig& cfg) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.outputDir);

    const fs::path configPath = cfg.outputDir / "config.json";
    {
        std::ofstream out(configPath);
        out << cfg.toJson().dump(2) << "\n";
    }

    json manifest = {{"configHash", fileHash(configPath)}, {"status", "running"}};
    json artifacts = json::array();
    artifacts.push_back({{"name", "config"}, {"path", configPath.string()},
                         {"hash", fileHash(configPath)}, {"stage", "setup"}});
    const fs::path manifestPath = cfg.outputDir / "manifest.json";

    auto writeManifest = [&]() {
        manifest["artifacts"] = artifacts;
        std::ofstream out(manifestPath);
        out << manifest.dump(2) << "\n";
    };
    auto recordArtifact = [&](const std::string& name, const fs::path& p, const std::string& stage) {
        artifacts.push_back(
            {{"name", name}, {"path", p.string()}, {"hash", fileHash(p)}, {"stage", stage}});
    };
    auto failStage = [&](const std::string& stage, const std::string& cause) {
        manifest["status"] = "failed";
        manifest["failedStage"] = stage;
        manifest["cause"] = cause;
        writeManifest();
    };

    PipelineResult result;
    result.manifestPath = manifestPath;

    std::string stage = "gen-data";
    try {
        // gen-data
        ScmDataset real = generateSyntheticDataset(cfg.data);
        const fs::path realPath = cfg.outputDir / "real.jsonl";
        saveDataset(real, realPath);
        recordArtifact("real-dataset", realPath, stage);

        // train, one model per class
        stage = "train";
        const int inputDim = static_cast<int>(vechDim(cfg.data.channels));
        std::map<ClassTag, fs::path> checkpoints;
        for (ClassTag cls : {ClassTag::left, ClassTag::right}) {
            const std::uint64_t classOffset = cls == ClassTag::left ? 0 : 1;
            ScoreNetConfig netCfg;
            netCfg.inputDim = inputDim;
            netCfg.hidden = cfg.netHidden;
            netCfg.timeEmbedDim = cfg.timeEmbedDim;
            netCfg.bandEmbedDim = cfg.bandEmbedDim;
            netCfg.bands = cfg.data.bands;
            netCfg.initSeed = cfg.globalSeed + 101 + classOffset;
            ScoreNetwork net(netCfg);

            TrainConfig tc = cfg.train;
            tc.classFilter = cls;
            tc.seed = cfg.train.seed + classOffset;
            train(net, real, tc);

            const fs::path ckptPath =
                cfg.outputDir / ("checkpoint_" + std::string(toString(cls)) + ".txt");
            saveCheckpoint(net, {tc.schedule, tc.seed, tc.iterations, cls}, ckptPath);
            recordArtifact("checkpoint-" + std::string(toString(cls)), ckptPath, stage);
            checkpoints[cls] = ckptPath;
        }

        // sample
        stage = "sample";
        ScmDataset generated;
        generated.channelCount = cfg.data.channels;
        generated.bandCount = cfg.data.bands;
        generated.channelNames = real.channelNames;
        generated.seed = cfg.sample.seed;
        for (ClassTag cls : {ClassTag::left, ClassTag::right}) {
            auto [net, meta] = loadCheckpoint(checkpoints[cls]);
            const std::uint64_t classOffset = cls == ClassTag::left ? 0 : 1;
            for (int band = 0; band < cfg.data.bands; ++band) {
                SamplerConfig sc = cfg.sample;
                sc.seed = cfg.sample.seed + 10 * classOffset + static_cast<std::uint64_t>(band);
                auto samples = generate(net, sc, cfg.sampleCount, cls, band);
                generated.samples.insert(generated.samples.end(), samples.begin(), samples.end());
            }
        }
        const fs::path genPath = cfg.outputDir / "generated.jsonl";
        saveDataset(generated, genPath);
        recordArtifact("generated-dataset", genPath, stage);

        // evaluate
        stage = "evaluate";
        MdmModel model = fitMdm(real);
        const fs::path mdmPath = cfg.outputDir / "mdm.jsonl";
        saveMdmModel(model, mdmPath);
        recordArtifact("mdm-model", mdmPath, stage);

        EvalReport report = evaluateGenerated(model, generated, real);
        const fs::path reportPath = cfg.outputDir / "report.json";
        saveEvalReport(report, reportPath);
        recordArtifact("eval-report", reportPath, stage);

        double inter = 0.0;
        for (int b = 0; b < cfg.data.bands; ++b)
            inter += airmDistance(model.mean(ClassTag::left, b), model.mean(ClassTag::right, b));
        inter /= static_cast<double>(cfg.data.bands);

        result.accuracy = report.accuracy;
        result.meanDistancePooled = report.meanDistancePooled;
        result.interClassDistance = inter;

        manifest["status"] = "ok";
        manifest["summary"] = {{"accuracy", report.accuracy},
                               {"meanDistancePooled", report.meanDistancePooled},
                               {"interClassDistance", inter}};
        writeManifest();
        return result;
    } catch (const TrainDivergence&) {
        failStage(stage, "numerical divergence during training");
        throw;
    } catch (const SamplerDivergence&) {
        failStage(stage, "numerical divergence during sampling");
        throw;
    } catch (const std::exception& e) {
        failStage(stage, e.what());
        throw StageFailure(stage, e.what());
    }
}

} // namespace scm
