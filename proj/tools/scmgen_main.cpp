#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "scm/eval.hpp"
#include "scm/pipeline.hpp"
#include "scm/sampler.hpp"

namespace fs = std::filesystem;
using namespace scm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;
constexpr int kExitNumerical = 4;

int runGenData(const SynthConfig& cfg, const std::string& outPath) {
    ScmDataset d = generateSyntheticDataset(cfg);
    saveDataset(d, outPath);
    std::cout << "wrote " << d.samples.size() << " samples to " << outPath << "\n";
    return kExitOk;
}

struct TrainArgs {
    std::string dataPath;
    std::string outPath;
    std::string classTag = "left";
    TrainConfig cfg;
    std::vector<int> hidden{256, 256, 256};
    int timeEmbedDim = 64;
    int bandEmbedDim = 8;
    std::uint64_t initSeed = 0;
};

int runTrain(const TrainArgs& args) {
    ScmDataset data = loadDataset(args.dataPath);
    ScoreNetConfig netCfg;
    netCfg.inputDim = static_cast<int>(vechDim(data.channelCount));
    netCfg.hidden = args.hidden;
    netCfg.timeEmbedDim = args.timeEmbedDim;
    netCfg.bandEmbedDim = args.bandEmbedDim;
    netCfg.bands = data.bandCount;
    netCfg.initSeed = args.initSeed;
    ScoreNetwork net(netCfg);

    TrainConfig tc = args.cfg;
    tc.classFilter = classTagFromString(args.classTag);
    TrainResult res = train(net, data, tc);
    saveCheckpoint(net, {tc.schedule, tc.seed, tc.iterations, tc.classFilter}, args.outPath);
    std::cout << "trained " << res.iterations << " iterations, final loss "
              << res.lossTrace.back().second << ", checkpoint " << args.outPath << "\n";
    return kExitOk;
}

struct SampleArgs {
    std::string checkpoint;
    std::string outPath;
    std::string method = "reverse-sde";
    std::string classTag = "left";
    int count = 100;
    int band = 0;
    SamplerConfig cfg;
};

int runSample(const SampleArgs& args) {
    auto [net, meta] = loadCheckpoint(args.checkpoint);
    SamplerConfig sc = args.cfg;
    sc.method = args.method == "langevin" ? SamplerMethod::langevin : SamplerMethod::reverseSde;
    sc.schedule = meta.schedule;

    ScmDataset out;
    out.channelCount = static_cast<int>(vechMatrixDim(net.config().inputDim));
    out.bandCount = net.config().bands;
    for (int c = 0; c < out.channelCount; ++c)
        out.channelNames.push_back("ch" + std::to_string(c));
    out.seed = sc.seed;

    auto samples = generate(net, sc, args.count, classTagFromString(args.classTag), args.band);
    out.samples = std::move(samples);
    saveDataset(out, args.outPath);
    std::cout << "wrote " << out.samples.size() << " generated samples to " << args.outPath << "\n";
    return kExitOk;
}

struct EvaluateArgs {
    std::string modelPath;
    std::string generatedPath;
    std::string realPath;
    std::string reportPath;
};

int runEvaluate(const EvaluateArgs& args) {
    ScmDataset real = loadDataset(args.realPath);
    ScmDataset generated = loadDataset(args.generatedPath);
    MdmModel model;
    if (fs::exists(args.modelPath)) {
        model = loadMdmModel(args.modelPath);
    } else {
        model = fitMdm(real);
        saveMdmModel(model, args.modelPath);
        std::cout << "fitted MDM model from real data, saved to " << args.modelPath << "\n";
    }
    EvalReport report = evaluateGenerated(model, generated, real);
    saveEvalReport(report, args.reportPath);
    std::cout << "accuracy " << report.accuracy << ", pooled mean distance "
              << report.meanDistancePooled << ", report " << args.reportPath << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"scmgen: score-based generation of SPD spatial covariance matrices"};
    app.require_subcommand(1);

    // gen-data
    SynthConfig synth;
    std::string genOut = "real.jsonl";
    std::string genNorm = "spectral";
    auto* genCmd = app.add_subcommand("gen-data", "Generate a synthetic two-class SCM dataset");
    genCmd->add_option("--out", genOut, "Output dataset file");
    genCmd->add_option("--channels", synth.channels, "Channel count");
    genCmd->add_option("--bands", synth.bands, "Frequency band count");
    genCmd->add_option("--trials", synth.trialsPerClass, "Trials per class");
    genCmd->add_option("--timestamps", synth.timestamps, "Timestamps per segment");
    genCmd->add_option("--seed", synth.seed, "RNG seed");
    genCmd->add_option("--contrast", synth.classContrast, "Class contrast");
    genCmd->add_option("--norm", genNorm, "Scaling norm: spectral|frobenius")
        ->check(CLI::IsMember({"spectral", "frobenius"}));

    // train
    TrainArgs trainArgs;
    auto* trainCmd = app.add_subcommand("train", "Train a per-class score network");
    trainCmd->add_option("--data", trainArgs.dataPath, "Training dataset")->required();
    trainCmd->add_option("--out", trainArgs.outPath, "Checkpoint path")->required();
    trainCmd->add_option("--class", trainArgs.classTag, "Class to train on: left|right")
        ->check(CLI::IsMember({"left", "right"}));
    trainCmd->add_option("--iters", trainArgs.cfg.iterations, "Training iterations");
    trainCmd->add_option("--batch", trainArgs.cfg.batchSize, "Batch size");
    trainCmd->add_option("--lr", trainArgs.cfg.learningRate, "Learning rate");
    trainCmd->add_option("--lr-decay", trainArgs.cfg.lrDecayFactor, "Geometric lr decay factor");
    trainCmd->add_option("--sigma-min", trainArgs.cfg.schedule.sigmaMin, "VE sigma_min");
    trainCmd->add_option("--sigma-max", trainArgs.cfg.schedule.sigmaMax, "VE sigma_max");
    trainCmd->add_option("--seed", trainArgs.cfg.seed, "Training RNG seed");
    trainCmd->add_option("--init-seed", trainArgs.initSeed, "Weight init seed");
    trainCmd->add_option("--hidden", trainArgs.hidden, "Hidden layer widths");
    std::string optName = "adam";
    trainCmd->add_option("--optimizer", optName, "Optimizer: adam|sgd")
        ->check(CLI::IsMember({"adam", "sgd"}));

    // sample
    SampleArgs sampleArgs;
    auto* sampleCmd = app.add_subcommand("sample", "Sample SCMs from a trained checkpoint");
    sampleCmd->add_option("--checkpoint", sampleArgs.checkpoint, "Checkpoint path")->required();
    sampleCmd->add_option("--out", sampleArgs.outPath, "Output dataset file")->required();
    sampleCmd->add_option("--method", sampleArgs.method, "Sampler: langevin|reverse-sde")
        ->check(CLI::IsMember({"langevin", "reverse-sde"}));
    sampleCmd->add_option("--count", sampleArgs.count, "Sample count");
    sampleCmd->add_option("--class", sampleArgs.classTag, "Class tag: left|right")
        ->check(CLI::IsMember({"left", "right"}));
    sampleCmd->add_option("--band", sampleArgs.band, "Band index");
    sampleCmd->add_option("--seed", sampleArgs.cfg.seed, "Sampler seed");
    sampleCmd->add_option("--proj-eps", sampleArgs.cfg.projectionEps, "Projection eigenvalue floor");
    sampleCmd->add_option("--langevin-levels", sampleArgs.cfg.langevinLevels, "Langevin noise levels");
    sampleCmd->add_option("--langevin-steps", sampleArgs.cfg.langevinStepsPerLevel,
                          "Langevin steps per level");
    sampleCmd->add_option("--langevin-step-size", sampleArgs.cfg.langevinStepSize,
                          "Langevin base step size");
    sampleCmd->add_option("--sde-steps", sampleArgs.cfg.sdeSteps, "Reverse-SDE step count");

    // evaluate
    EvaluateArgs evalArgs;
    auto* evalCmd = app.add_subcommand("evaluate", "Evaluate generated samples with an MDM classifier");
    evalCmd->add_option("--model", evalArgs.modelPath, "MDM model file (fitted from --real if absent)")
        ->required();
    evalCmd->add_option("--generated", evalArgs.generatedPath, "Generated dataset")->required();
    evalCmd->add_option("--real", evalArgs.realPath, "Real dataset")->required();
    evalCmd->add_option("--report", evalArgs.reportPath, "Report output path")->required();

    // export-flat
    std::vector<std::string> exportInputs;
    std::string exportOut;
    bool exportRaw = false;
    auto* exportCmd = app.add_subcommand("export-flat", "Export flattened matrices as TSV");
    exportCmd->add_option("--out", exportOut, "Output TSV path")->required();
    exportCmd->add_option("datasets", exportInputs, "Dataset files")->required();
    exportCmd->add_flag("--raw", exportRaw, "Skip entry standardization");

    // pipeline
    std::string pipelineConfigPath;
    auto* pipeCmd = app.add_subcommand("pipeline", "Run gen-data -> train -> sample -> evaluate");
    pipeCmd->add_option("--config", pipelineConfigPath, "JSON config file");
    std::uint64_t pipeSeed = 0;
    std::string pipeOutDir, pipeMethod;
    int pipeIters = -1, pipeBatch = -1, pipeCount = -1;
    double pipeLr = -1.0;
    auto* pipeSeedOpt = pipeCmd->add_option("--seed", pipeSeed, "Global seed override");
    pipeCmd->add_option("--out-dir", pipeOutDir, "Output directory override");
    pipeCmd->add_option("--iters", pipeIters, "Training iterations override");
    pipeCmd->add_option("--batch", pipeBatch, "Batch size override");
    pipeCmd->add_option("--lr", pipeLr, "Learning rate override");
    pipeCmd->add_option("--count", pipeCount, "Generated trials per class override");
    pipeCmd->add_option("--method", pipeMethod, "Sampler method override")
        ->check(CLI::IsMember({"langevin", "reverse-sde"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (genCmd->parsed()) {
            synth.norm = genNorm == "spectral" ? MatrixNorm::spectral : MatrixNorm::frobenius;
            return runGenData(synth, genOut);
        }
        if (trainCmd->parsed()) {
            trainArgs.cfg.optimizer = optName == "adam" ? Optimizer::adam : Optimizer::sgd;
            return runTrain(trainArgs);
        }
        if (sampleCmd->parsed()) return runSample(sampleArgs);
        if (evalCmd->parsed()) return runEvaluate(evalArgs);
        if (exportCmd->parsed()) {
            std::vector<ScmDataset> datasets;
            for (const auto& p : exportInputs) datasets.push_back(loadDataset(p));
            exportFlat(datasets, exportOut, !exportRaw);
            std::cout << "wrote " << exportOut << "\n";
            return kExitOk;
        }
        if (pipeCmd->parsed()) {
            nlohmann::json j = nlohmann::json::object();
            if (!pipelineConfigPath.empty()) j = loadConfigFile(pipelineConfigPath);
            // flag overrides on top of the file
            if (pipeSeedOpt->count() > 0) j["globalSeed"] = pipeSeed;
            if (!pipeOutDir.empty()) j["outputDir"] = pipeOutDir;
            if (pipeIters > 0) j["train"]["iterations"] = pipeIters;
            if (pipeBatch > 0) j["train"]["batchSize"] = pipeBatch;
            if (pipeLr > 0) j["train"]["learningRate"] = pipeLr;
            if (pipeCount >= 0) j["sampleCount"] = pipeCount;
            if (!pipeMethod.empty()) j["sample"]["method"] = pipeMethod;

            PipelineConfig cfg = PipelineConfig::fromJson(j);
            PipelineResult res = runPipeline(cfg);
            std::cout << "pipeline ok: accuracy " << res.accuracy << ", pooled mean distance "
                      << res.meanDistancePooled << ", inter-class distance "
                      << res.interClassDistance << "\nmanifest: " << res.manifestPath.string()
                      << "\n";
            return kExitOk;
        }
    } catch (const TrainDivergence& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const SamplerDivergence& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const StageFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitStage;
    }
    return kExitConfig;
}
