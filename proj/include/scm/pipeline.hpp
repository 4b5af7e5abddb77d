#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "scm/data.hpp"
#include "scm/sampler.hpp"
#include "scm/score_model.hpp"

namespace scm {

/// Effective run configuration: defaults, overlaid with a config file,
/// overlaid with CLI flags. The merged form is what gets snapshotted.
struct PipelineConfig {
    std::filesystem::path outputDir = "out";
    std::uint64_t globalSeed = 7;

    SynthConfig data;                 // desk-scale defaults
    TrainConfig train;
    std::vector<int> netHidden{256, 256, 256};
    int timeEmbedDim = 64;
    int bandEmbedDim = 8;
    SamplerConfig sample;
    int sampleCount = 200;            // generated trials per class (one matrix per band each)

    /// Stage seeds derive from globalSeed unless explicitly set in the file.
    static PipelineConfig fromJson(const nlohmann::json& j);
    nlohmann::json toJson() const;
};

nlohmann::json loadConfigFile(const std::filesystem::path& path);

/// FNV-1a 64-bit content hash, hex-encoded; used for manifest entries.
std::string fileHash(const std::filesystem::path& path);

struct PipelineResult {
    std::filesystem::path manifestPath;
    double accuracy = 0.0;
    double meanDistancePooled = 0.0;
    double interClassDistance = 0.0;
};

class StageFailure : public std::runtime_error {
public:
    StageFailure(const std::string& stage, const std::string& cause)
        : std::runtime_error("stage '" + stage + "' failed: " + cause), stage(stage) {}
    std::string stage;
};

/// gen-data -> train (per class) -> sample -> evaluate. Writes every artifact
/// plus a config snapshot and a manifest with per-artifact content hashes.
/// Deterministic: identical configs reproduce identical artifacts.
PipelineResult runPipeline(const PipelineConfig& cfg);

} // namespace scm
