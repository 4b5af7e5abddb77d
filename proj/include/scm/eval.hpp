#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <vector>

#include "scm/data.hpp"
#include "scm/spd_core.hpp"

namespace scm {

/// Minimum-distance-to-mean classifier on the SPD manifold: one Fréchet mean
/// per (class, band).
struct MdmModel {
    std::map<ClassTag, std::vector<SpdMatrix>> classMeans; // index = band
    int bands = 0;

    const SpdMatrix& mean(ClassTag c, int band) const;
};

struct EvalReport {
    double accuracy = 0.0;
    std::array<std::array<long, 2>, 2> confusion{}; // [actual][predicted], index 0=left 1=right
    std::vector<double> meanDistancePerBand; // AIRM(real mean, generated mean), per band,
                                             // class-conditional and averaged over classes
    double meanDistancePooled = 0.0;         // average of the per-band distances
    long sampleCount = 0;
};

/// Eigenvalue floor applied to raw dataset matrices before Riemannian
/// operations; keeps strictly-PSD inputs intact up to numerical noise.
inline constexpr double kEvalSpdFloor = 1e-10;

MdmModel fitMdm(const ScmDataset& train);

/// A sample grouped per band: (band, matrix) pairs with distinct bands.
using BandedSample = std::vector<std::pair<int, SpdMatrix>>;

/// argmin over classes of Σ_bands d²_AIRM; ties break to the
/// lexicographically first class tag ("left").
ClassTag predictMdm(const MdmModel& model, const BandedSample& sample);
ClassTag predictMdm(const MdmModel& model, const ScmSample& sample);

/// Classifies generated samples against their intended labels and measures
/// AIRM distances between per-band Fréchet means of the real and generated
/// sets. When every (class, band) cell of the generated set has the same
/// count, samples are grouped into per-trial band sets before classification;
/// otherwise they are classified per sample.
EvalReport evaluateGenerated(const MdmModel& model, const ScmDataset& generated,
                             const ScmDataset& real);

void saveMdmModel(const MdmModel& model, const std::filesystem::path& path);
MdmModel loadMdmModel(const std::filesystem::path& path);

void saveEvalReport(const EvalReport& report, const std::filesystem::path& path);

/// One TSV row per sample: provenance, class, band, flattened entries
/// (optionally entry-standardized) at 17 significant digits.
void exportFlat(const std::vector<ScmDataset>& datasets, const std::filesystem::path& path,
                bool standardize = true);

} // namespace scm
