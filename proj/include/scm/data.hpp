#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scm/sym.hpp"

namespace scm {

enum class ClassTag { left, right };
enum class Provenance { real, generated };

const char* toString(ClassTag c);
const char* toString(Provenance p);
ClassTag classTagFromString(const std::string& s);
Provenance provenanceFromString(const std::string& s);

/// Multichannel signal segment, channels x timestamps.
struct Segment {
    Matrix samples;

    Eigen::Index channels() const { return samples.rows(); }
    Eigen::Index timestamps() const { return samples.cols(); }
    bool rankDeficientRisk() const { return timestamps() < channels(); }
};

struct ScmSample {
    SymMatrix matrix;
    ClassTag label;
    int band = 0;
    Provenance provenance = Provenance::real;
};

struct ScmDataset {
    int channelCount = 0;
    int bandCount = 0;
    std::vector<std::string> channelNames;
    std::vector<ScmSample> samples;
    std::optional<std::uint64_t> seed;

    std::size_t countForClass(ClassTag c) const;
};

/// Spatial covariance S := X X^T of a segment.
SymMatrix covarianceFromSegment(const Segment& seg);

enum class MatrixNorm { spectral, frobenius };

/// S̄ := S / ||S||; norm defaults to the spectral norm.
SymMatrix scaleByNorm(const SymMatrix& s, MatrixNorm norm = MatrixNorm::spectral);

/// Zero-center and unit-scale the n^2 entries treated as a flat sample.
/// Output is symmetric but generally not PSD; visualization/evaluation only.
SymMatrix standardizeEntries(const SymMatrix& s);

struct SynthConfig {
    int channels = 5;
    int bands = 3;
    int trialsPerClass = 200;
    int timestamps = 64;
    std::uint64_t seed = 7;
    double classContrast = 0.8;
    MatrixNorm norm = MatrixNorm::spectral;
};

/// Which channels carry elevated amplitude for a class (motor-imagery style
/// lateralization: right class on the first channels, left on the last ones).
std::vector<int> activeChannels(const SynthConfig& cfg, ClassTag c);

/// Bands in which the class contrast is applied.
std::vector<int> discriminativeBands(int bandCount);

/// Wishart-style two-class generator: per class/band/trial draw X with
/// class-dependent row amplitudes, form X X^T / n_T, then scaleByNorm.
/// Deterministic given cfg.seed.
ScmDataset generateSyntheticDataset(const SynthConfig& cfg);

class DatasetIoError : public std::runtime_error {
public:
    DatasetIoError(const std::string& msg, long line)
        : std::runtime_error(msg + (line >= 0 ? " (line " + std::to_string(line) + ")" : "")),
          line(line) {}
    long line;
};

/// Line-delimited text container; see README for the record layout. Entries
/// are written as 17-significant-digit decimals so the round trip is
/// bit-exact.
void saveDataset(const ScmDataset& d, const std::filesystem::path& path);
ScmDataset loadDataset(const std::filesystem::path& path);

/// 17-significant-digit decimal formatting used across all file formats.
std::string formatDouble(double v);

} // namespace scm
