#include "scm/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "scm/spd_core.hpp"

namespace scm {

using nlohmann::json;

const char* toString(ClassTag c) { return c == ClassTag::left ? "left" : "right"; }
const char* toString(Provenance p) { return p == Provenance::real ? "real" : "generated"; }

ClassTag classTagFromString(const std::string& s) {
    if (s == "left") return ClassTag::left;
    if (s == "right") return ClassTag::right;
    throw std::invalid_argument("unknown class tag: " + s);
}

Provenance provenanceFromString(const std::string& s) {
    if (s == "real") return Provenance::real;
    if (s == "generated") return Provenance::generated;
    throw std::invalid_argument("unknown provenance: " + s);
}

std::size_t ScmDataset::countForClass(ClassTag c) const {
    std::size_t n = 0;
    for (const auto& s : samples)
        if (s.label == c) ++n;
    return n;
}

SymMatrix covarianceFromSegment(const Segment& seg) {
    if (seg.channels() < 1 || seg.timestamps() < 1)
        throw std::invalid_argument("covarianceFromSegment: empty segment");
    if (!seg.samples.allFinite())
        throw std::invalid_argument("covarianceFromSegment: non-finite samples");
    return SymMatrix(seg.samples * seg.samples.transpose());
}

SymMatrix scaleByNorm(const SymMatrix& s, MatrixNorm norm) {
    double nrm = 0.0;
    if (norm == MatrixNorm::frobenius) {
        nrm = s.mat().norm();
    } else {
        EigenDecomposition ed = eigSym(s);
        nrm = ed.eigenvalues.cwiseAbs().maxCoeff();
    }
    if (nrm <= 0.0)
        throw std::invalid_argument("scaleByNorm: zero matrix");
    return SymMatrix(s.mat() / nrm);
}

SymMatrix standardizeEntries(const SymMatrix& s) {
    const Eigen::Index n = s.dim();
    const double cnt = static_cast<double>(n * n);
    const double mean = s.mat().sum() / cnt;
    const double var = (s.mat().array() - mean).square().sum() / cnt;
    if (var <= 0.0)
        throw std::invalid_argument("standardizeEntries: zero entry variance");
    return SymMatrix((s.mat().array() - mean) / std::sqrt(var));
}

std::vector<int> activeChannels(const SynthConfig& cfg, ClassTag c) {
    const int nAct = std::min(cfg.channels / 2, std::max(1, (cfg.channels + 3) / 4));
    std::vector<int> out;
    for (int k = 0; k < nAct; ++k)
        out.push_back(c == ClassTag::right ? k : cfg.channels - 1 - k);
    return out;
}

std::vector<int> discriminativeBands(int bandCount) {
    if (bandCount >= 3) return {1, 2};
    if (bandCount == 2) return {1};
    return {0};
}

ScmDataset generateSyntheticDataset(const SynthConfig& cfg) {
    if (cfg.channels < 2 || cfg.trialsPerClass < 1 || cfg.bands < 1 || cfg.timestamps < 1)
        throw std::invalid_argument("generateSyntheticDataset: invalid config");

    ScmDataset d;
    d.channelCount = cfg.channels;
    d.bandCount = cfg.bands;
    d.seed = cfg.seed;
    for (int c = 0; c < cfg.channels; ++c)
        d.channelNames.push_back("ch" + std::to_string(c));

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::vector<int> disc = discriminativeBands(cfg.bands);

    for (ClassTag cls : {ClassTag::left, ClassTag::right}) {
        const std::vector<int> active = activeChannels(cfg, cls);
        for (int band = 0; band < cfg.bands; ++band) {
            Vector amp = Vector::Ones(cfg.channels);
            if (std::find(disc.begin(), disc.end(), band) != disc.end())
                for (int ch : active) amp[ch] = 1.0 + cfg.classContrast;
            for (int trial = 0; trial < cfg.trialsPerClass; ++trial) {
                Matrix x(cfg.channels, cfg.timestamps);
                for (Eigen::Index i = 0; i < x.rows(); ++i)
                    for (Eigen::Index j = 0; j < x.cols(); ++j)
                        x(i, j) = amp[i] * gauss(rng);
                SymMatrix cov(x * x.transpose() / static_cast<double>(cfg.timestamps));
                d.samples.push_back({scaleByNorm(cov, cfg.norm), cls, band, Provenance::real});
            }
        }
    }
    return d;
}

std::string formatDouble(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void saveDataset(const ScmDataset& d, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw DatasetIoError("saveDataset: cannot open " + path.string(), -1);

    json header = {{"version", 1},
                   {"channels", d.channelCount},
                   {"bands", d.bandCount},
                   {"channelNames", d.channelNames}};
    if (d.seed) header["seed"] = *d.seed;
    out << header.dump() << "\n";

    for (const auto& s : d.samples) {
        json rec = {{"label", toString(s.label)},
                    {"band", s.band},
                    {"provenance", toString(s.provenance)}};
        std::vector<std::string> entries;
        entries.reserve(static_cast<std::size_t>(s.matrix.dim() * s.matrix.dim()));
        const Matrix& m = s.matrix.mat();
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j)
                entries.push_back(formatDouble(m(i, j)));
        rec["rowMajorEntries"] = entries;
        out << rec.dump() << "\n";
    }
    if (!out)
        throw DatasetIoError("saveDataset: write failure on " + path.string(), -1);
}

ScmDataset loadDataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DatasetIoError("loadDataset: cannot open " + path.string(), -1);

    std::string line;
    long lineNo = 0;
    if (!std::getline(in, line))
        throw DatasetIoError("loadDataset: empty file " + path.string(), 0);
    ++lineNo;

    json header = json::parse(line, nullptr, false);
    if (header.is_discarded() || !header.is_object())
        throw DatasetIoError("loadDataset: malformed header", lineNo);
    if (!header.contains("version") || header["version"].get<int>() != 1)
        throw DatasetIoError("loadDataset: unsupported format version", lineNo);

    ScmDataset d;
    try {
        d.channelCount = header.at("channels").get<int>();
        d.bandCount = header.at("bands").get<int>();
        d.channelNames = header.at("channelNames").get<std::vector<std::string>>();
        if (header.contains("seed")) d.seed = header["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw DatasetIoError(std::string("loadDataset: bad header: ") + e.what(), lineNo);
    }
    if (d.channelCount < 1 || d.bandCount < 1)
        throw DatasetIoError("loadDataset: invalid channel/band counts", lineNo);

    long sampleIdx = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty()) continue;
        json rec = json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object())
            throw DatasetIoError("loadDataset: malformed sample record", lineNo);
        try {
            ClassTag label = classTagFromString(rec.at("label").get<std::string>());
            int band = rec.at("band").get<int>();
            Provenance prov = provenanceFromString(rec.at("provenance").get<std::string>());
            auto entries = rec.at("rowMajorEntries").get<std::vector<std::string>>();
            const auto expected = static_cast<std::size_t>(d.channelCount) *
                                  static_cast<std::size_t>(d.channelCount);
            if (entries.size() != expected)
                throw DatasetIoError("loadDataset: sample " + std::to_string(sampleIdx) +
                                         " has " + std::to_string(entries.size()) +
                                         " entries, expected " + std::to_string(expected),
                                     lineNo);
            if (band < 0 || band >= d.bandCount)
                throw DatasetIoError("loadDataset: sample " + std::to_string(sampleIdx) +
                                         " band out of range",
                                     lineNo);
            Matrix m(d.channelCount, d.channelCount);
            std::size_t k = 0;
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) {
                    std::size_t pos = 0;
                    m(i, j) = std::stod(entries[k], &pos);
                    if (pos != entries[k].size())
                        throw DatasetIoError("loadDataset: bad numeric entry in sample " +
                                                 std::to_string(sampleIdx),
                                             lineNo);
                    ++k;
                }
            d.samples.push_back({SymMatrix(m), label, band, prov});
        } catch (const DatasetIoError&) {
            throw;
        } catch (const std::exception& e) {
            throw DatasetIoError("loadDataset: sample " + std::to_string(sampleIdx) + ": " + e.what(),
                                 lineNo);
        }
        ++sampleIdx;
    }
    return d;
}

} // namespace scm
