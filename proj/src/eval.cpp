#include "scm/eval.hpp"

#include <fstream>

#include <json.hpp>

namespace scm {

using nlohmann::json;

const SpdMatrix& MdmModel::mean(ClassTag c, int band) const {
    auto it = classMeans.find(c);
    if (it == classMeans.end() || band < 0 || band >= static_cast<int>(it->second.size()))
        throw std::invalid_argument("MdmModel::mean: no mean for requested class/band");
    return it->second[static_cast<std::size_t>(band)];
}

MdmModel fitMdm(const ScmDataset& train) {
    MdmModel model;
    model.bands = train.bandCount;
    for (ClassTag cls : {ClassTag::left, ClassTag::right}) {
        std::vector<SpdMatrix> means;
        for (int band = 0; band < train.bandCount; ++band) {
            std::vector<SpdMatrix> cell;
            for (const auto& s : train.samples)
                if (s.label == cls && s.band == band)
                    cell.push_back(projectToSpd(s.matrix, kEvalSpdFloor));
            if (cell.empty())
                throw std::invalid_argument("fitMdm: no samples for class " +
                                            std::string(toString(cls)) + ", band " +
                                            std::to_string(band));
            means.push_back(frechetMean(cell).mean);
        }
        model.classMeans.emplace(cls, std::move(means));
    }
    return model;
}

ClassTag predictMdm(const MdmModel& model, const BandedSample& sample) {
    if (sample.empty())
        throw std::invalid_argument("predictMdm: empty sample");
    double dLeft = 0.0, dRight = 0.0;
    for (const auto& [band, mat] : sample) {
        if (band < 0 || band >= model.bands)
            throw std::invalid_argument("predictMdm: band " + std::to_string(band) +
                                        " outside model bands");
        const double dl = airmDistance(mat, model.mean(ClassTag::left, band));
        const double dr = airmDistance(mat, model.mean(ClassTag::right, band));
        dLeft += dl * dl;
        dRight += dr * dr;
    }
    return dLeft <= dRight ? ClassTag::left : ClassTag::right; // tie -> "left"
}

ClassTag predictMdm(const MdmModel& model, const ScmSample& sample) {
    return predictMdm(model, BandedSample{{sample.band, projectToSpd(sample.matrix, kEvalSpdFloor)}});
}

namespace {

std::size_t classIndex(ClassTag c) { return c == ClassTag::left ? 0 : 1; }

SpdMatrix classBandMean(const ScmDataset& d, ClassTag cls, int band) {
    std::vector<SpdMatrix> cell;
    for (const auto& s : d.samples)
        if (s.label == cls && s.band == band)
            cell.push_back(projectToSpd(s.matrix, kEvalSpdFloor));
    if (cell.empty())
        throw std::invalid_argument("evaluateGenerated: no samples for class " +
                                    std::string(toString(cls)) + ", band " + std::to_string(band));
    return frechetMean(cell).mean;
}

} // namespace

EvalReport evaluateGenerated(const MdmModel& model, const ScmDataset& generated,
                             const ScmDataset& real) {
    if (generated.channelCount != real.channelCount || generated.bandCount != real.bandCount)
        throw std::invalid_argument("evaluateGenerated: dataset shapes are incompatible");

    EvalReport report;

    // per-class, per-band sample lists in insertion order
    std::map<ClassTag, std::vector<std::vector<SpdMatrix>>> byClassBand;
    for (ClassTag c : {ClassTag::left, ClassTag::right})
        byClassBand[c].resize(static_cast<std::size_t>(generated.bandCount));
    for (const auto& s : generated.samples)
        byClassBand[s.label][static_cast<std::size_t>(s.band)].push_back(
            projectToSpd(s.matrix, kEvalSpdFloor));

    for (ClassTag c : {ClassTag::left, ClassTag::right}) {
        const auto& cells = byClassBand[c];
        std::size_t trials = cells.front().size();
        bool balanced = generated.bandCount > 1;
        for (const auto& cell : cells)
            if (cell.size() != trials) balanced = false;
        if (balanced && trials > 0) {
            // group band-wise samples into per-trial sets
            for (std::size_t i = 0; i < trials; ++i) {
                BandedSample trial;
                for (int b = 0; b < generated.bandCount; ++b)
                    trial.emplace_back(b, cells[static_cast<std::size_t>(b)][i]);
                ClassTag pred = predictMdm(model, trial);
                ++report.confusion[classIndex(c)][classIndex(pred)];
            }
        } else {
            for (int b = 0; b < generated.bandCount; ++b)
                for (const auto& m : cells[static_cast<std::size_t>(b)]) {
                    ClassTag pred = predictMdm(model, BandedSample{{b, m}});
                    ++report.confusion[classIndex(c)][classIndex(pred)];
                }
        }
    }
    report.sampleCount = report.confusion[0][0] + report.confusion[0][1] +
                         report.confusion[1][0] + report.confusion[1][1];
    report.accuracy = report.sampleCount == 0
                          ? 0.0
                          : static_cast<double>(report.confusion[0][0] + report.confusion[1][1]) /
                                static_cast<double>(report.sampleCount);

    for (int b = 0; b < generated.bandCount; ++b) {
        double dist = 0.0;
        for (ClassTag c : {ClassTag::left, ClassTag::right})
            dist += airmDistance(classBandMean(real, c, b), classBandMean(generated, c, b));
        dist /= 2.0;
        report.meanDistancePerBand.push_back(dist);
        report.meanDistancePooled += dist;
    }
    report.meanDistancePooled /= static_cast<double>(generated.bandCount);
    return report;
}

void saveMdmModel(const MdmModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("saveMdmModel: cannot open " + path.string());
    const Eigen::Index dim = model.classMeans.begin()->second.front().dim();
    json header = {{"version", 1}, {"bands", model.bands}, {"dim", dim}};
    out << header.dump() << "\n";
    for (const auto& [cls, means] : model.classMeans)
        for (int b = 0; b < static_cast<int>(means.size()); ++b) {
            json rec = {{"class", toString(cls)}, {"band", b}};
            std::vector<std::string> entries;
            const Matrix& m = means[static_cast<std::size_t>(b)].mat();
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j)
                    entries.push_back(formatDouble(m(i, j)));
            rec["entries"] = entries;
            out << rec.dump() << "\n";
        }
}

MdmModel loadMdmModel(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("loadMdmModel: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("loadMdmModel: empty file");
    json header = json::parse(line);
    if (header.value("version", 0) != 1)
        throw std::runtime_error("loadMdmModel: unsupported version");
    const int bands = header.at("bands").get<int>();
    const Eigen::Index dim = header.at("dim").get<Eigen::Index>();

    MdmModel model;
    model.bands = bands;
    std::map<ClassTag, std::map<int, SpdMatrix>> staging;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json rec = json::parse(line);
        ClassTag cls = classTagFromString(rec.at("class").get<std::string>());
        int band = rec.at("band").get<int>();
        auto entries = rec.at("entries").get<std::vector<std::string>>();
        if (static_cast<Eigen::Index>(entries.size()) != dim * dim)
            throw std::runtime_error("loadMdmModel: entry count mismatch");
        Matrix m(dim, dim);
        std::size_t k = 0;
        for (Eigen::Index i = 0; i < dim; ++i)
            for (Eigen::Index j = 0; j < dim; ++j)
                m(i, j) = std::stod(entries[k++]);
        staging[cls].emplace(band, SpdMatrix(SymMatrix(m), kEvalSpdFloor));
    }
    for (ClassTag c : {ClassTag::left, ClassTag::right}) {
        std::vector<SpdMatrix> means;
        for (int b = 0; b < bands; ++b) {
            auto it = staging[c].find(b);
            if (it == staging[c].end())
                throw std::runtime_error("loadMdmModel: missing mean for class " +
                                         std::string(toString(c)) + ", band " + std::to_string(b));
            means.push_back(it->second);
        }
        model.classMeans.emplace(c, std::move(means));
    }
    return model;
}

void saveEvalReport(const EvalReport& report, const std::filesystem::path& path) {
    json j = {{"accuracy", report.accuracy},
              {"confusion",
               {{"leftAsLeft", report.confusion[0][0]},
                {"leftAsRight", report.confusion[0][1]},
                {"rightAsLeft", report.confusion[1][0]},
                {"rightAsRight", report.confusion[1][1]}}},
              {"meanDistancePerBand", report.meanDistancePerBand},
              {"meanDistancePooled", report.meanDistancePooled},
              {"sampleCount", report.sampleCount}};
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("saveEvalReport: cannot open " + path.string());
    out << j.dump(2) << "\n";
}

void exportFlat(const std::vector<ScmDataset>& datasets, const std::filesystem::path& path,
                bool standardize) {
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("exportFlat: cannot open " + path.string());
    for (const auto& d : datasets)
        for (const auto& s : d.samples) {
            const SymMatrix m = standardize ? standardizeEntries(s.matrix) : s.matrix;
            out << toString(s.provenance) << '\t' << toString(s.label) << '\t' << s.band;
            const Matrix& mm = m.mat();
            for (Eigen::Index i = 0; i < mm.rows(); ++i)
                for (Eigen::Index j = 0; j < mm.cols(); ++j)
                    out << '\t' << formatDouble(mm(i, j));
            out << '\n';
        }
    if (!out)
        throw std::runtime_error("exportFlat: write failure on " + path.string());
}

} // namespace scm
