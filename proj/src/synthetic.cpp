#include "dime/synthetic.hpp"

#include "dime/error.hpp"
#include "dime/rng.hpp"
#include "json.hpp"

#include <cmath>
#include <fstream>
#include <string>

namespace dime {

namespace {

constexpr const char* kGeneratorVersion = "dime-synthetic-v1";
constexpr double kScoreMargin = 0.01;

SyntheticPoint parse_point(const nlohmann::json& j) {
    SyntheticPoint p;
    const auto d1 = j.at("d1").get<std::vector<double>>();
    const auto d2 = j.at("d2").get<std::vector<double>>();
    if (d1.size() != kSyntheticDim || d2.size() != kSyntheticDim) {
        throw InvalidArgumentError("synthetic record does not have 10+10 coordinates");
    }
    std::copy(d1.begin(), d1.end(), p.d1.begin());
    std::copy(d2.begin(), d2.end(), p.d2.begin());
    p.score = synthetic_score(p.d1, p.d2);
    p.label = j.at("label").get<int>();
    return p;
}

void write_split(const std::filesystem::path& file,
                 const std::vector<SyntheticPoint>& points,
                 std::uint64_t seed,
                 const char* split_name) {
    std::ofstream out(file);
    if (!out) {
        throw Error("cannot open " + file.string() + " for writing");
    }
    nlohmann::json header{{"generator", kGeneratorVersion},
                          {"seed", seed},
                          {"split", split_name},
                          {"count", points.size()}};
    out << header.dump() << '\n';
    for (const auto& p : points) {
        nlohmann::json rec{{"d1", p.d1}, {"d2", p.d2}, {"label", p.label}};
        out << rec.dump() << '\n';
    }
    if (!out) {
        throw Error("write failed: " + file.string());
    }
}

std::vector<SyntheticPoint> read_split(const std::filesystem::path& file,
                                       std::uint64_t* seed_out) {
    std::ifstream in(file);
    if (!in) {
        throw Error("cannot open " + file.string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw Error("empty split file: " + file.string());
    }
    const auto header = nlohmann::json::parse(line);
    if (header.value("generator", "") != kGeneratorVersion) {
        throw Error("unrecognized generator version in " + file.string());
    }
    if (seed_out != nullptr) {
        *seed_out = header.at("seed").get<std::uint64_t>();
    }
    std::vector<SyntheticPoint> points;
    points.reserve(header.value("count", 0u));
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        points.push_back(parse_point(nlohmann::json::parse(line)));
    }
    return points;
}

}  // namespace

double synthetic_score(std::span<const double> d1, std::span<const double> d2) {
    if (d1.size() != kSyntheticDim || d2.size() != kSyntheticDim) {
        throw InvalidArgumentError("synthetic_score expects two 10-vectors");
    }
    double sum = 0.0;
    double dot = 0.0;
    for (std::size_t i = 0; i < kSyntheticDim; ++i) {
        sum += d1[i] + d2[i];
        dot += d1[i] * d2[i];
    }
    return sum + dot;
}

DatasetSplits generate_synthetic(std::uint64_t seed, int n) {
    if (n < 10) {
        throw InvalidArgumentError("generate_synthetic needs n >= 10");
    }
    Rng rng(derive_seed(seed, "synthetic/points"));
    std::vector<SyntheticPoint> points;
    points.reserve(static_cast<std::size_t>(n));
    while (points.size() < static_cast<std::size_t>(n)) {
        SyntheticPoint p;
        for (auto& v : p.d1) {
            v = rng.normal();
        }
        for (auto& v : p.d2) {
            v = rng.normal();
        }
        p.score = synthetic_score(p.d1, p.d2);
        if (std::abs(p.score) < kScoreMargin) {
            continue;  // too close to the decision boundary
        }
        p.label = p.score > 0.0 ? 1 : 0;
        points.push_back(p);
    }

    const auto n_train = static_cast<std::size_t>(0.8 * n);
    const auto n_valid = static_cast<std::size_t>(0.1 * n);
    DatasetSplits splits;
    splits.seed = seed;
    splits.train.assign(points.begin(), points.begin() + n_train);
    splits.valid.assign(points.begin() + n_train, points.begin() + n_train + n_valid);
    splits.test.assign(points.begin() + n_train + n_valid, points.end());
    return splits;
}

GroundTruthExplanations ground_truth(const SyntheticPoint& p) {
    GroundTruthExplanations gt;
    gt.uc1 = p.d1;
    gt.uc2 = p.d2;
    for (std::size_t i = 0; i < kSyntheticDim; ++i) {
        gt.mi[i] = p.d1[i] * p.d2[i];
    }
    return gt;
}

ModalityPair to_modality_pair(const SyntheticPoint& p) {
    return ModalityPair{
        ModalityValue::dense({p.d1.begin(), p.d1.end()}),
        ModalityValue::dense({p.d2.begin(), p.d2.end()}),
    };
}

void save_splits(const DatasetSplits& splits, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_split(dir / "train.jsonl", splits.train, splits.seed, "train");
    write_split(dir / "valid.jsonl", splits.valid, splits.seed, "valid");
    write_split(dir / "test.jsonl", splits.test, splits.seed, "test");
}

DatasetSplits load_splits(const std::filesystem::path& dir) {
    DatasetSplits splits;
    splits.train = read_split(dir / "train.jsonl", &splits.seed);
    splits.valid = read_split(dir / "valid.jsonl", nullptr);
    splits.test = read_split(dir / "test.jsonl", nullptr);
    return splits;
}

}  // namespace dime
