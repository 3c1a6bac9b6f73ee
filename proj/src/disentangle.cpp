#include "dime/disentangle.hpp"

#include "dime/error.hpp"
#include "json.hpp"

#include <cmath>
#include <fstream>
#include <string>

namespace dime {

namespace {

void check_index(int value, int bound, const char* what) {
    if (value < 0 || value >= bound) {
        throw InvalidArgumentError(std::string(what) + " out of range: " +
                                   std::to_string(value));
    }
}

void check_logits(const std::vector<LogitVector>& logits, int classes) {
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (logits[i].size() != static_cast<std::size_t>(classes)) {
            throw GatewayError("model returned " + std::to_string(logits[i].size()) +
                                   " logits, expected " + std::to_string(classes),
                               i);
        }
        for (double v : logits[i]) {
            if (!std::isfinite(v)) {
                throw GatewayError("model returned a non-finite logit", i);
            }
        }
    }
}

}  // namespace

SampleSet make_sample_set(std::vector<ModalityPair> points, std::vector<std::string> ids) {
    if (points.size() < 2) {
        throw InvalidArgumentError("sample set needs at least 2 points");
    }
    if (ids.empty()) {
        ids.reserve(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            ids.push_back("sample:" + std::to_string(i));
        }
    }
    if (ids.size() != points.size()) {
        throw InvalidArgumentError("sample id count does not match point count");
    }
    return SampleSet{std::move(points), std::move(ids)};
}

LogitTable LogitTable::build(Model& model, const SampleSet& samples) {
    const int n = samples.size();
    if (n < 2) {
        throw InvalidArgumentError("logit table needs at least 2 samples");
    }
    const int c = model.num_classes();

    std::vector<ModalityPair> pairs;
    pairs.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            pairs.push_back(ModalityPair{samples.points[static_cast<std::size_t>(i)].x1,
                                         samples.points[static_cast<std::size_t>(j)].x2});
        }
    }
    const auto logits = model.evaluate_batch(pairs);
    check_logits(logits, c);

    LogitTable table;
    table.n_ = n;
    table.c_ = c;
    table.logits_.resize(pairs.size() * static_cast<std::size_t>(c));
    for (std::size_t p = 0; p < logits.size(); ++p) {
        std::copy(logits[p].begin(), logits[p].end(),
                  table.logits_.begin() + static_cast<std::ptrdiff_t>(p * c));
    }
    table.ids_ = samples.ids.empty() ? std::vector<std::string>{} : samples.ids;
    if (table.ids_.empty()) {
        for (int i = 0; i < n; ++i) {
            table.ids_.push_back("sample:" + std::to_string(i));
        }
    }
    table.recompute_means();
    return table;
}

LogitTable LogitTable::from_values(int n, int c, std::vector<double> logits,
                                   std::vector<std::string> ids) {
    if (n < 2 || c < 1) {
        throw InvalidArgumentError("logit table needs n >= 2 and c >= 1");
    }
    if (logits.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n) *
                             static_cast<std::size_t>(c)) {
        throw InvalidArgumentError("logit value count does not match n*n*c");
    }
    LogitTable table;
    table.n_ = n;
    table.c_ = c;
    table.logits_ = std::move(logits);
    if (ids.empty()) {
        for (int i = 0; i < n; ++i) {
            ids.push_back("sample:" + std::to_string(i));
        }
    }
    if (ids.size() != static_cast<std::size_t>(n)) {
        throw InvalidArgumentError("sample id count does not match n");
    }
    table.ids_ = std::move(ids);
    table.recompute_means();
    return table;
}

void LogitTable::recompute_means() {
    const auto n = static_cast<std::size_t>(n_);
    const auto c = static_cast<std::size_t>(c_);
    row_means_.assign(n * c, 0.0);
    col_means_.assign(n * c, 0.0);
    grand_mean_.assign(c, 0.0);

    // Fixed index order: rows sum j ascending, columns i ascending, the
    // grand mean row-major. decompose_perturbed depends on this order.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double* cell = logits_.data() + ((i * n + j) * c);
            for (std::size_t ch = 0; ch < c; ++ch) {
                row_means_[i * c + ch] += cell[ch];
                col_means_[j * c + ch] += cell[ch];
                grand_mean_[ch] += cell[ch];
            }
        }
    }
    for (auto& v : row_means_) {
        v /= static_cast<double>(n_);
    }
    for (auto& v : col_means_) {
        v /= static_cast<double>(n_);
    }
    for (auto& v : grand_mean_) {
        v /= static_cast<double>(n_) * static_cast<double>(n_);
    }
}

std::span<const double> LogitTable::at(int i, int j) const {
    check_index(i, n_, "row index");
    check_index(j, n_, "column index");
    const auto n = static_cast<std::size_t>(n_);
    const auto c = static_cast<std::size_t>(c_);
    return {logits_.data() + ((static_cast<std::size_t>(i) * n + static_cast<std::size_t>(j)) * c),
            c};
}

std::span<const double> LogitTable::row_mean(int i) const {
    check_index(i, n_, "row index");
    return {row_means_.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(c_),
            static_cast<std::size_t>(c_)};
}

std::span<const double> LogitTable::col_mean(int j) const {
    check_index(j, n_, "column index");
    return {col_means_.data() + static_cast<std::size_t>(j) * static_cast<std::size_t>(c_),
            static_cast<std::size_t>(c_)};
}

std::span<const double> LogitTable::grand_mean() const {
    return {grand_mean_.data(), grand_mean_.size()};
}

LogitTable LogitTable::with_replaced_column(int k, const std::vector<LogitVector>& fresh) const {
    check_index(k, n_, "column index");
    if (fresh.size() != static_cast<std::size_t>(n_)) {
        throw InvalidArgumentError("replacement column needs one logit vector per sample");
    }
    check_logits(fresh, c_);
    LogitTable table = *this;
    const auto n = static_cast<std::size_t>(n_);
    const auto c = static_cast<std::size_t>(c_);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(fresh[i].begin(), fresh[i].end(),
                  table.logits_.begin() +
                      static_cast<std::ptrdiff_t>((i * n + static_cast<std::size_t>(k)) * c));
    }
    table.recompute_means();
    return table;
}

void LogitTable::save(const std::filesystem::path& file) const {
    nlohmann::json j{{"n", n_},
                     {"classes", c_},
                     {"sample_ids", ids_},
                     {"logits", logits_}};
    std::ofstream out(file);
    if (!out) {
        throw Error("cannot open " + file.string() + " for writing");
    }
    out << j.dump() << '\n';
    if (!out) {
        throw Error("write failed: " + file.string());
    }
}

LogitTable LogitTable::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw Error("cannot open " + file.string());
    }
    nlohmann::json j;
    in >> j;
    return from_values(j.at("n").get<int>(), j.at("classes").get<int>(),
                       j.at("logits").get<std::vector<double>>(),
                       j.at("sample_ids").get<std::vector<std::string>>());
}

DecomposedLogits decompose_point(const LogitTable& table, int k) {
    check_index(k, table.sample_count(), "point index");
    const int c = table.class_count();
    const auto full = table.at(k, k);
    const auto row = table.row_mean(k);
    const auto col = table.col_mean(k);
    const auto grand = table.grand_mean();

    DecomposedLogits out;
    out.full.assign(full.begin(), full.end());
    out.uc.resize(static_cast<std::size_t>(c));
    out.mi.resize(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        const auto u = static_cast<std::size_t>(ch);
        out.uc[u] = row[u] + col[u] - grand[u];
        out.mi[u] = out.full[u] - out.uc[u];
    }
    return out;
}

DecomposedLogits decompose_perturbed(const LogitTable& table, const SampleSet& samples,
                                     int k, int side, const ModalityValue& perturbed,
                                     Model& model) {
    const int n = table.sample_count();
    const int c = table.class_count();
    check_index(k, n, "point index");
    if (side != 1 && side != 2) {
        throw InvalidArgumentError("side must be 1 or 2");
    }
    if (samples.size() != n) {
        throw InvalidArgumentError("sample set does not match table size");
    }

    // Fresh line: row k against all x2 (side 1) or column k against all x1
    // (side 2).
    std::vector<ModalityPair> pairs;
    pairs.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto& other = samples.points[static_cast<std::size_t>(i)];
        if (side == 1) {
            pairs.push_back(ModalityPair{perturbed, other.x2});
        } else {
            pairs.push_back(ModalityPair{other.x1, perturbed});
        }
    }
    const auto fresh = model.evaluate_batch(pairs);
    check_logits(fresh, c);

    const auto grand = table.grand_mean();
    // Means along the replaced line are re-summed in index order; the
    // crossing line and the grand mean are patched from cached totals.
    const auto crossing = (side == 1) ? table.col_mean(k) : table.row_mean(k);

    DecomposedLogits out;
    out.full.assign(fresh[static_cast<std::size_t>(k)].begin(),
                    fresh[static_cast<std::size_t>(k)].end());
    out.uc.resize(static_cast<std::size_t>(c));
    out.mi.resize(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
        const auto u = static_cast<std::size_t>(ch);
        double line_sum = 0.0;
        double delta_sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double value = fresh[static_cast<std::size_t>(i)][u];
            line_sum += value;
            const auto old = (side == 1) ? table.at(k, i) : table.at(i, k);
            delta_sum += value - old[u];
        }
        const double line_mean = line_sum / static_cast<double>(n);
        const double kk_delta =
            fresh[static_cast<std::size_t>(k)][u] - table.at(k, k)[u];
        const double crossing_mean = crossing[u] + kk_delta / static_cast<double>(n);
        const double grand_mean =
            grand[u] + delta_sum / (static_cast<double>(n) * static_cast<double>(n));
        // Same expression shape as decompose_point: row + col - grand.
        const double uc = (side == 1) ? line_mean + crossing_mean - grand_mean
                                      : crossing_mean + line_mean - grand_mean;
        out.uc[u] = uc;
        out.mi[u] = out.full[u] - uc;
    }
    return out;
}

std::vector<double> mi_grid(const LogitTable& table) {
    const auto n = static_cast<std::size_t>(table.sample_count());
    const auto c = static_cast<std::size_t>(table.class_count());
    std::vector<double> grid(n * n * c);
    const auto grand = table.grand_mean();
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = table.row_mean(static_cast<int>(i));
        for (std::size_t j = 0; j < n; ++j) {
            const auto col = table.col_mean(static_cast<int>(j));
            const auto cell = table.at(static_cast<int>(i), static_cast<int>(j));
            for (std::size_t ch = 0; ch < c; ++ch) {
                grid[(i * n + j) * c + ch] = cell[ch] - row[ch] - col[ch] + grand[ch];
            }
        }
    }
    return grid;
}

}  // namespace dime
