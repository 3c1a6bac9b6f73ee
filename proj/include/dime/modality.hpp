#pragma once

#include "json.hpp"

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dime {

struct GridRaster {
    int rows = 0;
    int cols = 0;
    std::vector<double> cells;  // rows * cols, row-major

    bool operator==(const GridRaster&) const = default;
};

// One modality input: a dense vector, a token sequence, or a grid raster.
// Token payloads may be empty (a fully masked-out perturbation); dense and
// grid payloads must hold at least one value.
class ModalityValue {
public:
    enum class Kind { Dense, Tokens, Grid };

    static ModalityValue dense(std::vector<double> values);
    static ModalityValue tokens(std::vector<std::string> tokens);
    static ModalityValue tokens_from_text(std::string_view text);  // whitespace split
    static ModalityValue grid(GridRaster raster);

    Kind kind() const noexcept;

    // Dense: dimension; tokens: token count; grid: cell count.
    int feature_count() const noexcept;

    const std::vector<double>& dense_values() const;
    const std::vector<std::string>& token_values() const;
    const GridRaster& grid_value() const;

    bool operator==(const ModalityValue&) const = default;

private:
    std::variant<std::vector<double>, std::vector<std::string>, GridRaster> payload_{
        std::vector<double>{0.0}};
};

std::string_view kind_name(ModalityValue::Kind kind);
ModalityValue::Kind kind_from_name(std::string_view name);

// Wire encodings: dense -> [reals], tokens -> ["w1",...],
// grid -> {"rows":R,"cols":C,"cells":[...]}.
void to_json(nlohmann::json& j, const ModalityValue& v);
void from_json(const nlohmann::json& j, ModalityValue& v);

}  // namespace dime
