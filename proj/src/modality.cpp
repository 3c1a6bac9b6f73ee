#include "dime/modality.hpp"

#include "dime/error.hpp"

#include <sstream>

namespace dime {

ModalityValue ModalityValue::dense(std::vector<double> values) {
    if (values.empty()) {
        throw DegenerateInputError("dense modality value needs at least one dimension");
    }
    ModalityValue v;
    v.payload_ = std::move(values);
    return v;
}

ModalityValue ModalityValue::tokens(std::vector<std::string> tokens) {
    ModalityValue v;
    v.payload_ = std::move(tokens);
    return v;
}

ModalityValue ModalityValue::tokens_from_text(std::string_view text) {
    std::vector<std::string> toks;
    std::istringstream in{std::string(text)};
    std::string tok;
    while (in >> tok) {
        toks.push_back(tok);
    }
    if (toks.empty()) {
        throw DegenerateInputError("token modality value built from empty text");
    }
    return tokens(std::move(toks));
}

ModalityValue ModalityValue::grid(GridRaster raster) {
    if (raster.rows < 1 || raster.cols < 1) {
        throw DegenerateInputError("grid raster needs positive dimensions");
    }
    if (raster.cells.size() != static_cast<std::size_t>(raster.rows) *
                                   static_cast<std::size_t>(raster.cols)) {
        throw InvalidArgumentError("grid raster cell count does not match rows*cols");
    }
    ModalityValue v;
    v.payload_ = std::move(raster);
    return v;
}

ModalityValue::Kind ModalityValue::kind() const noexcept {
    return static_cast<Kind>(payload_.index());
}

int ModalityValue::feature_count() const noexcept {
    switch (kind()) {
        case Kind::Dense:
            return static_cast<int>(std::get<std::vector<double>>(payload_).size());
        case Kind::Tokens:
            return static_cast<int>(std::get<std::vector<std::string>>(payload_).size());
        case Kind::Grid: {
            const auto& g = std::get<GridRaster>(payload_);
            return g.rows * g.cols;
        }
    }
    return 0;
}

const std::vector<double>& ModalityValue::dense_values() const {
    if (kind() != Kind::Dense) {
        throw InvalidArgumentError("modality value is not dense");
    }
    return std::get<std::vector<double>>(payload_);
}

const std::vector<std::string>& ModalityValue::token_values() const {
    if (kind() != Kind::Tokens) {
        throw InvalidArgumentError("modality value is not a token sequence");
    }
    return std::get<std::vector<std::string>>(payload_);
}

const GridRaster& ModalityValue::grid_value() const {
    if (kind() != Kind::Grid) {
        throw InvalidArgumentError("modality value is not a grid raster");
    }
    return std::get<GridRaster>(payload_);
}

std::string_view kind_name(ModalityValue::Kind kind) {
    switch (kind) {
        case ModalityValue::Kind::Dense:
            return "dense-vector";
        case ModalityValue::Kind::Tokens:
            return "token-sequence";
        case ModalityValue::Kind::Grid:
            return "grid-raster";
    }
    return "unknown";
}

ModalityValue::Kind kind_from_name(std::string_view name) {
    if (name == "dense-vector") {
        return ModalityValue::Kind::Dense;
    }
    if (name == "token-sequence") {
        return ModalityValue::Kind::Tokens;
    }
    if (name == "grid-raster") {
        return ModalityValue::Kind::Grid;
    }
    throw ProtocolError("unknown modality kind: " + std::string(name));
}

void to_json(nlohmann::json& j, const ModalityValue& v) {
    switch (v.kind()) {
        case ModalityValue::Kind::Dense:
            j = v.dense_values();
            return;
        case ModalityValue::Kind::Tokens:
            j = v.token_values();
            return;
        case ModalityValue::Kind::Grid: {
            const auto& g = v.grid_value();
            j = nlohmann::json{{"rows", g.rows}, {"cols", g.cols}, {"cells", g.cells}};
            return;
        }
    }
}

void from_json(const nlohmann::json& j, ModalityValue& v) {
    if (j.is_array()) {
        if (j.empty()) {
            v = ModalityValue::tokens({});
            return;
        }
        if (j.front().is_string()) {
            v = ModalityValue::tokens(j.get<std::vector<std::string>>());
            return;
        }
        if (j.front().is_number()) {
            v = ModalityValue::dense(j.get<std::vector<double>>());
            return;
        }
        throw ProtocolError("modality array must hold numbers or strings");
    }
    if (j.is_object() && j.contains("rows") && j.contains("cols") && j.contains("cells")) {
        GridRaster g;
        g.rows = j.at("rows").get<int>();
        g.cols = j.at("cols").get<int>();
        g.cells = j.at("cells").get<std::vector<double>>();
        v = ModalityValue::grid(std::move(g));
        return;
    }
    throw ProtocolError("unrecognized modality value encoding");
}

}  // namespace dime
