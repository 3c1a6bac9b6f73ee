// Reference implementation of the external-model wire protocol, used by the
// gateway tests and handy as a template for wiring real models. Speaks
// line-delimited JSON on stdin/stdout; see README for the schema. The fault
// flags deliberately misbehave so the gateway's error paths can be tested.

#include "CLI11.hpp"
#include "json.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

namespace {

double scalar_summary(const nlohmann::json& x) {
    if (x.is_array()) {
        if (!x.empty() && x.front().is_string()) {
            return static_cast<double>(x.size());  // token count
        }
        double sum = 0.0;
        for (const auto& v : x) {
            sum += v.get<double>();
        }
        return sum;
    }
    if (x.is_object() && x.contains("cells")) {
        double sum = 0.0;
        for (const auto& v : x.at("cells")) {
            sum += v.get<double>();
        }
        return sum;
    }
    return 0.0;
}

bool is_dense(const nlohmann::json& x) {
    return x.is_array() && !x.empty() && x.front().is_number();
}

std::vector<double> compute_logits(const std::string& mode, int classes,
                                   const nlohmann::json& x1, const nlohmann::json& x2) {
    std::vector<double> logits(static_cast<std::size_t>(classes), 0.0);
    if (mode == "zero") {
        return logits;
    }
    if (mode == "echo") {
        const double v1 = scalar_summary(x1);
        const double v2 = scalar_summary(x2);
        for (int c = 0; c < classes; ++c) {
            logits[static_cast<std::size_t>(c)] = (c % 2 == 0) ? v1 : v2;
        }
        return logits;
    }
    if (mode == "additive") {
        const double v1 = scalar_summary(x1);
        const double v2 = scalar_summary(x2);
        for (int c = 0; c < classes; ++c) {
            logits[static_cast<std::size_t>(c)] = (1.0 + c) * v1 - (0.5 + c) * v2;
        }
        return logits;
    }
    if (mode == "product") {
        double interaction = 0.0;
        if (is_dense(x1) && is_dense(x2) && x1.size() == x2.size()) {
            for (std::size_t i = 0; i < x1.size(); ++i) {
                interaction += x1[i].get<double>() * x2[i].get<double>();
            }
        } else {
            interaction = scalar_summary(x1) * scalar_summary(x2);
        }
        for (int c = 0; c < classes; ++c) {
            logits[static_cast<std::size_t>(c)] = (1.0 + c) * interaction;
        }
        return logits;
    }
    throw std::runtime_error("unknown mode: " + mode);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"line-delimited JSON model stub"};
    int classes = 2;
    std::string mode = "additive";
    std::string kinds = "dense-vector,dense-vector";
    int fail_after = -1;       // exit abruptly after this many responses
    bool bad_logits = false;   // respond with a wrong-length logit vector
    bool wrong_id = false;     // respond with a mismatched request id
    bool stall = false;        // never send the handshake
    app.add_option("--classes", classes);
    app.add_option("--mode", mode)->check(CLI::IsMember({"additive", "product", "echo", "zero"}));
    app.add_option("--kinds", kinds);
    app.add_option("--fail-after-requests", fail_after);
    app.add_flag("--bad-logits", bad_logits);
    app.add_flag("--wrong-id", wrong_id);
    app.add_flag("--stall", stall);
    CLI11_PARSE(app, argc, argv);

    if (stall) {
        std::this_thread::sleep_for(std::chrono::hours(1));
        return 0;
    }

    nlohmann::json handshake;
    handshake["protocol"] = 1;
    handshake["classes"] = classes;
    auto& mods = handshake["modalities"] = nlohmann::json::array();
    std::size_t start = 0;
    while (start <= kinds.size()) {
        const auto comma = kinds.find(',', start);
        const auto end = comma == std::string::npos ? kinds.size() : comma;
        mods.push_back({{"kind", kinds.substr(start, end - start)}});
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    std::cout << handshake.dump() << "\n" << std::flush;

    int responded = 0;
    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) {
            continue;
        }
        const auto request = nlohmann::json::parse(line);
        if (fail_after >= 0 && responded >= fail_after) {
            return 1;  // simulated crash mid-session
        }
        nlohmann::json response;
        response["id"] = wrong_id ? request.at("id").get<std::uint64_t>() + 1
                                  : request.at("id").get<std::uint64_t>();
        auto& out = response["logits"] = nlohmann::json::array();
        for (const auto& pair : request.at("pairs")) {
            auto logits = compute_logits(mode, classes, pair.at(0), pair.at(1));
            if (bad_logits) {
                logits.push_back(0.0);
            }
            out.push_back(logits);
        }
        std::cout << response.dump() << "\n" << std::flush;
        ++responded;
    }
    return 0;
}
