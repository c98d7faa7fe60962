// report.hpp — structured experiment records with deterministic serialization

#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bpcalc/common.hpp"

namespace bpcalc {

// One executed check: inputs digest, computed values, residual vs budget vs
// tolerance. `budget` is quadrature error accounting, `tolerance` the
// acceptance threshold; keeping them separate makes failures attributable.
struct CheckRecord {
    std::string name;
    std::string inputs;
    std::vector<std::pair<std::string, double>> values;
    double residual = 0.0;
    double budget = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string note;
};

struct ExperimentReport {
    std::string scenario;
    std::vector<CheckRecord> checks;

    bool overall_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }

    // Deterministic payload: ordered keys, shortest-round-trip doubles,
    // no timestamps (those live in the separate metadata block).
    nlohmann::ordered_json payload() const {
        nlohmann::ordered_json j;
        j["scenario"] = scenario;
        j["overall_pass"] = overall_pass();
        auto& arr = j["checks"] = nlohmann::ordered_json::array();
        for (const auto& c : checks) {
            nlohmann::ordered_json cj;
            cj["name"] = c.name;
            cj["inputs"] = c.inputs;
            auto& vals = cj["values"] = nlohmann::ordered_json::object();
            for (const auto& [k, v] : c.values) vals[k] = v;
            cj["residual"] = c.residual;
            cj["budget"] = c.budget;
            cj["tolerance"] = c.tolerance;
            cj["pass"] = c.pass;
            if (!c.note.empty()) cj["note"] = c.note;
            arr.push_back(std::move(cj));
        }
        return j;
    }

    std::string payload_text() const { return payload().dump(2) + "\n"; }
};

// CSV writing with fixed %.17g formatting so repeated runs are byte-identical.
inline std::string csv_num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open CSV output: " + path);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

} // namespace bpcalc
