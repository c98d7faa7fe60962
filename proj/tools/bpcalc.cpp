// bpcalc — experiment runner for the Bernstein operator-calculus laboratory
//
// Exit codes: 0 all checks pass, 1 at least one check failed, 2 config error.

#include <chrono>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bpcalc/scenario.hpp"

namespace {

int run_command(const std::string& file, const std::string& output_dir,
                const std::string& format, bool parallel) {
    using namespace bpcalc;
    try {
        harness::Scenario sc = harness::load_scenario(file);
        harness::RunOptions opt;
        opt.output_dir = output_dir;
        opt.write_json = format == "json" || format == "both";
        opt.write_csv = format == "csv" || format == "both";
        opt.parallel = parallel;

        const auto t0 = std::chrono::steady_clock::now();
        ExperimentReport report = harness::run_scenario(sc, opt);
        const auto t1 = std::chrono::steady_clock::now();

        // wall clock and timestamps live outside the deterministic payload
        nlohmann::ordered_json meta;
        meta["scenario"] = report.scenario;
        meta["wall_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
        meta["unix_time"] = std::chrono::duration_cast<std::chrono::seconds>(
                                std::chrono::system_clock::now().time_since_epoch())
                                .count();
        meta["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." +
                                std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION);
#if defined(__VERSION__)
        meta["compiler"] = __VERSION__;
#endif
        std::ofstream metaout(std::filesystem::path(output_dir) /
                              (report.scenario + "_meta.json"));
        metaout << meta.dump(2) << "\n";

        for (const auto& c : report.checks)
            std::cout << (c.pass ? "[PASS] " : "[FAIL] ") << c.name
                      << (c.note.empty() ? "" : "  (" + c.note + ")") << "\n";
        std::cout << (report.overall_pass() ? "scenario passed" : "scenario FAILED") << ": "
                  << report.scenario << " (" << report.checks.size() << " checks)\n";
        return report.overall_pass() ? 0 : 1;
    } catch (const bpcalc::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Numerical laboratory for Bernstein functions of commuting "
                 "matrix semigroup generators"};
    app.require_subcommand(1);

    std::string file;
    std::string output_dir = ".";
    std::string format = "both";
    bool parallel = false;
    auto* run = app.add_subcommand("run", "execute a scenario file");
    run->add_option("file", file, "scenario JSON file")->required();
    run->add_option("--output-dir", output_dir, "directory for reports and CSV artifacts");
    run->add_option("--format", format, "report format: json | csv | both")
        ->check(CLI::IsMember({"json", "csv", "both"}));
    run->add_flag("--parallel", parallel, "run independent checks concurrently");

    bool as_json = false;
    auto* list = app.add_subcommand("list-catalog",
                                    "list built-in Bernstein functions and tuple generators");
    list->add_flag("--json", as_json, "machine-readable output");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return run_command(file, output_dir, format, parallel);

    if (list->parsed()) {
        const auto j = bpcalc::harness::catalog_listing();
        if (as_json) {
            std::cout << j.dump(2) << "\n";
        } else {
            std::cout << "Bernstein function catalog:\n";
            for (const auto& e : j["bernstein"])
                std::cout << "  " << e["kind"].get<std::string>() << "  —  params: "
                          << e["params"].get<std::string>()
                          << "; closed form: " << e["closed_form"].get<std::string>() << "\n";
            std::cout << "Tuple generators:\n";
            for (const auto& e : j["tuples"])
                std::cout << "  " << e["kind"].get<std::string>() << "  —  params: "
                          << e["params"].get<std::string>() << "\n";
        }
        return 0;
    }
    return 0;
}
