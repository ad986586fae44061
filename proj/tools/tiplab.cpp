#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "tiplab/cli.hpp"

int main(int argc, char** argv) {
    using namespace tiplab::cli;
    CLI::App app{"Rate-induced tipping toolkit: pullback attractors, QSEs and critical rates"};
    app.require_subcommand(1);

    std::string config_path, model, out_dir, format;
    std::vector<std::string> sets;
    std::string figure_name;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"simulate", "integrate one trajectory"},
        {"pullback", "estimate a pullback attractor or repeller"},
        {"qse", "continue frozen-system equilibria in time"},
        {"tip", "bracket critical rates and classify them"},
        {"sweep", "evaluate rate diagnostics on an r grid"},
        {"figure", "write plotting data for a named figure"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON config with model/params/analysis/output sections");
        sub->add_option("--model", model, "model name (drift, moving-sn, moving-cubic, moving-pitchfork, bounded-ramp-sn)");
        sub->add_option("--set", sets, "key=value override, repeatable")->take_all();
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--format", format, "csv or json");
        if (name == "figure") sub->add_option("name", figure_name, "fig1..fig5");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(ExitCode::config_error);
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        std::optional<tiplab::Json> doc;
        if (!config_path.empty()) doc = read_config_file(config_path);
        auto opt = [](const std::string& s) { return s.empty() ? std::nullopt : std::optional<std::string>(s); };
        if (!figure_name.empty()) sets.push_back("figure=" + figure_name);
        const RunConfig cfg = build_config(command, doc, opt(model), sets, opt(out_dir), opt(format));
        return run(cfg);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return ExitCode::config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return ExitCode::numeric_failure;
    }
}
