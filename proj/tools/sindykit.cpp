// Command-line driver: generate | fit | compare | sweep.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "sindykit/sindykit.hpp"

namespace {

struct Args {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> lambda;
    std::string data;
    std::string model;
};

void add_common(CLI::App* cmd, Args& a) {
    cmd->add_option("--config", a.config, "experiment config (JSON)")->required();
    cmd->add_option("--out", a.out, "output directory (defaults to outputs.directory)");
    cmd->add_option("--seed", a.seed, "noise seed override");
    cmd->add_option("--lambda", a.lambda, "STLSQ threshold override");
}

int run(const std::string& command, const Args& a) {
    using namespace sindykit;
    const auto raw = apply_overrides(read_json(a.config), Overrides{a.seed, a.lambda});
    const auto cfg = parse_config(raw);
    CommandOptions opt;
    opt.out_dir = a.out.empty() ? cfg.output_dir : a.out;
    if (!a.data.empty()) opt.data = a.data;
    if (!a.model.empty()) opt.model = a.model;
    nlohmann::json report;
    if (command == "generate")
        report = cmd_generate(cfg, opt);
    else if (command == "fit")
        report = cmd_fit(cfg, opt);
    else if (command == "compare")
        report = cmd_compare(cfg, opt);
    else
        report = cmd_sweep(cfg, opt);
    if (report.contains("table")) std::cout << report["table"].get<std::string>();
    if (report.contains("chosen_lambda"))
        std::cout << "chosen lambda: " << report["chosen_lambda"] << (report["elbow_fallback"].get<bool>() ? " (fallback)" : "")
                  << '\n';
    std::cout << "wrote " << (opt.out_dir / "run_report.json").string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse identification of nonlinear dynamics"};
    app.require_subcommand(1);
    Args a;
    auto* gen = app.add_subcommand("generate", "simulate the configured system and write CSV data");
    auto* fit = app.add_subcommand("fit", "identify a sparse model");
    auto* cmp = app.add_subcommand("compare", "error vs time between true and identified systems");
    auto* swp = app.add_subcommand("sweep", "threshold sweep, Pareto curve and elbow pick");
    for (auto* c : {gen, fit, cmp, swp}) add_common(c, a);
    for (auto* c : {fit, swp}) c->add_option("--data", a.data, "dataset CSV instead of simulating");
    cmp->add_option("--model", a.model, "model JSON instead of fitting");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, a);
    } catch (const sindykit::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
