// Command-line front end for the scenario runner. Exit codes: 0 on success,
// 2 for configuration problems, 3 when a numerical guard trips or a run
// check fails, 1 for anything unexpected.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"

#include "zwanzig/zwanzig.hpp"

namespace {

// A config argument is either a path to a JSON file or the name of a
// built-in scenario.
std::optional<std::string> load_config_text(const std::string& arg, std::string& error) {
    std::error_code ec;
    if (std::filesystem::exists(arg, ec)) {
        std::ifstream in(arg, std::ios::binary);
        if (!in) {
            error = "cannot read '" + arg + "'";
            return std::nullopt;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        return buf.str();
    }
    if (const zwanzig::BuiltinScenario* builtin = zwanzig::find_scenario(arg))
        return builtin->config_json;
    error = "'" + arg + "' is neither a config file nor a built-in scenario name "
            "(see 'zwanzig list')";
    return std::nullopt;
}

void print_errors(const std::vector<std::string>& errors) {
    for (const auto& e : errors) std::cerr << "error: " << e << "\n";
}

int cmd_validate(const std::string& config_arg) {
    std::string load_error;
    const auto text = load_config_text(config_arg, load_error);
    if (!text) {
        std::cerr << "error: " << load_error << "\n";
        return 2;
    }
    const zwanzig::ValidationResult result = zwanzig::validate_config(*text);
    if (!result.ok()) {
        print_errors(result.errors);
        return 2;
    }
    std::cout << "ok: scenario '" << result.config->name << "', digest "
              << result.config->digest << "\n";
    return 0;
}

int cmd_run(const std::string& config_arg, const std::optional<std::uint64_t>& seed,
            const std::optional<std::string>& out) {
    std::string load_error;
    const auto text = load_config_text(config_arg, load_error);
    if (!text) {
        std::cerr << "error: " << load_error << "\n";
        return 2;
    }
    const zwanzig::ValidationResult result = zwanzig::validate_config(*text);
    if (!result.ok()) {
        print_errors(result.errors);
        return 2;
    }
    zwanzig::RunOptions opts;
    opts.seed_override = seed;
    opts.out_override = out;
    try {
        const zwanzig::RunManifest manifest = zwanzig::run_scenario(*result.config, opts);
        for (const auto& path : manifest.outputs) std::cout << "wrote " << path << "\n";
        for (const auto& check : manifest.checks)
            std::cout << "check " << check.name << ": " << (check.pass ? "pass" : "FAIL")
                      << "\n";
        if (!manifest.all_passed()) {
            std::cerr << "error: one or more run checks failed\n";
            return 3;
        }
        return 0;
    } catch (const zwanzig::NumericGuard& e) {
        std::cerr << "numerical guard: " << e.what() << "\n";
        return 3;
    } catch (const zwanzig::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_list() {
    for (const auto& s : zwanzig::list_scenarios())
        std::cout << s.name << "\n    " << s.description << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Projected quantum statistical dynamics scenario runner"};
    app.require_subcommand(1);

    std::string config_arg;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;

    CLI::App* run = app.add_subcommand("run", "run a scenario and write its artifacts");
    run->add_option("config", config_arg, "config file path or built-in scenario name")
        ->required();
    run->add_option("--seed", seed, "override the sampling seed");
    run->add_option("--out", out, "override the output directory");

    CLI::App* validate =
        app.add_subcommand("validate", "check a config and report every problem");
    validate->add_option("config", config_arg, "config file path or built-in scenario name")
        ->required();

    app.add_subcommand("list", "list built-in scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand("run")) return cmd_run(config_arg, seed, out);
        if (app.got_subcommand("validate")) return cmd_validate(config_arg);
        return cmd_list();
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
}
