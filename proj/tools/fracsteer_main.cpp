// fracsteer <subcommand> --config <path> [--seed S] [--out DIR]
//
// subcommands: fbm-validate, solve, ledger, control-sweep, all
// exit codes:  0 all checks pass, 1 usage, 2 validation, 3 numeric

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fracsteer/harness.hpp"

int main(int argc, char** argv) {
    CLI::App app{"fractional stochastic steering toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::uint64_t seed_override = 0;
    bool have_seed = false;

    std::vector<CLI::App*> subs;
    for (const char* name : {"fbm-validate", "solve", "ledger", "control-sweep", "all"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "configuration file")->required();
        sub->add_option("--out", out_override, "output directory override");
        sub->add_option("--seed", seed_override, "base seed override")
            ->each([&](const std::string&) { have_seed = true; });
        subs.push_back(sub);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) {
            std::cerr << "error: cannot open config file '" << config_path << "'\n";
            return 2;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        fracsteer::cfg::RunConfig config = fracsteer::cfg::parse_config(buf.str());
        if (have_seed) config.seed = seed_override;
        if (!out_override.empty()) config.out_dir = out_override;

        std::string sub = app.get_subcommands().front()->get_name();
        fracsteer::harness::ExperimentReport report = fracsteer::harness::run(sub, config);
        fracsteer::harness::print_report(report, std::cout);
        return report.all_pass() ? 0 : 3;
    } catch (const fracsteer::cfg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::domain_error& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const fracsteer::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
