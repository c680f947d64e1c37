// dflsim: config-driven runner for decentralized federated learning experiments.
//
//   dflsim validate SPEC
//   dflsim run SPEC [--overwrite]
//   dflsim sweep SPEC [--overwrite]
//   dflsim baseline SPEC [--overwrite]
//   dflsim netstats EDGE_LIST [--nodes N] [--output-dir DIR] [--overwrite]
//
// Environment: DFLSIM_OUTPUT_DIR overrides the spec's output_dir, DFLSIM_WORKERS the
// worker count. Exit status: 0 ok, 1 runtime error, 2 config error.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dflsim/error.hpp"
#include "dflsim/experiment.hpp"

namespace {

using namespace dflsim;

experiment::ExperimentSpec load(const std::string& path, const std::string& output_dir) {
    auto spec = experiment::load_spec(path);
    experiment::apply_environment(spec);
    if (!output_dir.empty()) spec.output_dir = output_dir;
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decentralized federated learning simulator"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "dflsim 1.0.0");

    std::string spec_path;
    std::string output_dir;
    std::string edge_list;
    std::string netstats_dir = "dflsim-out";
    std::size_t nodes = 0;
    bool overwrite = false;
    bool quiet = false;

    auto* validate = app.add_subcommand("validate", "Check a spec file without running it");
    validate->add_option("spec", spec_path, "Experiment spec (YAML)")->required();

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("spec", spec_path, "Experiment spec (YAML)")->required();
        cmd->add_option("-o,--output-dir", output_dir, "Output directory (overrides spec and environment)");
        cmd->add_flag("--overwrite", overwrite, "Replace existing artifacts");
        cmd->add_flag("-q,--quiet", quiet, "Suppress progress output");
    };
    auto* run = app.add_subcommand("run", "Run one experiment and write its artifacts");
    add_common(run);
    auto* sweep = app.add_subcommand("sweep", "Run an attack sweep (computes missing baselines first)");
    add_common(sweep);
    auto* baseline = app.add_subcommand("baseline", "Compute and cache the clean DFL and local-only baselines");
    add_common(baseline);

    auto* netstats = app.add_subcommand("netstats", "Network metrics of a topology file");
    netstats->add_option("edge_list", edge_list, "Edge list file")->required()->check(CLI::ExistingFile);
    netstats->add_option("-n,--nodes", nodes, "Node count (default: from the file)");
    netstats->add_option("-o,--output-dir", netstats_dir, "Output directory")->capture_default_str();
    netstats->add_flag("--overwrite", overwrite, "Replace existing artifacts");
    netstats->add_flag("-q,--quiet", quiet, "Suppress progress output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    experiment::RunOptions options;
    options.overwrite = overwrite;
    options.log = quiet ? nullptr : &std::cout;

    try {
        if (*validate) {
            auto spec = experiment::load_spec(spec_path);
            experiment::apply_environment(spec);
            std::cout << spec_path << ": ok\n";
        } else if (*run) {
            experiment::run(load(spec_path, output_dir), options);
        } else if (*sweep) {
            experiment::sweep(load(spec_path, output_dir), options);
        } else if (*baseline) {
            experiment::baseline(load(spec_path, output_dir), options);
        } else if (*netstats) {
            if (const char* dir = std::getenv("DFLSIM_OUTPUT_DIR"); dir && *dir && netstats->count("--output-dir") == 0)
                netstats_dir = dir;
            experiment::netstats(edge_list, nodes, netstats_dir, options);
        }
    } catch (const ConfigError& e) {
        std::cerr << "dflsim: config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "dflsim: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
