#include "drcc/cli.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
    using namespace drcc::cli;

    CLI::App app{"Chance-constrained collision avoidance: single episodes, sweeps and config checks"};
    app.set_version_flag("--version", std::string(drcc::kCodeVersion));
    app.require_subcommand(1);

    RunOptions run;
    std::string run_config, run_manifest, run_propagator;
    std::uint64_t run_seed = 0;
    double run_epsilon = 0.0;
    auto* run_cmd = app.add_subcommand("run", "Run one closed-loop episode");
    auto* o_config = run_cmd->add_option("--config", run_config, "Scenario config (JSON); defaults when omitted")
                         ->check(CLI::ExistingFile);
    auto* o_manifest = run_cmd->add_option("--manifest", run_manifest, "Re-run the config stored in a run manifest")
                           ->check(CLI::ExistingFile)
                           ->excludes(o_config);
    auto* o_seed = run_cmd->add_option("--seed", run_seed, "Master seed");
    auto* o_prop = run_cmd->add_option("--propagator", run_propagator, "linear | ut | mc");
    auto* o_eps = run_cmd->add_option("--epsilon", run_epsilon, "Allowed collision probability");
    run_cmd->add_option("--out", run.out_dir, "Output directory")->capture_default_str();
    run_cmd->add_flag("--no-control", run.no_control, "Disable the controller (uncontrolled flyby)");

    SweepOptions sweep;
    std::string sweep_config;
    auto* sweep_cmd = app.add_subcommand("sweep", "Batch episodes over one parameter axis");
    auto* s_config = sweep_cmd->add_option("--config", sweep_config, "Base scenario config")->check(CLI::ExistingFile);
    sweep_cmd->add_option("--axis", sweep.axis, "epsilon | q_scale | propagator")->required();
    sweep_cmd->add_option("--values", sweep.values, "Axis values (space or comma separated)")
        ->required()
        ->delimiter(',');
    sweep_cmd->add_option("--propagators", sweep.propagators, "Propagators for numeric axes")
        ->delimiter(',')
        ->capture_default_str();
    sweep_cmd->add_option("--runs", sweep.runs, "Episodes per sweep point")->capture_default_str();
    sweep_cmd->add_option("--seed", sweep.seed, "Master seed")->capture_default_str();
    sweep_cmd->add_option("--out", sweep.out_dir, "Output directory")->capture_default_str();
    sweep_cmd->add_flag("--quiet", sweep.quiet, "No per-episode progress on stderr");

    std::string validate_config;
    bool validate_dump = false;
    auto* validate_cmd = app.add_subcommand("validate", "Check a config file and print its hash");
    validate_cmd->add_option("--config", validate_config, "Scenario config")->required()->check(CLI::ExistingFile);
    validate_cmd->add_flag("--dump", validate_dump, "Print the fully-defaulted config instead");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitError;
    }

    if (run_cmd->parsed()) {
        if (*o_config) run.config_path = run_config;
        if (*o_manifest) run.manifest_path = run_manifest;
        if (*o_seed) run.seed = run_seed;
        if (*o_prop) run.propagator = run_propagator;
        if (*o_eps) run.epsilon = run_epsilon;
        return cmd_run(run);
    }
    if (sweep_cmd->parsed()) {
        if (*s_config) sweep.config_path = sweep_config;
        return cmd_sweep(sweep);
    }
    return cmd_validate(validate_config, validate_dump);
}
