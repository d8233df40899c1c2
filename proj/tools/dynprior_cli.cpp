// dynprior: dynamic-prior Thompson Sampling solver and experiment harnesses.
//
//   dynprior prior    --n 1000000 --successes 50000 --epsilon 0.05 --r 0.01
//   dynprior validate [--config cfg.json] [--out dir] [--seed N] [--set k=v]... [--strict]
//   dynprior simulate [--config cfg.json] [--out dir] [--seed N] [--set k=v]...
//   dynprior report   --in dir [--out dir]

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "dynprior/app.hpp"

namespace {

void add_common(CLI::App* cmd, dynprior::app::CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "JSON config file");
    cmd->add_option("--out", opts.output_dir, "Output directory")->capture_default_str();
    cmd->add_option("--seed", opts.seed, "Master seed (default 20250101)");
    cmd->add_option("--set", opts.overrides, "Override a config key: key=value (repeatable)")
        ->allow_extra_args(false);
}

}  // namespace

int main(int argc, char** argv) {
    using namespace dynprior::app;

    CLI::App cli{"Dynamic-prior Thompson Sampling toolkit"};
    cli.require_subcommand(1);

    PriorArgs prior;
    auto* prior_cmd = cli.add_subcommand("prior", "Solve the dynamic prior for one incumbent arm");
    prior_cmd->add_option("--n", prior.n_k, "Incumbent observation count")->required();
    prior_cmd->add_option("--successes", prior.successes, "Incumbent success count")->required();
    prior_cmd->add_option("--epsilon", prior.epsilon, "Target exploration probability")
        ->capture_default_str();
    prior_cmd->add_option("--r", prior.r, "Prior strength")->capture_default_str();
    prior_cmd->add_option("--samples", prior.samples, "Monte Carlo samples for the sanity check")
        ->capture_default_str();
    prior_cmd->add_option("--seed", prior.seed, "Seed for the sanity check")->capture_default_str();

    CommonOptions validate_opts;
    bool strict = false;
    auto* validate_cmd = cli.add_subcommand("validate", "Monte Carlo calibration sweep");
    add_common(validate_cmd, validate_opts);
    validate_cmd->add_flag("--strict", strict, "Exit 1 when calibration thresholds fail");

    CommonOptions simulate_opts;
    auto* simulate_cmd = cli.add_subcommand("simulate", "Batched insertion simulation");
    add_common(simulate_cmd, simulate_opts);

    std::string report_in;
    std::string report_out;
    auto* report_cmd = cli.add_subcommand("report", "Merge validation and simulation outputs");
    report_cmd->add_option("--in", report_in, "Directory holding summary.json and simulation.json")
        ->required();
    report_cmd->add_option("--out", report_out, "Where to write report.json (default: --in)");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = cli.exit(e);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (*prior_cmd) return cmd_prior(prior, std::cout, std::cerr);
        if (*validate_cmd) return cmd_validate(validate_opts, strict, std::cout, std::cerr);
        if (*simulate_cmd) return cmd_simulate(simulate_opts, std::cout, std::cerr);
        if (*report_cmd)
            return cmd_report(report_in, report_out.empty() ? report_in : report_out, std::cout,
                              std::cerr);
    } catch (const dynprior::error& e) {
        std::cerr << "dynprior: " << e.what() << '\n';
        return kUsageError;
    }
    return kUsageError;
}
