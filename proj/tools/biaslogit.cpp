#include <iostream>

#include "CLI11.hpp"

#include "biaslogit/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Logit dynamics under biased cost perception: simulation and certificates"};
    app.require_subcommand(1);

    biaslogit::CommandOptions options;
    std::string config, out;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "experiment configuration (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_flag("--strict", options.strict,
                      "nonzero exit when a certificate fails or the gain condition is unmet");
    };

    auto* run = app.add_subcommand("run", "simulate one scenario and certify it");
    add_common(run);
    run->add_option("--out", out, "output directory (overrides output_dir)");

    auto* check = app.add_subcommand("check-gains", "evaluate the sufficient gain condition");
    add_common(check);

    auto* sweep = app.add_subcommand("sweep", "one run per value of the sweep parameter");
    add_common(sweep);
    sweep->add_option("--out", out, "output directory (overrides output_dir)");
    sweep->add_flag("--resume", options.resume, "skip runs whose summary says complete");
    sweep->add_option("--threads", options.threads, "worker threads (0 = all cores)")
        ->check(CLI::NonNegativeNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : biaslogit::kExitConfigError;
    }

    options.config = config;
    if (!out.empty()) options.out = out;
    if (*run) return biaslogit::cmd_run(options, std::cout, std::cerr);
    if (*check) return biaslogit::cmd_check_gains(options, std::cout, std::cerr);
    return biaslogit::cmd_sweep(options, std::cout, std::cerr);
}
