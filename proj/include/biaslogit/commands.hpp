#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

namespace biaslogit {

enum ExitCode : int {
    kExitOk = 0,
    kExitCertificateFailed = 1,  // --strict only
    kExitConfigError = 2,
    kExitRunAborted = 3,
};

struct CommandOptions {
    std::filesystem::path config;
    std::optional<std::filesystem::path> out;  // overrides output_dir from the config
    bool strict = false;
    bool resume = false;
    unsigned threads = 1;
};

/// Simulates one scenario and writes trajectory.csv, certificates.json,
/// summary.json and the resolved config.json to the output directory.
int cmd_run(const CommandOptions& options, std::ostream& out, std::ostream& err);

/// Evaluates the sufficient gain condition without simulating.
int cmd_check_gains(const CommandOptions& options, std::ostream& out, std::ostream& err);

/// One run per sweep value in run_NNN/ directories plus summary.csv.
int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err);

}  // namespace biaslogit
