#pragma once

#include "swarm_nmpc/scenario_io.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace swarm_nmpc {

inline constexpr const char* kVersion = "0.1.0";

inline constexpr int kExitOk = 0;
inline constexpr int kExitParseError = 2;
inline constexpr int kExitInitialConfig = 3;
inline constexpr int kExitStrictViolation = 4;

struct RunOptions {
    std::filesystem::path scenario_path;
    std::filesystem::path output_dir = "out";
    std::optional<std::uint64_t> seed_override;
    std::optional<SimMode> mode_override;
    bool quiet = false;
};

/// Executes the scenario and writes trace.csv, summary.json and plotdata/
/// into the output directory. Returns a CLI exit code.
int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err);

struct CheckOptions {
    std::filesystem::path scenario_path;
    bool quiet = false;
};

/// Static analysis of a scenario: configuration feasibility, structural
/// assumptions, the disturbance-bound condition and the terminal-region
/// audit. Never simulates.
int cmd_check(const CheckOptions& options, std::ostream& out, std::ostream& err);

struct SweepOptions {
    std::filesystem::path scenario_path;
    std::string parameter;  // dotted path, e.g. "agents.w_max" or "controller.T_p"
    std::vector<double> values;
    std::filesystem::path output_dir = "sweep";
    std::optional<std::uint64_t> seed_override;
    std::optional<SimMode> mode_override;
    bool quiet = false;
};

/// Runs the scenario once per grid value, one output directory per point,
/// plus an aggregate.csv. Grid points may execute concurrently; the
/// SWARM_NMPC_THREADS environment variable caps the parallelism.
int cmd_sweep(const SweepOptions& options, std::ostream& out, std::ostream& err);

/// The artifacts cmd_run writes, exposed for tests that need the contents
/// without touching the filesystem twice.
struct RunArtifacts {
    SimTrace trace;
    Metrics metrics;
    IssReport iss;
    GronwallReport gronwall;
    int exit_code = kExitOk;
};

RunArtifacts execute_run(const ScenarioBundle& bundle, const RunOptions& options,
                         std::ostream& err);

/// Writes every artifact of a completed (or partial) run.
void write_outputs(const ScenarioBundle& bundle, const RunArtifacts& artifacts,
                   const std::filesystem::path& output_dir);

}  // namespace swarm_nmpc
