#pragma once

#include "swarm_nmpc/ocp.hpp"
#include "swarm_nmpc/sim.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace swarm_nmpc {

/// Fully parsed scenario file: the physical scenario, one controller config
/// per agent, solver settings, simulation options and the round order. The
/// canonical json is kept for hashing and round-tripping.
struct ScenarioBundle {
    Scenario scenario;
    std::map<int, FhocpConfig> configs;
    SolverSettings solver;
    SimOptions sim_options;
    RoundOrder order;
    nlohmann::ordered_json canonical;

    std::map<int, CostConstants> cost_constants() const;
    std::map<int, double> error_norm_bounds() const;
};

/// Parses and validates a scenario document. Unknown keys are rejected with
/// their path; structural invariants (sensing ranges, neighbor sets, grid
/// integrality, tolerance coupling) are re-checked after parse. Throws
/// ScenarioError with a line diagnostic on malformed input.
ScenarioBundle parse_scenario(const nlohmann::ordered_json& doc);
ScenarioBundle load_scenario_file(const std::filesystem::path& path);

/// Canonical serialization; parse(serialize(bundle)) reproduces the bundle
/// exactly.
nlohmann::ordered_json scenario_to_json(const ScenarioBundle& bundle);

/// FNV-1a over the canonical document, hex-encoded; pins a run to its exact
/// configuration in summary files.
std::string config_hash(const ScenarioBundle& bundle);

/// Fixed 12-significant-digit formatting shared by every CSV the tool emits,
/// so regression artifacts diff cleanly.
std::string format_number(double v);

/// Conservative sup ||e|| over the error constraint set, used for the cost
/// Lipschitz constants: the workspace position diameter, plus a heading
/// allowance for models with angular coordinates.
double default_error_norm_bound(const DynamicsModel& model, const Ball& workspace);

}  // namespace swarm_nmpc
