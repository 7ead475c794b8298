#pragma once

#include "swarm_nmpc/coord.hpp"

#include <map>
#include <vector>

namespace swarm_nmpc {

enum class SimMode { strict, diagnostic };

struct SimOptions {
    int rounds = 0;
    std::uint64_t seed = 0;
    DisturbanceMode disturbance_mode = DisturbanceMode::zero;
    SimMode mode = SimMode::diagnostic;
};

/// One per-agent sample of the closed-loop trace, written every integrator
/// step. The input column is the one active over [t, t + dt); margins are the
/// realized state's distances to the epsilon-buffered (untightened)
/// constraint thresholds.
struct TraceRow {
    double t = 0.0;
    int agent_id = 0;
    Vec state;
    Vec input;
    double error_norm = 0.0;
    double j_star = 0.0;
    double margin_inter_agent = 0.0;
    double margin_connectivity = 0.0;
    double margin_obstacle = 0.0;
    double margin_boundary = 0.0;
    bool feasible = false;
};

/// Everything one agent contributed to one round: the plan, the nominal
/// prediction over the applied segment, the realized error trajectory on the
/// same dt grid, and the disturbance samples that drove the gap.
struct AgentRoundRecord {
    int agent_id = 0;
    Plan plan;
    std::vector<Vec> predicted_fine;  // error coords, substeps+1 entries
    std::vector<Vec> realized_fine;   // error coords, substeps+1 entries
    std::vector<Vec> disturbances;    // substeps entries
};

struct RoundRecord {
    int round_index = 0;
    double t = 0.0;
    bool all_feasible = false;
    std::vector<AgentRoundRecord> agents;  // scenario order
};

struct SimTrace {
    double dt = 0.0;
    double h = 0.0;
    int rounds_requested = 0;
    int rounds_executed = 0;
    bool diverged = false;
    bool violation = false;      // some realized margin went negative
    bool halted_strict = false;  // run stopped early because of it
    DisturbanceMode disturbance_mode = DisturbanceMode::zero;
    std::map<int, double> effective_disturbance_bound;  // 0 for the zero mode
    std::vector<TraceRow> rows;
    std::vector<RoundRecord> rounds;
};

/// Closed-loop execution: per round, the sequential solve, then every agent
/// applies its first input segment to the true disturbed dynamics in
/// lockstep. The disturbance realization is sampled on the dt grid and held
/// constant per step. Deterministic under a fixed seed. Throws
/// InitialConfigError when the start or the goals violate their feasibility
/// definitions. In strict mode a realized constraint violation truncates the
/// run; in diagnostic mode it is recorded and the run continues.
SimTrace run_closed_loop(const Scenario& sc, const std::map<int, FhocpConfig>& cfgs,
                         const RoundOrder& order, const SolverSettings& st,
                         const SimOptions& options);

/// Per-round optimal-cost decrease audit:
///   J*(t_{k+1}) - J*(t_k) <= xi * w_eff - rho * integral ||e_pred(s)||^2 ds
/// with the integral taken by trapezoid over the applied segment of round k's
/// nominal prediction.
struct IssReport {
    int checked = 0;
    int violations = 0;
    double worst_slack = -std::numeric_limits<double>::infinity();  // max of lhs - rhs
};

IssReport iss_decrease_check(const SimTrace& trace, const Scenario& sc,
                             const std::map<int, CostConstants>& constants,
                             double slack_tolerance);

/// Realized-vs-predicted deviation against the Gronwall envelope delta(s),
/// per round and per dt offset within the applied segment.
struct GronwallReport {
    int samples = 0;
    int violations = 0;
    double max_ratio = 0.0;  // worst deviation / delta(s)
};

GronwallReport gronwall_audit(const SimTrace& trace, const Scenario& sc);

struct Metrics {
    double min_inter_agent_distance = std::numeric_limits<double>::infinity();
    double max_neighbor_distance = 0.0;
    double min_obstacle_distance = std::numeric_limits<double>::infinity();
    /// max over samples of (distance from center) - (r_D - r_i - eps); <= 0
    /// means the boundary constraint held everywhere.
    double max_boundary_excursion = -std::numeric_limits<double>::infinity();
    std::map<int, double> final_error_norms;
    std::map<int, double> ultimate_bound_lambda_min;  // sqrt(eps_omega / lambda_min(P))
    std::map<int, double> ultimate_bound_lambda_max;  // sqrt(eps_omega / lambda_max(P))
    int iss_violation_count = 0;
    int total_agent_rounds = 0;
    int feasible_agent_rounds = 0;
};

Metrics compute_metrics(const SimTrace& trace, const Scenario& sc,
                        const std::map<int, FhocpConfig>& cfgs, const IssReport& iss);

}  // namespace swarm_nmpc
