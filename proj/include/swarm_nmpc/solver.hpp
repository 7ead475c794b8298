#pragma once

#include "swarm_nmpc/constraints.hpp"
#include "swarm_nmpc/dynamics.hpp"
#include "swarm_nmpc/ocp.hpp"

#include <limits>
#include <memory>
#include <optional>
#include <vector>

namespace swarm_nmpc {

/// Quadratic-penalty / projected-gradient solver knobs. The method needs no
/// external NLP dependency and is deterministic: fixed evaluation order, no
/// randomness, no wall-clock dependence.
struct SolverSettings {
    int max_outer = 6;              // penalty stages
    double penalty_initial = 10.0;
    double penalty_growth = 10.0;
    double penalty_cap = 1e5;
    int max_inner = 120;            // projected-gradient iterations per stage
    double step_initial = 0.5;
    double step_grow = 1.5;
    double step_shrink = 0.5;
    int max_linesearch = 30;
    double armijo = 1e-4;
    double tol_stationarity = 1e-7;
    double tol_violation = 1e-3;    // tightened-margin violation at nodes
    double tol_terminal = 1e-5;     // slack on V(e_N) <= eps_omega
    double fd_step = 1e-6;          // central-difference step for gradients
    /// Saturation on the tightening amount inside the penalty terms only.
    /// When delta(s) outgrows the constraint geometry the restricted sets
    /// empty out and the exact penalties become contradictory at every input;
    /// capping keeps the penalized subproblem well-posed. Feasibility flags
    /// and reported margins always use the exact uncapped tightening, so
    /// plans over empty restricted sets still come back flagged infeasible.
    double tightening_cap = std::numeric_limits<double>::infinity();
};

void validate_settings(const SolverSettings& st);

/// One agent's open-loop solution: piecewise-constant inputs on the h-grid
/// and the RK4 rollout they induce from the measured initial error. Carries
/// the constraint snapshot and warm-start seed it was solved against so a
/// round can be replayed bit-for-bit from the plan alone.
struct Plan {
    int owner_id = 0;
    int round_index = -1;
    double solve_time = 0.0;  // t_k
    Vec initial_error;
    std::vector<Vec> inputs;  // segment_count entries, each norm <= input bound
    std::vector<Vec> states;  // segment_count + 1 node states (error coordinates)
    double cost = 0.0;        // discretized objective, unpenalized
    bool feasible = false;    // margins_ok && terminal_ok
    bool margins_ok = false;
    bool terminal_ok = false;
    double max_violation = 0.0;
    std::shared_ptr<const ConstraintSet> constraint_snapshot;
    std::vector<Vec> warm_inputs;  // seed the solve started from
};

/// Node states of the RK4 rollout of the given inputs from e0.
std::vector<Vec> rollout_nodes(const FhocpConfig& cfg, const ErrorDynamics& ed,
                               const Vec& e0, const std::vector<Vec>& inputs);

struct FhocpEvaluation {
    double objective = 0.0;             // trapezoidal running cost + terminal cost
    double penalty_sq = 0.0;            // sum of squared constraint violations
    double max_margin_violation = 0.0;  // worst tightened-margin violation over nodes 1..N
    double terminal_violation = 0.0;    // max(0, V(e_N) - eps_omega)

    double penalized(double mu) const { return objective + mu * penalty_sq; }
};

/// Objective and constraint-violation measures for an input sequence. Node 0
/// margins are excluded: the initial state is data, not a decision variable.
/// cs may be null to evaluate the plain objective only.
FhocpEvaluation evaluate_fhocp_inputs(const FhocpConfig& cfg, const ErrorDynamics& ed,
                                      const ConstraintSet* cs, const TighteningSchedule& ts,
                                      const Vec& e0, const std::vector<Vec>& inputs);

/// Central finite-difference gradient of the penalized discretized objective,
/// one vector per input segment.
std::vector<Vec> objective_gradient(const FhocpConfig& cfg, const ErrorDynamics& ed,
                                    const ConstraintSet* cs, const TighteningSchedule& ts,
                                    const Vec& e0, const std::vector<Vec>& inputs,
                                    double penalty_weight, double fd_step);

/// Solves the tightened finite-horizon problem by single shooting over
/// piecewise-constant inputs. Always returns a plan: when no penalty level
/// reaches the violation tolerances within budget, the best-effort plan is
/// flagged infeasible rather than thrown away, so over-tightening shows up as
/// detectable infeasibility downstream.
Plan solve_fhocp(const FhocpConfig& cfg, const ErrorDynamics& ed,
                 std::shared_ptr<const ConstraintSet> cs, const TighteningSchedule& ts,
                 const Vec& e0, const std::optional<Plan>& warm, const SolverSettings& st);

/// The shifted-and-extended candidate for the next sampling instant: previous
/// inputs moved left one segment, the freed final segment filled by the
/// terminal feedback evaluated at the shifted rollout's endpoint, and the
/// trajectory re-rolled from the newly measured error.
Plan warm_start_shift(const Plan& prev, const FhocpConfig& cfg, const ErrorDynamics& ed,
                      const Vec& new_e0);

}  // namespace swarm_nmpc
