#pragma once

#include "swarm_nmpc/constraints.hpp"
#include "swarm_nmpc/solver.hpp"

#include <map>
#include <memory>
#include <optional>
#include <vector>

namespace swarm_nmpc {

/// Latest plan per agent tagged with the round it was solved in, plus the
/// current measured full states. The invariant during a round: agents earlier
/// in the order hold plans tagged with the current round, later ones with the
/// previous round.
struct PlanRegistry {
    struct Entry {
        Plan plan;
        int solved_round = -1;
    };
    std::map<int, Entry> plans;   // agent id -> latest plan
    std::map<int, Vec> states;    // agent id -> measured full state
};

/// Order in which agents solve within a round. The rotating policy advances
/// the starting agent by one each round; fixed is the regression default.
struct RoundOrder {
    enum class Policy { fixed, rotating };
    std::vector<int> ids;
    Policy policy = Policy::fixed;

    std::vector<int> order_for_round(int round_index) const;
};

/// Agents strictly within sensing range of agent i at the registry's current
/// states; ids ascending.
std::vector<int> sensing_query(const PlanRegistry& registry, int agent_id,
                               const Scenario& sc);

/// Snapshot of everything agent i's solve may read at round k: plans of
/// in-range and neighbor agents resampled onto i's horizon grid. Plans from
/// the previous round are time-shifted by one segment and extended by holding
/// their final state; plans solved this round align directly. Missing plans
/// raise StalePlanError.
std::shared_ptr<const ConstraintSet> build_constraint_set(const PlanRegistry& registry,
                                                          int agent_id, const Scenario& sc,
                                                          const FhocpConfig& cfg,
                                                          int round_index);

/// Registry at round -1: every agent holds the rollout of a zero input
/// sequence from its start, the deterministic stand-in before anyone has
/// solved.
PlanRegistry init_registry(const Scenario& sc, const std::map<int, FhocpConfig>& cfgs);

struct RoundResult {
    std::map<int, Plan> plans;
    bool all_feasible = true;
};

/// One sequential solve round at t_k = round_index * h: each agent in order
/// builds its snapshot from the registry, solves warm-started from its own
/// shifted previous plan, and publishes the result tagged with this round.
/// Solver infeasibility is recorded per agent, never aborts the round.
RoundResult step_round(PlanRegistry& registry, const RoundOrder& order, const Scenario& sc,
                       const std::map<int, FhocpConfig>& cfgs, const SolverSettings& st,
                       int round_index);

}  // namespace swarm_nmpc
