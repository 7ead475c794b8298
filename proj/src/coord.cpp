#include "swarm_nmpc/coord.hpp"

#include <algorithm>
#include <set>

namespace swarm_nmpc {

std::vector<int> RoundOrder::order_for_round(int round_index) const {
    if (ids.empty()) throw std::invalid_argument("RoundOrder: empty");
    std::set<int> unique(ids.begin(), ids.end());
    if (unique.size() != ids.size()) throw std::invalid_argument("RoundOrder: not a permutation");
    if (policy == Policy::fixed || round_index <= 0) return ids;
    std::vector<int> rotated = ids;
    const int shift = round_index % static_cast<int>(ids.size());
    std::rotate(rotated.begin(), rotated.begin() + shift, rotated.end());
    return rotated;
}

std::vector<int> sensing_query(const PlanRegistry& registry, int agent_id,
                               const Scenario& sc) {
    const AgentSpec& me = sc.agent(agent_id);
    const auto it = registry.states.find(agent_id);
    if (it == registry.states.end()) {
        throw StalePlanError("sensing_query: no measured state for agent " +
                             std::to_string(agent_id));
    }
    const Vec my_pos = it->second.head(sc.position_dim());
    std::vector<int> in_range;
    for (const auto& [id, state] : registry.states) {
        if (id == agent_id) continue;
        const double dist = (my_pos - state.head(sc.position_dim())).norm();
        if (dist < me.sensing_range) in_range.push_back(id);
    }
    return in_range;  // std::map iteration keeps ids ascending
}

std::shared_ptr<const ConstraintSet> build_constraint_set(const PlanRegistry& registry,
                                                          int agent_id, const Scenario& sc,
                                                          const FhocpConfig& cfg,
                                                          int round_index) {
    const AgentSpec& me = sc.agent(agent_id);
    const int pos_dim = sc.position_dim();
    const int nodes = cfg.segment_count() + 1;

    auto cs = std::make_shared<ConstraintSet>();
    cs->owner_id = agent_id;
    cs->owner_radius = me.body_radius;
    cs->sensing_range = me.sensing_range;
    cs->clearance = sc.clearance;
    cs->node_spacing = cfg.h;
    cs->nodes = nodes;
    cs->workspace = sc.workspace;
    cs->obstacles = sc.obstacles;

    const std::vector<int> in_range = sensing_query(registry, agent_id, sc);
    std::set<int> relevant(in_range.begin(), in_range.end());
    relevant.insert(me.neighbors.begin(), me.neighbors.end());

    for (int id : relevant) {
        const auto it = registry.plans.find(id);
        if (it == registry.plans.end()) {
            throw StalePlanError("agent " + std::to_string(agent_id) +
                                 ": no plan available for in-range agent " + std::to_string(id));
        }
        const Plan& plan = it->second.plan;
        const Vec other_goal_pos = sc.agent(id).goal.head(pos_dim);

        PlanSnapshot snap;
        snap.agent_id = id;
        snap.body_radius = sc.agent(id).body_radius;
        snap.in_range = std::find(in_range.begin(), in_range.end(), id) != in_range.end();
        snap.neighbor =
            std::find(me.neighbors.begin(), me.neighbors.end(), id) != me.neighbors.end();
        snap.positions.resize(pos_dim, nodes);

        // Plans solved this round share this horizon's grid; older plans are
        // shifted one segment left and extended by holding the final state.
        const int shift = it->second.solved_round == round_index ? 0 : 1;
        const int last = static_cast<int>(plan.states.size()) - 1;
        for (int q = 0; q < nodes; ++q) {
            const int idx = std::min(q + shift, last);
            snap.positions.col(q) = plan.states[idx].head(pos_dim) + other_goal_pos;
        }
        cs->others.push_back(std::move(snap));
    }
    return cs;
}

PlanRegistry init_registry(const Scenario& sc, const std::map<int, FhocpConfig>& cfgs) {
    PlanRegistry registry;
    for (const AgentSpec& a : sc.agents) {
        const FhocpConfig& cfg = cfgs.at(a.id);
        ErrorDynamics ed(a.model, a.goal);
        const Vec e0 = a.start - a.goal;

        Plan plan;
        plan.owner_id = a.id;
        plan.round_index = -1;
        plan.solve_time = -cfg.h;
        plan.initial_error = e0;
        plan.inputs.assign(cfg.segment_count(), Vec::Zero(a.model->input_dim));
        plan.states = rollout_nodes(cfg, ed, e0, plan.inputs);
        plan.cost = evaluate_fhocp_inputs(cfg, ed, nullptr, TighteningSchedule(), e0,
                                          plan.inputs)
                        .objective;
        registry.plans[a.id] = {std::move(plan), -1};
        registry.states[a.id] = a.start;
    }
    return registry;
}

RoundResult step_round(PlanRegistry& registry, const RoundOrder& order, const Scenario& sc,
                       const std::map<int, FhocpConfig>& cfgs, const SolverSettings& st,
                       int round_index) {
    RoundResult result;
    for (int id : order.order_for_round(round_index)) {
        const AgentSpec& a = sc.agent(id);
        const FhocpConfig& cfg = cfgs.at(id);
        ErrorDynamics ed(a.model, a.goal);
        const TighteningSchedule ts(a.disturbance_bound, ed.lipschitz());

        const Vec e0 = registry.states.at(id) - a.goal;
        auto cs = build_constraint_set(registry, id, sc, cfg, round_index);

        const Plan& previous = registry.plans.at(id).plan;
        Plan warm = warm_start_shift(previous, cfg, ed, e0);

        Plan plan = solve_fhocp(cfg, ed, cs, ts, e0, warm, st);
        plan.round_index = round_index;
        plan.solve_time = round_index * cfg.h;

        result.all_feasible = result.all_feasible && plan.feasible;
        registry.plans[id] = {plan, round_index};
        result.plans.emplace(id, std::move(plan));
    }
    return result;
}

}  // namespace swarm_nmpc
