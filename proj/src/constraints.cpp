#include "swarm_nmpc/constraints.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace swarm_nmpc {

int Scenario::index_of(int agent_id) const {
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (agents[i].id == agent_id) return static_cast<int>(i);
    }
    throw std::invalid_argument("Scenario: unknown agent id " + std::to_string(agent_id));
}

void validate_scenario(const Scenario& sc) {
    if (!(sc.clearance > 0.0)) throw ScenarioError("scenario: clearance must be > 0");
    if (sc.workspace.radius <= 0.0) throw ScenarioError("scenario: workspace radius must be > 0");
    const int pos_dim = sc.position_dim();
    for (std::size_t l = 0; l < sc.obstacles.size(); ++l) {
        if (sc.obstacles[l].dim() != pos_dim) {
            throw ScenarioError("obstacle " + std::to_string(l) + ": dimension mismatch");
        }
        if (sc.obstacles[l].radius <= 0.0) {
            throw ScenarioError("obstacle " + std::to_string(l) + ": radius must be > 0");
        }
    }
    if (sc.agents.empty()) throw ScenarioError("scenario: no agents");

    std::set<int> ids;
    for (const AgentSpec& a : sc.agents) {
        const std::string tag = "agent " + std::to_string(a.id);
        if (!ids.insert(a.id).second) throw ScenarioError(tag + ": duplicate id");
        if (!a.model) throw ScenarioError(tag + ": missing dynamics model");
        if (a.model->position_dim != pos_dim) {
            throw ScenarioError(tag + ": model position dimension != workspace dimension");
        }
        if (a.body_radius <= 0.0) throw ScenarioError(tag + ": body radius must be > 0");
        if (a.body_radius >= sc.workspace.radius) {
            throw ScenarioError(tag + ": body radius must be smaller than the workspace");
        }
        if (a.start.size() != a.model->state_dim || a.goal.size() != a.model->state_dim) {
            throw ScenarioError(tag + ": start/goal dimension mismatch");
        }
        if (a.input_bound <= 0.0) throw ScenarioError(tag + ": input bound must be > 0");
        if (a.disturbance_bound < 0.0) throw ScenarioError(tag + ": disturbance bound must be >= 0");
        if (a.neighbors.empty()) throw ScenarioError(tag + ": neighbor set must be nonempty");
        for (int j : a.neighbors) {
            if (j == a.id) throw ScenarioError(tag + ": lists itself as neighbor");
            bool found = false;
            for (const AgentSpec& b : sc.agents) found = found || b.id == j;
            if (!found) throw ScenarioError(tag + ": unknown neighbor id " + std::to_string(j));
        }
        // limited sensing range must still see every possible contact pair
        double contact = 0.0;
        for (const AgentSpec& b : sc.agents) {
            if (b.id != a.id) contact = std::max(contact, a.body_radius + b.body_radius);
        }
        for (const Ball& o : sc.obstacles) contact = std::max(contact, a.body_radius + o.radius);
        if (!(a.sensing_range > contact)) {
            throw ScenarioError(tag + ": sensing range must exceed every contact distance");
        }
    }
}

std::string to_string(ConstraintKind k) {
    switch (k) {
        case ConstraintKind::inter_agent: return "inter_agent";
        case ConstraintKind::connectivity: return "connectivity";
        case ConstraintKind::obstacle: return "obstacle";
        case ConstraintKind::boundary: return "boundary";
    }
    return "?";
}

ConfigCheck check_collision_free_configuration(const Scenario& sc,
                                               const std::vector<Vec>& positions) {
    if (positions.size() != sc.agents.size()) {
        throw std::invalid_argument("check_collision_free_configuration: one position per agent");
    }
    ConfigCheck out;
    const auto flag = [&out](ConstraintKind kind, int agent, int other, double measured,
                             double threshold) {
        out.ok = false;
        out.violations.push_back({kind, agent, other, measured, threshold});
    };
    for (std::size_t i = 0; i < sc.agents.size(); ++i) {
        const AgentSpec& a = sc.agents[i];
        for (std::size_t j = i + 1; j < sc.agents.size(); ++j) {
            const AgentSpec& b = sc.agents[j];
            const double dist = (positions[i] - positions[j]).norm();
            const double min_dist = a.body_radius + b.body_radius;
            if (!(dist > min_dist)) flag(ConstraintKind::inter_agent, a.id, b.id, dist, min_dist);
        }
        for (std::size_t l = 0; l < sc.obstacles.size(); ++l) {
            const double dist = (positions[i] - sc.obstacles[l].center).norm();
            const double min_dist = a.body_radius + sc.obstacles[l].radius;
            if (!(dist > min_dist)) {
                flag(ConstraintKind::obstacle, a.id, static_cast<int>(l), dist, min_dist);
            }
        }
        const double center_dist = (sc.workspace.center - positions[i]).norm();
        const double max_dist = sc.workspace.radius - a.body_radius;
        if (!(center_dist < max_dist)) {
            flag(ConstraintKind::boundary, a.id, -1, center_dist, max_dist);
        }
    }
    return out;
}

ConfigCheck check_feasible_goal(const Scenario& sc) {
    std::vector<Vec> goal_positions;
    goal_positions.reserve(sc.agents.size());
    for (const AgentSpec& a : sc.agents) goal_positions.push_back(a.goal_position());

    ConfigCheck out = check_collision_free_configuration(sc, goal_positions);
    for (const AgentSpec& a : sc.agents) {
        for (int j : a.neighbors) {
            const double dist =
                (a.goal_position() - sc.agent(j).goal_position()).norm();
            if (!(dist < a.sensing_range)) {
                out.ok = false;
                out.violations.push_back(
                    {ConstraintKind::connectivity, a.id, j, dist, a.sensing_range});
            }
        }
    }
    return out;
}

TighteningSchedule::TighteningSchedule(double w_max, double l_g)
    : disturbance_bound(w_max), lipschitz(l_g) {
    if (disturbance_bound < 0.0) {
        throw std::invalid_argument("TighteningSchedule: disturbance bound must be >= 0");
    }
    if (!(lipschitz > 0.0)) {
        throw std::invalid_argument("TighteningSchedule: Lipschitz constant must be > 0");
    }
}

std::vector<Margin> margin_vector(const ConstraintSet& cs, const Vec& own_position,
                                  double s, const TighteningSchedule& ts) {
    if (own_position.size() != cs.workspace.dim()) {
        throw std::invalid_argument("margin_vector: position dimension mismatch");
    }
    const double q_real = s / cs.node_spacing;
    const int q = static_cast<int>(std::lround(q_real));
    if (q < 0 || q >= cs.nodes || std::abs(q_real - q) > 1e-9) {
        throw std::invalid_argument("margin_vector: offset must lie on a horizon node");
    }
    std::vector<Margin> margins;
    for_each_margin(cs, own_position, q, ts.delta(s),
                    [&margins](ConstraintKind kind, int other, double value) {
                        margins.push_back({kind, other, value});
                    });
    return margins;
}

double min_margin(const std::vector<Margin>& margins) {
    double m = std::numeric_limits<double>::infinity();
    for (const Margin& x : margins) m = std::min(m, x.value);
    return m;
}

double ZMargins::min() const {
    return std::min(std::min(inter_agent, connectivity), std::min(obstacle, boundary));
}

ZMargins z_margins(const Scenario& sc, const std::vector<Vec>& positions, int agent_index) {
    const AgentSpec& a = sc.agents[agent_index];
    const Vec& p = positions[agent_index];
    const double eps = sc.clearance;
    ZMargins zm;
    for (std::size_t j = 0; j < sc.agents.size(); ++j) {
        if (static_cast<int>(j) == agent_index) continue;
        const double dist = (p - positions[j]).norm();
        const double threshold = a.body_radius + sc.agents[j].body_radius + eps;
        zm.inter_agent = std::min(zm.inter_agent, dist - threshold);
    }
    for (int id : a.neighbors) {
        const double dist = (p - positions[sc.index_of(id)]).norm();
        zm.connectivity = std::min(zm.connectivity, (a.sensing_range - eps) - dist);
    }
    for (const Ball& o : sc.obstacles) {
        const double dist = (p - o.center).norm();
        zm.obstacle = std::min(zm.obstacle, dist - (a.body_radius + o.radius + eps));
    }
    const double center_dist = (sc.workspace.center - p).norm();
    zm.boundary = (sc.workspace.radius - a.body_radius - eps) - center_dist;
    return zm;
}

}  // namespace swarm_nmpc
