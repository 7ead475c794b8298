#pragma once

#include "swarm_nmpc/dynamics.hpp"
#include "swarm_nmpc/geom.hpp"
#include "swarm_nmpc/types.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

namespace swarm_nmpc {

struct AgentSpec {
    int id = 0;
    double body_radius = 0.0;
    double sensing_range = 0.0;
    std::vector<int> neighbors;  // fixed connectivity set, stored as given
    Vec start;                   // full state
    Vec goal;                    // full state x_des
    double input_bound = 0.0;       // u_max
    double disturbance_bound = 0.0; // w_max
    std::shared_ptr<const DynamicsModel> model;

    Vec start_position() const { return start.head(model->position_dim); }
    Vec goal_position() const { return goal.head(model->position_dim); }
};

struct Scenario {
    Ball workspace;
    std::vector<Ball> obstacles;
    std::vector<AgentSpec> agents;
    double clearance = 0.0;  // the epsilon buffer baked into every state constraint

    int position_dim() const { return workspace.dim(); }
    int index_of(int agent_id) const;
    const AgentSpec& agent(int agent_id) const { return agents[index_of(agent_id)]; }
};

/// Structural checks (dimensions, sensing range vs radii, nonempty neighbor
/// sets, positive radii). Throws ScenarioError on the first failure.
void validate_scenario(const Scenario& sc);

enum class ConstraintKind { inter_agent, connectivity, obstacle, boundary };
std::string to_string(ConstraintKind k);

struct Violation {
    ConstraintKind kind = ConstraintKind::inter_agent;
    int agent = 0;
    int other = -1;  // agent id, obstacle index, or -1 for boundary
    double measured = 0.0;
    double threshold = 0.0;
};

struct ConfigCheck {
    bool ok = true;
    std::vector<Violation> violations;
};

/// Collision-free configuration at an instant: pairwise separation, obstacle
/// separation and boundary containment, all strict.
ConfigCheck check_collision_free_configuration(const Scenario& sc,
                                               const std::vector<Vec>& positions);

/// Goal feasibility: the goals form a collision-free configuration and every
/// neighbor pair's goals are strictly within sensing range.
ConfigCheck check_feasible_goal(const Scenario& sc);

/// delta(s) = (w_max / L_g) (e^{L_g s} - 1): the Gronwall envelope on the gap
/// between a disturbed trajectory and its nominal prediction, used to shrink
/// constraints along the horizon.
struct TighteningSchedule {
    double disturbance_bound = 0.0;  // w_max >= 0 (zero disables tightening)
    double lipschitz = 1.0;          // L_g > 0

    TighteningSchedule() = default;
    TighteningSchedule(double w_max, double l_g);

    double delta(double s) const {
        return disturbance_bound / lipschitz * std::expm1(lipschitz * s);
    }
};

/// Another agent's predicted positions resampled onto the owner's horizon
/// grid, plus which constraint families it participates in.
struct PlanSnapshot {
    int agent_id = 0;
    double body_radius = 0.0;
    bool in_range = false;  // inter-agent collision constraint applies
    bool neighbor = false;  // connectivity constraint applies
    Mat positions;          // position_dim x (nodes), column q = predicted position at offset q*h
};

/// Immutable snapshot of everything one agent's FHOCP constraints need:
/// captures the four constraint families of the tightened state set.
struct ConstraintSet {
    int owner_id = 0;
    double owner_radius = 0.0;
    double sensing_range = 0.0;
    double clearance = 0.0;
    double node_spacing = 0.0;  // h
    int nodes = 0;              // N_seg + 1
    Ball workspace;
    std::vector<Ball> obstacles;
    std::vector<PlanSnapshot> others;
};

struct Margin {
    ConstraintKind kind = ConstraintKind::boundary;
    int other = -1;
    double value = 0.0;  // positive = satisfied
};

/// Visits every tightened margin of the owner at the given node without
/// allocating: fn(kind, other_id, margin). delta is the tightening amount at
/// the node's horizon offset. margin_vector and the solver's penalty both run
/// on this single code path.
template <typename F>
void for_each_margin(const ConstraintSet& cs, const Vec& own_position, int node,
                     double delta, F&& fn) {
    const double eps = cs.clearance;
    for (const PlanSnapshot& other : cs.others) {
        const double dist = (own_position - other.positions.col(node)).norm();
        if (other.in_range) {
            const double threshold = cs.owner_radius + other.body_radius + eps + delta;
            fn(ConstraintKind::inter_agent, other.agent_id, dist - threshold);
        }
        if (other.neighbor) {
            const double threshold = cs.sensing_range - eps - delta;
            fn(ConstraintKind::connectivity, other.agent_id, threshold - dist);
        }
    }
    for (std::size_t l = 0; l < cs.obstacles.size(); ++l) {
        const double dist = (own_position - cs.obstacles[l].center).norm();
        const double threshold = cs.owner_radius + cs.obstacles[l].radius + eps + delta;
        fn(ConstraintKind::obstacle, static_cast<int>(l), dist - threshold);
    }
    const double center_dist = (cs.workspace.center - own_position).norm();
    const double boundary_limit = cs.workspace.radius - cs.owner_radius - eps - delta;
    fn(ConstraintKind::boundary, -1, boundary_limit - center_dist);
}

/// Signed tightened margins for the owner at horizon offset s (which must lie
/// on a node). Positive means satisfied with room; the tightened thresholds
/// are the nominal epsilon-buffered ones shrunk further by delta(s).
std::vector<Margin> margin_vector(const ConstraintSet& cs, const Vec& own_position,
                                  double s, const TighteningSchedule& ts);

double min_margin(const std::vector<Margin>& margins);

/// Untightened margins of the realized state against the epsilon-buffered
/// constraint set, used when auditing closed-loop traces. Inter-agent margins
/// are evaluated against every other agent (pairs beyond sensing range are
/// far from binding by Assumption-2-style sensing geometry).
struct ZMargins {
    double inter_agent = std::numeric_limits<double>::infinity();
    double connectivity = std::numeric_limits<double>::infinity();
    double obstacle = std::numeric_limits<double>::infinity();
    double boundary = std::numeric_limits<double>::infinity();

    double min() const;
};

ZMargins z_margins(const Scenario& sc, const std::vector<Vec>& positions, int agent_index);

}  // namespace swarm_nmpc
