#include "swarm_nmpc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace swarm_nmpc {

namespace {

std::string describe(const ConfigCheck& check) {
    std::ostringstream os;
    for (const Violation& v : check.violations) {
        os << "\n  " << to_string(v.kind) << ": agent " << v.agent;
        if (v.other >= 0) os << " vs " << v.other;
        os << " measured " << v.measured << " threshold " << v.threshold;
    }
    return os.str();
}

}  // namespace

SimTrace run_closed_loop(const Scenario& sc, const std::map<int, FhocpConfig>& cfgs,
                         const RoundOrder& order, const SolverSettings& st,
                         const SimOptions& options) {
    validate_scenario(sc);
    if (options.rounds < 1) throw std::invalid_argument("run_closed_loop: rounds must be >= 1");

    // all agents advance in lockstep, so the sampling grid must be shared
    const FhocpConfig& cfg0 = cfgs.at(sc.agents.front().id);
    for (const AgentSpec& a : sc.agents) {
        const FhocpConfig& c = cfgs.at(a.id);
        if (c.h != cfg0.h || c.rollout_substeps != cfg0.rollout_substeps) {
            throw std::invalid_argument("run_closed_loop: agents must share h and dt");
        }
    }

    std::vector<Vec> start_positions;
    for (const AgentSpec& a : sc.agents) start_positions.push_back(a.start_position());
    const ConfigCheck start_check = check_collision_free_configuration(sc, start_positions);
    if (!start_check.ok) {
        throw InitialConfigError("initial configuration is not collision-free:" +
                                 describe(start_check));
    }
    const ConfigCheck goal_check = check_feasible_goal(sc);
    if (!goal_check.ok) {
        throw InitialConfigError("desired configuration is infeasible:" + describe(goal_check));
    }

    SimTrace trace;
    trace.h = cfg0.h;
    trace.dt = cfg0.dt();
    trace.rounds_requested = options.rounds;
    trace.disturbance_mode = options.disturbance_mode;

    std::map<int, DisturbanceModel> disturbances;
    for (const AgentSpec& a : sc.agents) {
        const std::uint64_t agent_seed = splitmix64(options.seed ^ splitmix64(a.id));
        Vec direction;
        if (options.disturbance_mode == DisturbanceMode::adversarial) {
            Rng rng(agent_seed);
            direction = rng.unit_vector(a.model->state_dim);
        }
        disturbances.emplace(a.id, make_disturbance(a.disturbance_bound,
                                                    options.disturbance_mode, agent_seed,
                                                    std::move(direction)));
        trace.effective_disturbance_bound[a.id] =
            options.disturbance_mode == DisturbanceMode::zero ? 0.0 : a.disturbance_bound;
    }

    PlanRegistry registry = init_registry(sc, cfgs);
    const int substeps = cfg0.rollout_substeps;
    const int n_agents = static_cast<int>(sc.agents.size());

    const auto emit_rows = [&](double t, const RoundRecord& rec) {
        std::vector<Vec> positions;
        positions.reserve(n_agents);
        for (const AgentSpec& a : sc.agents) {
            positions.push_back(registry.states.at(a.id).head(sc.position_dim()));
        }
        for (int i = 0; i < n_agents; ++i) {
            const AgentSpec& a = sc.agents[i];
            const AgentRoundRecord& ar = rec.agents[i];
            const ZMargins zm = z_margins(sc, positions, i);
            TraceRow row;
            row.t = t;
            row.agent_id = a.id;
            row.state = registry.states.at(a.id);
            row.input = ar.plan.inputs.front();
            row.error_norm = (registry.states.at(a.id) - a.goal).norm();
            row.j_star = ar.plan.cost;
            row.margin_inter_agent = zm.inter_agent;
            row.margin_connectivity = zm.connectivity;
            row.margin_obstacle = zm.obstacle;
            row.margin_boundary = zm.boundary;
            row.feasible = ar.plan.feasible;
            trace.rows.push_back(std::move(row));
        }
    };

    bool stop = false;
    for (int k = 0; k < options.rounds && !stop; ++k) {
        const double t_k = k * trace.h;
        RoundResult rr;
        try {
            rr = step_round(registry, order, sc, cfgs, st, k);
        } catch (const IntegrationDivergedError&) {
            trace.diverged = true;
            break;
        }

        RoundRecord rec;
        rec.round_index = k;
        rec.t = t_k;
        rec.all_feasible = rr.all_feasible;
        for (const AgentSpec& a : sc.agents) {
            AgentRoundRecord ar;
            ar.agent_id = a.id;
            ar.plan = rr.plans.at(a.id);

            // nominal prediction over the applied segment, on the dt grid
            ErrorDynamics ed(a.model, a.goal);
            PiecewiseConstantInput schedule{0.0, trace.h, {ar.plan.inputs.front()}};
            const Trajectory nominal =
                integrate_rk4([&ed](const Vec& e, const Vec& u) { return ed.eval(e, u); },
                              ar.plan.initial_error, schedule, 0.0, trace.h, trace.dt);
            ar.predicted_fine = nominal.states;
            ar.realized_fine.push_back(registry.states.at(a.id) - a.goal);
            rec.agents.push_back(std::move(ar));
        }

        for (int sub = 0; sub < substeps && !stop; ++sub) {
            const double t = t_k + sub * trace.dt;
            if (sub == 0) emit_rows(t, rec);

            // advance every agent through [t, t + dt) under its applied input
            // and a disturbance sample held constant over the step
            for (int i = 0; i < n_agents; ++i) {
                const AgentSpec& a = sc.agents[i];
                AgentRoundRecord& ar = rec.agents[i];
                const Vec& u = ar.plan.inputs.front();
                const Vec w = disturbances.at(a.id).sample(t, a.model->state_dim);
                Vec x = registry.states.at(a.id);
                x = rk4_step(
                    [&](const Vec& s) {
                        Vec dx(a.model->state_dim);
                        a.model->field_into(s, u, dx);
                        dx += w;
                        return dx;
                    },
                    x, trace.dt);
                if (!x.allFinite()) {
                    trace.diverged = true;
                    stop = true;
                    break;
                }
                ar.disturbances.push_back(w);
                ar.realized_fine.push_back(x - a.goal);
                registry.states.at(a.id) = std::move(x);
            }
            if (stop) break;

            if (sub + 1 < substeps) emit_rows(t + trace.dt, rec);

            // realized-constraint watchdog on the new sample
            std::vector<Vec> positions;
            for (const AgentSpec& a : sc.agents) {
                positions.push_back(registry.states.at(a.id).head(sc.position_dim()));
            }
            for (int i = 0; i < n_agents; ++i) {
                if (z_margins(sc, positions, i).min() < 0.0) {
                    trace.violation = true;
                    if (options.mode == SimMode::strict) {
                        trace.halted_strict = true;
                        stop = true;
                    }
                }
            }
        }

        trace.rounds.push_back(std::move(rec));
        trace.rounds_executed = k + 1;
    }

    // closing row at the final time, reusing the last round's inputs/flags
    if (!trace.rounds.empty() && !trace.diverged) {
        emit_rows(trace.rounds_executed * trace.h, trace.rounds.back());
    }
    return trace;
}

IssReport iss_decrease_check(const SimTrace& trace, const Scenario& sc,
                             const std::map<int, CostConstants>& constants,
                             double slack_tolerance) {
    IssReport report;
    for (std::size_t i = 0; i < sc.agents.size(); ++i) {
        const int id = sc.agents[i].id;
        const CostConstants& c = constants.at(id);
        const double w_eff = trace.effective_disturbance_bound.at(id);
        for (std::size_t k = 0; k + 1 < trace.rounds.size(); ++k) {
            const AgentRoundRecord& now = trace.rounds[k].agents[i];
            const AgentRoundRecord& next = trace.rounds[k + 1].agents[i];
            const double lhs = next.plan.cost - now.plan.cost;

            double integral = 0.0;
            const std::vector<Vec>& pred = now.predicted_fine;
            for (std::size_t j = 0; j + 1 < pred.size(); ++j) {
                integral += 0.5 * trace.dt *
                            (pred[j].squaredNorm() + pred[j + 1].squaredNorm());
            }
            const double rhs = c.xi * w_eff - c.rho * integral;
            report.checked += 1;
            const double slack = lhs - rhs;
            report.worst_slack = std::max(report.worst_slack, slack);
            if (slack > slack_tolerance) report.violations += 1;
        }
    }
    return report;
}

GronwallReport gronwall_audit(const SimTrace& trace, const Scenario& sc) {
    GronwallReport report;
    for (const RoundRecord& rec : trace.rounds) {
        for (std::size_t i = 0; i < rec.agents.size(); ++i) {
            const AgentRoundRecord& ar = rec.agents[i];
            const AgentSpec& a = sc.agents[i];
            const double w_eff = trace.effective_disturbance_bound.at(a.id);
            const TighteningSchedule ts(w_eff, a.model->lipschitz);
            const std::size_t count =
                std::min(ar.predicted_fine.size(), ar.realized_fine.size());
            for (std::size_t j = 1; j < count; ++j) {
                const double s = j * trace.dt;
                const double deviation =
                    (ar.realized_fine[j] - ar.predicted_fine[j]).norm();
                const double bound = ts.delta(s);
                report.samples += 1;
                if (bound > 0.0) {
                    report.max_ratio = std::max(report.max_ratio, deviation / bound);
                    if (deviation > bound * (1.0 + 1e-12)) report.violations += 1;
                } else if (deviation > 1e-12) {
                    report.violations += 1;
                    report.max_ratio = std::numeric_limits<double>::infinity();
                }
            }
        }
    }
    return report;
}

Metrics compute_metrics(const SimTrace& trace, const Scenario& sc,
                        const std::map<int, FhocpConfig>& cfgs, const IssReport& iss) {
    Metrics m;
    m.iss_violation_count = iss.violations;

    const int n_agents = static_cast<int>(sc.agents.size());
    std::vector<Vec> positions(n_agents);
    for (std::size_t r = 0; r < trace.rows.size(); r += n_agents) {
        for (int i = 0; i < n_agents; ++i) {
            positions[i] = trace.rows[r + i].state.head(sc.position_dim());
        }
        for (int i = 0; i < n_agents; ++i) {
            const AgentSpec& a = sc.agents[i];
            for (int j = i + 1; j < n_agents; ++j) {
                const double dist = (positions[i] - positions[j]).norm();
                m.min_inter_agent_distance = std::min(m.min_inter_agent_distance, dist);
            }
            for (int id : a.neighbors) {
                const double dist =
                    (positions[i] - positions[sc.index_of(id)]).norm();
                m.max_neighbor_distance = std::max(m.max_neighbor_distance, dist);
            }
            for (const Ball& o : sc.obstacles) {
                m.min_obstacle_distance =
                    std::min(m.min_obstacle_distance, (positions[i] - o.center).norm());
            }
            const double center_dist = (sc.workspace.center - positions[i]).norm();
            const double allowed = sc.workspace.radius - a.body_radius - sc.clearance;
            m.max_boundary_excursion =
                std::max(m.max_boundary_excursion, center_dist - allowed);
        }
    }

    if (!trace.rows.empty()) {
        for (int i = 0; i < n_agents; ++i) {
            const TraceRow& row = trace.rows[trace.rows.size() - n_agents + i];
            m.final_error_norms[row.agent_id] = row.error_norm;
        }
    }
    for (const AgentSpec& a : sc.agents) {
        const FhocpConfig& cfg = cfgs.at(a.id);
        Eigen::SelfAdjointEigenSolver<Mat> es(cfg.P);
        const double lmin = es.eigenvalues().minCoeff();
        const double lmax = es.eigenvalues().maxCoeff();
        m.ultimate_bound_lambda_min[a.id] = std::sqrt(cfg.eps_omega / lmin);
        m.ultimate_bound_lambda_max[a.id] = std::sqrt(cfg.eps_omega / lmax);
    }
    for (const RoundRecord& rec : trace.rounds) {
        for (const AgentRoundRecord& ar : rec.agents) {
            m.total_agent_rounds += 1;
            if (ar.plan.feasible) m.feasible_agent_rounds += 1;
        }
    }
    return m;
}

}  // namespace swarm_nmpc
