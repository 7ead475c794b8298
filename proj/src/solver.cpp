#include "swarm_nmpc/solver.hpp"

#include <algorithm>
#include <cmath>

namespace swarm_nmpc {

void validate_settings(const SolverSettings& st) {
    const bool ok = st.max_outer > 0 && st.penalty_initial > 0.0 && st.penalty_growth > 1.0 &&
                    st.penalty_cap >= st.penalty_initial && st.max_inner > 0 &&
                    st.step_initial > 0.0 && st.step_grow >= 1.0 && st.step_shrink > 0.0 &&
                    st.step_shrink < 1.0 && st.max_linesearch > 0 && st.armijo > 0.0 &&
                    st.tol_stationarity > 0.0 && st.tol_violation > 0.0 &&
                    st.tol_terminal > 0.0 && st.fd_step > 0.0 && st.tightening_cap > 0.0;
    if (!ok) throw std::invalid_argument("SolverSettings: all parameters must be positive");
}

namespace {

// Single-shooting evaluator with preallocated buffers; every objective,
// penalty and gradient evaluation in a solve goes through one instance.
class ShootingProblem {
public:
    ShootingProblem(const FhocpConfig& cfg, const ErrorDynamics& ed, const ConstraintSet* cs,
                    const TighteningSchedule& ts, const Vec& e0,
                    double tightening_cap = std::numeric_limits<double>::infinity())
        : cfg_(cfg), ed_(ed), cs_(cs), e0_(e0) {
        const int n = ed.state_dim();
        n_segments_ = cfg.segment_count();
        nodes_.assign(n_segments_ + 1, Vec::Zero(n));
        k1_ = k2_ = k3_ = k4_ = stage_ = scratch_ = Vec::Zero(n);
        if (cs_) {
            position_ = Vec::Zero(ed.position_dim());
            goal_position_ = ed.goal().head(ed.position_dim());
            deltas_.resize(n_segments_ + 1);
            for (int q = 0; q <= n_segments_; ++q) {
                deltas_[q] = std::min(ts.delta(q * cfg.h), tightening_cap);
            }
        }
    }

    FhocpEvaluation evaluate(const std::vector<Vec>& inputs) {
        rollout(inputs);
        FhocpEvaluation ev;

        double quad = 0.0;
        for (int q = 0; q < n_segments_; ++q) {
            quad += 0.5 * cfg_.h * (running_cost(cfg_, nodes_[q], inputs[q]) +
                                    running_cost(cfg_, nodes_[q + 1], inputs[q]));
        }
        const double v_terminal = terminal_cost(cfg_, nodes_[n_segments_]);
        ev.objective = quad + v_terminal;

        ev.terminal_violation = std::max(0.0, v_terminal - cfg_.eps_omega);
        ev.penalty_sq = ev.terminal_violation * ev.terminal_violation;
        if (cs_) {
            // node 0 is the measured state: data, not a decision variable
            for (int q = 1; q <= n_segments_; ++q) {
                position_.noalias() =
                    nodes_[q].head(position_.size()) + goal_position_;
                for_each_margin(*cs_, position_, q, deltas_[q],
                                [&ev](ConstraintKind, int, double margin) {
                                    if (margin < 0.0) {
                                        ev.penalty_sq += margin * margin;
                                        ev.max_margin_violation =
                                            std::max(ev.max_margin_violation, -margin);
                                    }
                                });
            }
        }
        return ev;
    }

    const std::vector<Vec>& nodes() const { return nodes_; }

private:
    void rollout(const std::vector<Vec>& inputs) {
        nodes_[0] = e0_;
        const double dt = cfg_.dt();
        for (int q = 0; q < n_segments_; ++q) {
            const Vec& u = inputs[q];
            nodes_[q + 1] = nodes_[q];
            Vec& e = nodes_[q + 1];
            for (int sub = 0; sub < cfg_.rollout_substeps; ++sub) {
                ed_.eval_into(e, u, scratch_, k1_);
                stage_.noalias() = e + (0.5 * dt) * k1_;
                ed_.eval_into(stage_, u, scratch_, k2_);
                stage_.noalias() = e + (0.5 * dt) * k2_;
                ed_.eval_into(stage_, u, scratch_, k3_);
                stage_.noalias() = e + dt * k3_;
                ed_.eval_into(stage_, u, scratch_, k4_);
                e.noalias() += (dt / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
            }
            if (!e.allFinite()) {
                throw IntegrationDivergedError("solve_fhocp: rollout diverged in segment " +
                                               std::to_string(q));
            }
        }
    }

    const FhocpConfig& cfg_;
    const ErrorDynamics& ed_;
    const ConstraintSet* cs_;
    Vec e0_;
    int n_segments_ = 0;
    std::vector<Vec> nodes_;
    std::vector<double> deltas_;
    Vec k1_, k2_, k3_, k4_, stage_, scratch_, position_, goal_position_;
};

void project_inputs(std::vector<Vec>& inputs, double bound) {
    for (Vec& u : inputs) {
        const double norm = u.norm();
        if (norm > bound) u *= bound / norm;
    }
}

std::vector<Vec> finite_difference_gradient(ShootingProblem& prob, std::vector<Vec> inputs,
                                            double mu, double fd_step) {
    std::vector<Vec> grad(inputs.size());
    for (std::size_t q = 0; q < inputs.size(); ++q) {
        grad[q] = Vec::Zero(inputs[q].size());
        for (Eigen::Index i = 0; i < inputs[q].size(); ++i) {
            const double saved = inputs[q][i];
            inputs[q][i] = saved + fd_step;
            const double f_plus = prob.evaluate(inputs).penalized(mu);
            inputs[q][i] = saved - fd_step;
            const double f_minus = prob.evaluate(inputs).penalized(mu);
            inputs[q][i] = saved;
            grad[q][i] = (f_plus - f_minus) / (2.0 * fd_step);
        }
    }
    return grad;
}

double squared_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    double s = 0.0;
    for (std::size_t q = 0; q < a.size(); ++q) s += (a[q] - b[q]).squaredNorm();
    return s;
}

}  // namespace

std::vector<Vec> rollout_nodes(const FhocpConfig& cfg, const ErrorDynamics& ed,
                               const Vec& e0, const std::vector<Vec>& inputs) {
    if (static_cast<int>(inputs.size()) != cfg.segment_count()) {
        throw std::invalid_argument("rollout_nodes: wrong number of input segments");
    }
    ShootingProblem prob(cfg, ed, nullptr, TighteningSchedule(), e0);
    prob.evaluate(inputs);
    return prob.nodes();
}

FhocpEvaluation evaluate_fhocp_inputs(const FhocpConfig& cfg, const ErrorDynamics& ed,
                                      const ConstraintSet* cs, const TighteningSchedule& ts,
                                      const Vec& e0, const std::vector<Vec>& inputs) {
    if (static_cast<int>(inputs.size()) != cfg.segment_count()) {
        throw std::invalid_argument("evaluate_fhocp_inputs: wrong number of input segments");
    }
    ShootingProblem prob(cfg, ed, cs, ts, e0);
    return prob.evaluate(inputs);
}

std::vector<Vec> objective_gradient(const FhocpConfig& cfg, const ErrorDynamics& ed,
                                    const ConstraintSet* cs, const TighteningSchedule& ts,
                                    const Vec& e0, const std::vector<Vec>& inputs,
                                    double penalty_weight, double fd_step) {
    ShootingProblem prob(cfg, ed, cs, ts, e0);
    return finite_difference_gradient(prob, inputs, penalty_weight, fd_step);
}

Plan solve_fhocp(const FhocpConfig& cfg, const ErrorDynamics& ed,
                 std::shared_ptr<const ConstraintSet> cs, const TighteningSchedule& ts,
                 const Vec& e0, const std::optional<Plan>& warm, const SolverSettings& st) {
    validate_settings(st);
    if (!cs) throw std::invalid_argument("solve_fhocp: constraint set required");
    if (!e0.allFinite()) throw std::invalid_argument("solve_fhocp: non-finite initial error");
    const int n_segments = cfg.segment_count();
    const int m = ed.input_dim();
    const double bound = ed.model().input_bound;

    std::vector<Vec> inputs;
    if (warm) {
        if (warm->owner_id != cs->owner_id) {
            throw std::invalid_argument("solve_fhocp: warm plan belongs to another agent");
        }
        if (static_cast<int>(warm->inputs.size()) != n_segments) {
            throw std::invalid_argument("solve_fhocp: warm plan has wrong segment count");
        }
        inputs = warm->inputs;
    } else {
        inputs.assign(n_segments, Vec::Zero(m));
    }
    project_inputs(inputs, bound);
    const std::vector<Vec> seed = inputs;

    ShootingProblem prob(cfg, ed, cs.get(), ts, e0, st.tightening_cap);
    FhocpEvaluation ev = prob.evaluate(inputs);
    double mu = st.penalty_initial;

    for (int outer = 0; outer < st.max_outer; ++outer) {
        double f = ev.penalized(mu);
        double step = st.step_initial;
        for (int inner = 0; inner < st.max_inner; ++inner) {
            const std::vector<Vec> grad =
                finite_difference_gradient(prob, inputs, mu, st.fd_step);

            bool accepted = false;
            double t = step * st.step_grow;
            std::vector<Vec> candidate;
            FhocpEvaluation ev_candidate;
            for (int ls = 0; ls < st.max_linesearch; ++ls) {
                candidate = inputs;
                for (int q = 0; q < n_segments; ++q) candidate[q] -= t * grad[q];
                project_inputs(candidate, bound);
                ev_candidate = prob.evaluate(candidate);
                const double move_sq = squared_distance(candidate, inputs);
                if (move_sq == 0.0) break;  // gradient step does not move the iterate
                if (ev_candidate.penalized(mu) <= f - st.armijo * move_sq / t) {
                    accepted = true;
                    break;
                }
                t *= st.step_shrink;
            }
            if (!accepted) break;

            const double move = std::sqrt(squared_distance(candidate, inputs));
            inputs.swap(candidate);
            ev = ev_candidate;
            f = ev.penalized(mu);
            step = t;
            // projected-gradient stationarity proxy
            if (move / t <= st.tol_stationarity * (1.0 + std::abs(f))) break;
        }

        const bool margins_met = ev.max_margin_violation <= st.tol_violation;
        const bool terminal_met = ev.terminal_violation <= st.tol_terminal;
        if ((margins_met && terminal_met) || mu >= st.penalty_cap) break;
        mu = std::min(mu * st.penalty_growth, st.penalty_cap);
    }

    // never return worse than the seed: a feasible warm start must survive
    if (warm) {
        const FhocpEvaluation ev_seed = prob.evaluate(seed);
        if (ev_seed.penalized(mu) < ev.penalized(mu)) {
            inputs = seed;
            ev = ev_seed;
        }
    }

    // feasibility is judged against the exact uncapped tightening
    ShootingProblem exact(cfg, ed, cs.get(), ts, e0);
    const FhocpEvaluation ev_exact = exact.evaluate(inputs);

    Plan plan;
    plan.owner_id = cs->owner_id;
    plan.initial_error = e0;
    plan.inputs = inputs;
    plan.states = exact.nodes();
    plan.cost = ev_exact.objective;
    plan.margins_ok = ev_exact.max_margin_violation <= st.tol_violation;
    plan.terminal_ok = ev_exact.terminal_violation <= st.tol_terminal;
    plan.feasible = plan.margins_ok && plan.terminal_ok;
    plan.max_violation = std::max(ev_exact.max_margin_violation, ev_exact.terminal_violation);
    plan.constraint_snapshot = std::move(cs);
    plan.warm_inputs = seed;
    return plan;
}

Plan warm_start_shift(const Plan& prev, const FhocpConfig& cfg, const ErrorDynamics& ed,
                      const Vec& new_e0) {
    if (prev.inputs.empty()) throw std::invalid_argument("warm_start_shift: empty plan");
    Plan out;
    out.owner_id = prev.owner_id;
    out.round_index = prev.round_index + 1;
    out.solve_time = prev.solve_time + cfg.h;
    out.initial_error = new_e0;

    std::vector<Vec> shifted(prev.inputs.begin() + 1, prev.inputs.end());
    // roll the shifted prefix to find where the freed final segment starts
    FhocpConfig prefix_cfg = cfg;
    Vec tail_state = new_e0;
    if (!shifted.empty()) {
        prefix_cfg.horizon = cfg.horizon - cfg.h;
        tail_state = rollout_nodes(prefix_cfg, ed, new_e0, shifted).back();
    }
    shifted.push_back(terminal_controller(cfg, tail_state, ed.model().input_bound));

    out.inputs = std::move(shifted);
    out.states = rollout_nodes(cfg, ed, new_e0, out.inputs);
    out.cost = evaluate_fhocp_inputs(cfg, ed, nullptr, TighteningSchedule(), new_e0,
                                     out.inputs)
                   .objective;
    return out;
}

}  // namespace swarm_nmpc
