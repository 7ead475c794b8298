#pragma once

#include "swarm_nmpc/geom.hpp"
#include "swarm_nmpc/types.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace swarm_nmpc {

/// Continuous-time control-affine-or-not model x' = f(x, u) with a configured
/// Lipschitz constant. The constant is trusted configuration: the tightening
/// machinery needs an upper bound over the operating region, and sampling can
/// only ever produce lower bounds (see estimate_lipschitz).
struct DynamicsModel {
    int state_dim = 0;
    int input_dim = 0;
    /// Leading state components that live in the workspace; distances and
    /// ball constraints act on these.
    int position_dim = 0;
    double lipschitz = 0.0;    // L_f, per unit state, uniform over admissible inputs
    double input_bound = 0.0;  // norm bound on u
    std::string name;
    /// Writes f(x, u) into out (pre-sized to state_dim); the allocation-free
    /// form the integrators run on.
    std::function<void(const Vec&, const Vec&, Vec&)> field_into;

    Vec eval(const Vec& x, const Vec& u) const;
};

/// [x, y, theta] with inputs [v, omega]: x' = v cos(theta), y' = v sin(theta),
/// theta' = omega.
std::shared_ptr<const DynamicsModel> make_unicycle_model(double lipschitz,
                                                         double input_bound);

/// x' = u in R^dim; the oracle workhorse for solver and Gronwall tests.
std::shared_ptr<const DynamicsModel> make_single_integrator_model(int dim,
                                                                  double lipschitz,
                                                                  double input_bound);

/// Error coordinates e = x - x_goal. The error field is exactly the plant
/// field shifted by the goal, so it inherits the model's Lipschitz constant.
class ErrorDynamics {
public:
    ErrorDynamics(std::shared_ptr<const DynamicsModel> model, Vec goal_state);

    /// g(e, u) = f(e + x_goal, u)
    Vec eval(const Vec& e, const Vec& u) const;

    /// Allocation-free form: scratch receives e + x_goal, out the field value.
    /// Both must be pre-sized to state_dim.
    void eval_into(const Vec& e, const Vec& u, Vec& scratch, Vec& out) const {
        scratch.noalias() = e + goal_;
        model_->field_into(scratch, u, out);
    }

    const DynamicsModel& model() const { return *model_; }
    const Vec& goal() const { return goal_; }
    double lipschitz() const { return model_->lipschitz; }
    int state_dim() const { return model_->state_dim; }
    int input_dim() const { return model_->input_dim; }
    int position_dim() const { return model_->position_dim; }

private:
    std::shared_ptr<const DynamicsModel> model_;
    Vec goal_;
};

/// Piecewise-constant input signal on a uniform segment grid; times past the
/// last segment hold the final input.
struct PiecewiseConstantInput {
    double start_time = 0.0;
    double segment_len = 0.0;
    std::vector<Vec> inputs;

    const Vec& at(double t) const;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;

    const Vec& back() const { return states.back(); }
};

/// One explicit RK4 step of an autonomous field.
Vec rk4_step(const std::function<Vec(const Vec&)>& field, const Vec& x, double dt);

/// Fixed-step RK4 over [t0, t1] sampling every dt. The input is held constant
/// over each dt step (evaluated at the step midpoint), so dt must divide the
/// input's segment length for the schedule to be honored exactly. Throws
/// IntegrationDivergedError on non-finite states.
Trajectory integrate_rk4(const std::function<Vec(const Vec&, const Vec&)>& field,
                         const Vec& x0, const PiecewiseConstantInput& input,
                         double t0, double t1, double dt);

enum class DisturbanceMode {
    zero,
    sinusoidal,                 // w_max * sin(2t), replicated then rescaled to norm <= w_max
    sinusoidal_per_coordinate,  // literal per-coordinate replication; norm may reach sqrt(n) * w_max
    uniform,                    // uniform in the w_max ball, pure function of (seed, t)
    adversarial,                // constant w_max push along a fixed direction
};

DisturbanceMode disturbance_mode_from_string(const std::string& s);
std::string to_string(DisturbanceMode m);

/// Bounded deterministic disturbance signal. Sampling is a pure function of
/// (model, t), so traces are reproducible without threading generator state.
struct DisturbanceModel {
    double bound = 0.0;  // w_max
    DisturbanceMode mode = DisturbanceMode::zero;
    Vec direction;            // adversarial mode; normalized at build
    std::uint64_t seed = 0;   // uniform mode

    Vec sample(double t, int dim) const;
};

DisturbanceModel make_disturbance(double bound, DisturbanceMode mode,
                                  std::uint64_t seed = 0, Vec direction = Vec());

/// Max sampled difference quotient of f over the region; a lower bound on the
/// true Lipschitz constant, for cross-checking configured values only.
double estimate_lipschitz(const DynamicsModel& model, const Ball& state_region,
                          double input_bound, int samples, std::uint64_t seed = 17);

}  // namespace swarm_nmpc
