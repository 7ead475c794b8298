#include "swarm_nmpc/dynamics.hpp"

#include <cmath>
#include <cstring>

namespace swarm_nmpc {

double Rng::next_normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    // Box-Muller on hand-rolled uniforms; std distributions are not
    // bit-reproducible across standard libraries.
    double u1 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    const double u2 = next_unit();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
}

Vec Rng::unit_vector(int dim) {
    Vec v(dim);
    double norm = 0.0;
    do {
        for (int i = 0; i < dim; ++i) v[i] = next_normal();
        norm = v.norm();
    } while (norm < 1e-12);
    return v / norm;
}

Vec Rng::in_ball(int dim, double radius) {
    const double r = radius * std::pow(next_unit(), 1.0 / dim);
    return r * unit_vector(dim);
}

Vec DynamicsModel::eval(const Vec& x, const Vec& u) const {
    if (x.size() != state_dim || u.size() != input_dim) {
        throw std::invalid_argument("DynamicsModel::eval: dimension mismatch for " + name);
    }
    Vec out(state_dim);
    field_into(x, u, out);
    return out;
}

namespace {

std::shared_ptr<const DynamicsModel> finish_model(DynamicsModel m) {
    if (m.lipschitz <= 0.0) throw std::invalid_argument("model: lipschitz must be > 0");
    if (m.input_bound <= 0.0) throw std::invalid_argument("model: input_bound must be > 0");
    const Vec zero_rate = m.eval(Vec::Zero(m.state_dim), Vec::Zero(m.input_dim));
    if (!zero_rate.isZero(0.0)) {
        throw std::invalid_argument("model: f(0,0) must vanish for " + m.name);
    }
    return std::make_shared<const DynamicsModel>(std::move(m));
}

}  // namespace

std::shared_ptr<const DynamicsModel> make_unicycle_model(double lipschitz,
                                                         double input_bound) {
    DynamicsModel m;
    m.state_dim = 3;
    m.input_dim = 2;
    m.position_dim = 2;
    m.lipschitz = lipschitz;
    m.input_bound = input_bound;
    m.name = "unicycle";
    m.field_into = [](const Vec& x, const Vec& u, Vec& dx) {
        dx[0] = u[0] * std::cos(x[2]);
        dx[1] = u[0] * std::sin(x[2]);
        dx[2] = u[1];
    };
    return finish_model(std::move(m));
}

std::shared_ptr<const DynamicsModel> make_single_integrator_model(int dim,
                                                                  double lipschitz,
                                                                  double input_bound) {
    if (dim < 1) throw std::invalid_argument("single integrator: dim must be >= 1");
    DynamicsModel m;
    m.state_dim = dim;
    m.input_dim = dim;
    m.position_dim = dim;
    m.lipschitz = lipschitz;
    m.input_bound = input_bound;
    m.name = "single_integrator";
    m.field_into = [](const Vec&, const Vec& u, Vec& dx) { dx = u; };
    return finish_model(std::move(m));
}

ErrorDynamics::ErrorDynamics(std::shared_ptr<const DynamicsModel> model, Vec goal_state)
    : model_(std::move(model)), goal_(std::move(goal_state)) {
    if (!model_) throw std::invalid_argument("ErrorDynamics: null model");
    if (goal_.size() != model_->state_dim) {
        throw std::invalid_argument("ErrorDynamics: goal dimension mismatch");
    }
}

Vec ErrorDynamics::eval(const Vec& e, const Vec& u) const {
    if (e.size() != model_->state_dim) {
        throw std::invalid_argument("ErrorDynamics::eval: state dimension mismatch");
    }
    return model_->eval(e + goal_, u);
}

const Vec& PiecewiseConstantInput::at(double t) const {
    if (inputs.empty()) throw std::logic_error("PiecewiseConstantInput: empty schedule");
    const double offset = (t - start_time) / segment_len;
    long idx = static_cast<long>(std::floor(offset));
    if (idx < 0) idx = 0;
    if (idx >= static_cast<long>(inputs.size())) idx = static_cast<long>(inputs.size()) - 1;
    return inputs[static_cast<std::size_t>(idx)];
}

Vec rk4_step(const std::function<Vec(const Vec&)>& field, const Vec& x, double dt) {
    const Vec k1 = field(x);
    const Vec k2 = field(x + 0.5 * dt * k1);
    const Vec k3 = field(x + 0.5 * dt * k2);
    const Vec k4 = field(x + dt * k3);
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory integrate_rk4(const std::function<Vec(const Vec&, const Vec&)>& field,
                         const Vec& x0, const PiecewiseConstantInput& input,
                         double t0, double t1, double dt) {
    if (!(t1 > t0)) throw std::invalid_argument("integrate_rk4: requires t1 > t0");
    if (!(dt > 0.0)) throw std::invalid_argument("integrate_rk4: requires dt > 0");
    const long steps = std::lround((t1 - t0) / dt);
    if (steps < 1 || std::abs(steps * dt - (t1 - t0)) > 1e-9 * std::max(1.0, t1 - t0)) {
        throw std::invalid_argument("integrate_rk4: dt must tile [t0, t1]");
    }

    Trajectory traj;
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.times.push_back(t0);
    traj.states.push_back(x0);
    Vec x = x0;
    for (long k = 0; k < steps; ++k) {
        const double t = t0 + k * dt;
        const Vec& u = input.at(t + 0.5 * dt);
        x = rk4_step([&](const Vec& s) { return field(s, u); }, x, dt);
        if (!x.allFinite()) {
            throw IntegrationDivergedError("integrate_rk4: non-finite state at t=" +
                                           std::to_string(t + dt));
        }
        traj.times.push_back(t0 + (k + 1) * dt);
        traj.states.push_back(x);
    }
    return traj;
}

DisturbanceMode disturbance_mode_from_string(const std::string& s) {
    if (s == "zero") return DisturbanceMode::zero;
    if (s == "sinusoidal") return DisturbanceMode::sinusoidal;
    if (s == "sinusoidal_per_coordinate") return DisturbanceMode::sinusoidal_per_coordinate;
    if (s == "uniform") return DisturbanceMode::uniform;
    if (s == "adversarial") return DisturbanceMode::adversarial;
    throw ScenarioError("unknown disturbance mode: " + s);
}

std::string to_string(DisturbanceMode m) {
    switch (m) {
        case DisturbanceMode::zero: return "zero";
        case DisturbanceMode::sinusoidal: return "sinusoidal";
        case DisturbanceMode::sinusoidal_per_coordinate: return "sinusoidal_per_coordinate";
        case DisturbanceMode::uniform: return "uniform";
        case DisturbanceMode::adversarial: return "adversarial";
    }
    return "?";
}

Vec DisturbanceModel::sample(double t, int dim) const {
    switch (mode) {
        case DisturbanceMode::zero:
            return Vec::Zero(dim);
        case DisturbanceMode::sinusoidal: {
            // replicated per coordinate, rescaled so the norm tracks
            // bound * |sin(2t)| instead of sqrt(dim) times that
            const double amp = bound * std::sin(2.0 * t) / std::sqrt(double(dim));
            return amp * Vec::Ones(dim);
        }
        case DisturbanceMode::sinusoidal_per_coordinate: {
            const double amp = bound * std::sin(2.0 * t);
            return amp * Vec::Ones(dim);
        }
        case DisturbanceMode::uniform: {
            std::uint64_t key = seed;
            std::uint64_t t_bits = 0;
            static_assert(sizeof(t_bits) == sizeof(t));
            std::memcpy(&t_bits, &t, sizeof(t));
            Rng rng(splitmix64(key ^ splitmix64(t_bits)));
            return rng.in_ball(dim, bound);
        }
        case DisturbanceMode::adversarial: {
            if (direction.size() != dim) {
                throw std::invalid_argument("adversarial disturbance: direction dim mismatch");
            }
            return bound * direction;
        }
    }
    return Vec::Zero(dim);
}

DisturbanceModel make_disturbance(double bound, DisturbanceMode mode,
                                  std::uint64_t seed, Vec direction) {
    if (bound < 0.0) throw std::invalid_argument("disturbance: bound must be >= 0");
    DisturbanceModel d;
    d.bound = bound;
    d.mode = mode;
    d.seed = seed;
    if (mode == DisturbanceMode::adversarial) {
        if (direction.size() == 0 || direction.norm() < 1e-12) {
            throw std::invalid_argument("adversarial disturbance: needs a direction");
        }
        d.direction = direction / direction.norm();
    }
    return d;
}

double estimate_lipschitz(const DynamicsModel& model, const Ball& state_region,
                          double input_bound, int samples, std::uint64_t seed) {
    if (samples < 2) throw std::invalid_argument("estimate_lipschitz: samples >= 2");
    if (state_region.dim() != model.state_dim) {
        throw std::invalid_argument("estimate_lipschitz: region dimension mismatch");
    }
    if (state_region.radius <= 0.0) {
        throw std::invalid_argument("estimate_lipschitz: degenerate region");
    }
    Rng rng(seed);
    double best = 0.0;
    for (int k = 0; k < samples; ++k) {
        const Vec x = state_region.center + rng.in_ball(model.state_dim, state_region.radius);
        const Vec y = state_region.center + rng.in_ball(model.state_dim, state_region.radius);
        const double gap = (x - y).norm();
        if (gap < 1e-12) continue;
        const Vec u = rng.in_ball(model.input_dim, input_bound);
        const double quotient = (model.eval(x, u) - model.eval(y, u)).norm() / gap;
        best = std::max(best, quotient);
    }
    return best;
}

}  // namespace swarm_nmpc
