#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace swarm_nmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Scenario-file parse or validation failure (CLI exit code 2).
struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Starting configuration violates the collision-free or goal-feasibility
/// requirements (CLI exit code 3).
struct InitialConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An in-range agent has no plan in the registry when one is required.
struct StalePlanError : std::logic_error {
    using std::logic_error::logic_error;
};

/// A numerical integration produced a non-finite state.
struct IntegrationDivergedError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic counter-based mixing; used wherever reproducible pseudo-random
// draws are needed without carrying mutable generator state through pure APIs.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Small deterministic PRNG with explicit state, identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Standard normal via Box-Muller.
    double next_normal();

    /// Uniform direction on the unit sphere in R^dim.
    Vec unit_vector(int dim);

    /// Uniform sample from the closed ball of given radius in R^dim.
    Vec in_ball(int dim, double radius);

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace swarm_nmpc
