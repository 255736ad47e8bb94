#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>

namespace morphkit {

// Cumulative signal-coefficient schedule: the forward corruption is
// q(x_t | x_0) = N(sqrt(beta[t]) * x_0, (1 - beta[t]) * I), with beta[0] = 1
// at the clean end and beta[T] near zero at the noisy end. Note this is the
// cumulative coefficient (the per-step product), not the per-step variance
// increment some codebases call beta.
class NoiseSchedule {
public:
    // betas must be strictly decreasing, finite, in (0, 1], with
    // betas[0] in (0.999, 1] and betas[T] in (0, 0.05).
    // timesteps[i] is the model-facing timestep of grid index i; identity
    // for a training-resolution schedule, original indices for a subsampled one.
    NoiseSchedule(std::vector<double> betas, std::vector<int> timesteps);

    explicit NoiseSchedule(std::vector<double> betas);

    int steps() const { return static_cast<int>(betas_.size()) - 1; }  // T
    double beta(int t) const { return betas_.at(t); }
    int timestep(int t) const { return timesteps_.at(t); }

    // Maximal admissible stochasticity for the step t -> t-1 (the DDPM-style
    // magnitude; always satisfies sigma^2 <= 1 - beta[t-1]).
    double max_sigma(int t) const { return sigmas_.at(t); }

    const std::vector<double>& betas() const { return betas_; }
    const std::vector<int>& timesteps() const { return timesteps_; }

    // Restrict the schedule to `steps + 1` grid points uniform in t,
    // keeping both ends.
    NoiseSchedule subsample(int steps) const;

private:
    std::vector<double> betas_;
    std::vector<int> timesteps_;
    std::vector<double> sigmas_;  // sigmas_[t] for step t -> t-1; sigmas_[0] = 0
};

// The standard scaled-linear corruption schedule discretized to
// `train_steps` steps (defaults match widespread latent-diffusion practice).
// `variance_scale` shrinks every per-step variance increment; 1.0 is the
// standard schedule, smaller values give a milder tail for small models.
NoiseSchedule make_scaled_linear_schedule(int train_steps = 1000, double variance_scale = 1.0);

// A latent tensor tagged with its position on a schedule grid.
struct LatentState {
    Eigen::VectorXd tensor;
    std::array<int, 3> shape{1, 0, 0};  // C, H, W; product must equal tensor.size()
    int t = 0;                          // grid index into the active schedule

    Eigen::Index size() const { return tensor.size(); }
};

// Throws validation_error on non-finite entries or t outside [0, schedule.steps()].
void validate_state(const LatentState& state, const NoiseSchedule& schedule, const char* op);

}  // namespace morphkit
