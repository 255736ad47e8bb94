#pragma once

#include <functional>
#include <vector>

#include "morphkit/schedule.hpp"

namespace morphkit {

// Noise prediction at a grid state. Implementations must be pure and safe
// for concurrent read-only evaluation.
using PredictFn = std::function<Eigen::VectorXd(const LatentState&)>;

// One reverse step t -> t-1:
//   x_{t-1} = sqrt(b_{t-1}) * x0_hat + sqrt(1 - b_{t-1} - sigma^2) * eps_hat + sigma * noise
// with x0_hat = (x_t - sqrt(1 - b_t) * eps_hat) / sqrt(b_t).
// `noise` is required iff sigma_t > 0 and must match the latent shape.
LatentState ddim_reverse_step(const LatentState& x_t,
                              const Eigen::VectorXd& eps_hat,
                              const NoiseSchedule& schedule,
                              double sigma_t = 0.0,
                              const Eigen::VectorXd* noise = nullptr);

// One deterministic inversion step t -> t+1 of the probability-flow ODE:
//   x_{t+1} / sqrt(b_{t+1}) = x_t / sqrt(b_t)
//       + (sqrt((1 - b_{t+1}) / b_{t+1}) - sqrt((1 - b_t) / b_t)) * eps_hat
LatentState ode_inversion_step(const LatentState& x_t,
                               const Eigen::VectorXd& eps_hat,
                               const NoiseSchedule& schedule);

// Runs ddim_reverse_step from t = T down to 0. sigma_plan[k] is the
// stochasticity multiplier in [0, 1] for the k-th step (k = 0 starts at T);
// the effective sigma is sigma_plan[k] * schedule.max_sigma(t). `seed` fixes
// the injected noise. Aborts with the step index if the predictor returns a
// non-finite tensor.
LatentState denoise_trajectory(const LatentState& x_T,
                               const PredictFn& predict,
                               const NoiseSchedule& schedule,
                               const std::vector<double>& sigma_plan,
                               uint64_t seed);

// Runs ode_inversion_step from t = 0 up to T. Deterministic.
LatentState invert_trajectory(const LatentState& x_0,
                              const PredictFn& predict,
                              const NoiseSchedule& schedule);

}  // namespace morphkit
