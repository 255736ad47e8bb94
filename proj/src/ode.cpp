#include "morphkit/ode.hpp"

#include <cmath>
#include <string>

#include "morphkit/errors.hpp"
#include "morphkit/rng.hpp"

namespace morphkit {

LatentState ddim_reverse_step(const LatentState& x_t,
                              const Eigen::VectorXd& eps_hat,
                              const NoiseSchedule& schedule,
                              double sigma_t,
                              const Eigen::VectorXd* noise) {
    validate_state(x_t, schedule, "ddim_reverse_step");
    if (x_t.t < 1) {
        throw validation_error("ddim_reverse_step: already at t=0");
    }
    if (!eps_hat.allFinite() || eps_hat.size() != x_t.tensor.size()) {
        throw validation_error("ddim_reverse_step: eps_hat non-finite or shape mismatch");
    }
    if (!std::isfinite(sigma_t) || sigma_t < 0.0) {
        throw validation_error("ddim_reverse_step: sigma_t must be finite and >= 0");
    }
    if (sigma_t > 0.0 && (noise == nullptr || noise->size() != x_t.tensor.size())) {
        throw validation_error("ddim_reverse_step: noise required when sigma_t > 0");
    }

    const double b = schedule.beta(x_t.t);
    const double b_prev = schedule.beta(x_t.t - 1);
    const double radical = 1.0 - b_prev - sigma_t * sigma_t;
    if (radical < 0.0) {
        throw validation_error("ddim_reverse_step: sigma_t^2 > 1 - beta[t-1] (schedule violation)");
    }

    LatentState out;
    out.shape = x_t.shape;
    out.t = x_t.t - 1;
    const Eigen::VectorXd x0_hat = (x_t.tensor - std::sqrt(1.0 - b) * eps_hat) / std::sqrt(b);
    out.tensor = std::sqrt(b_prev) * x0_hat + std::sqrt(radical) * eps_hat;
    if (sigma_t > 0.0) {
        out.tensor += sigma_t * (*noise);
    }
    return out;
}

LatentState ode_inversion_step(const LatentState& x_t,
                               const Eigen::VectorXd& eps_hat,
                               const NoiseSchedule& schedule) {
    validate_state(x_t, schedule, "ode_inversion_step");
    if (x_t.t > schedule.steps() - 1) {
        throw validation_error("ode_inversion_step: already at t=T");
    }
    if (!eps_hat.allFinite() || eps_hat.size() != x_t.tensor.size()) {
        throw validation_error("ode_inversion_step: eps_hat non-finite or shape mismatch");
    }

    const double b = schedule.beta(x_t.t);
    const double b_next = schedule.beta(x_t.t + 1);
    const double slope = std::sqrt((1.0 - b_next) / b_next) - std::sqrt((1.0 - b) / b);

    LatentState out;
    out.shape = x_t.shape;
    out.t = x_t.t + 1;
    out.tensor = std::sqrt(b_next) * (x_t.tensor / std::sqrt(b) + slope * eps_hat);
    return out;
}

LatentState denoise_trajectory(const LatentState& x_T,
                               const PredictFn& predict,
                               const NoiseSchedule& schedule,
                               const std::vector<double>& sigma_plan,
                               uint64_t seed) {
    validate_state(x_T, schedule, "denoise_trajectory");
    if (x_T.t != schedule.steps()) {
        throw validation_error("denoise_trajectory: starting state must sit at t=T");
    }
    if (static_cast<int>(sigma_plan.size()) != schedule.steps()) {
        throw validation_error("denoise_trajectory: sigma_plan length must equal step count");
    }

    Rng rng(seed);
    LatentState state = x_T;
    for (int k = 0; k < schedule.steps(); ++k) {
        const Eigen::VectorXd eps = predict(state);
        if (!eps.allFinite()) {
            throw numeric_error("denoise_trajectory: predictor returned non-finite tensor at step " +
                                std::to_string(k) + " (t=" + std::to_string(state.t) + ")");
        }
        const double sigma = sigma_plan[k] * schedule.max_sigma(state.t);
        if (sigma > 0.0) {
            const Eigen::VectorXd noise = rng.gaussian_vector(state.tensor.size());
            state = ddim_reverse_step(state, eps, schedule, sigma, &noise);
        } else {
            state = ddim_reverse_step(state, eps, schedule, 0.0, nullptr);
        }
    }
    return state;
}

LatentState invert_trajectory(const LatentState& x_0,
                              const PredictFn& predict,
                              const NoiseSchedule& schedule) {
    validate_state(x_0, schedule, "invert_trajectory");
    if (x_0.t != 0) {
        throw validation_error("invert_trajectory: starting state must sit at t=0");
    }

    LatentState state = x_0;
    for (int k = 0; k < schedule.steps(); ++k) {
        const Eigen::VectorXd eps = predict(state);
        if (!eps.allFinite()) {
            throw numeric_error("invert_trajectory: predictor returned non-finite tensor at step " +
                                std::to_string(k) + " (t=" + std::to_string(state.t) + ")");
        }
        state = ode_inversion_step(state, eps, schedule);
    }
    return state;
}

}  // namespace morphkit
