#include "morphkit/schedule.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "morphkit/errors.hpp"

namespace morphkit {

namespace {

std::vector<double> validate_betas(std::vector<double> betas) {
    if (betas.size() < 2) {
        throw validation_error("schedule: need at least two grid points");
    }
    const int T = static_cast<int>(betas.size()) - 1;
    if (!(betas[0] > 0.999 && betas[0] <= 1.0)) {
        throw validation_error("schedule: betas[0] must be in (0.999, 1], got " + std::to_string(betas[0]));
    }
    if (!(betas[T] > 0.0 && betas[T] < 0.05)) {
        throw validation_error("schedule: betas[T] must be in (0, 0.05), got " + std::to_string(betas[T]));
    }
    for (int t = 0; t <= T; ++t) {
        if (!std::isfinite(betas[t]) || betas[t] <= 0.0 || betas[t] > 1.0) {
            throw validation_error("schedule: betas[" + std::to_string(t) + "] outside (0, 1]");
        }
        if (t > 0 && betas[t] >= betas[t - 1]) {
            throw validation_error("schedule: betas must be strictly decreasing at t=" + std::to_string(t));
        }
    }
    return betas;
}

std::vector<double> ddpm_sigmas(const std::vector<double>& betas) {
    std::vector<double> sigmas(betas.size(), 0.0);
    for (size_t t = 1; t < betas.size(); ++t) {
        const double b = betas[t];
        const double b_prev = betas[t - 1];
        const double s2 = (1.0 - b_prev) / (1.0 - b) * (1.0 - b / b_prev);
        sigmas[t] = std::sqrt(std::max(0.0, s2));
    }
    return sigmas;
}

}  // namespace

NoiseSchedule::NoiseSchedule(std::vector<double> betas, std::vector<int> timesteps)
    : betas_(validate_betas(std::move(betas))), timesteps_(std::move(timesteps)), sigmas_(ddpm_sigmas(betas_)) {
    if (timesteps_.empty()) {
        timesteps_.resize(betas_.size());
        std::iota(timesteps_.begin(), timesteps_.end(), 0);
    }
    if (timesteps_.size() != betas_.size()) {
        throw validation_error("schedule: timesteps length must match betas length");
    }
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas)
    : NoiseSchedule(std::move(betas), {}) {}

NoiseSchedule NoiseSchedule::subsample(int steps) const {
    if (steps < 1 || steps > this->steps()) {
        throw validation_error("schedule: subsample steps must be in [1, T]");
    }
    std::vector<double> betas(steps + 1);
    std::vector<int> ts(steps + 1);
    for (int k = 0; k <= steps; ++k) {
        const int t = static_cast<int>(std::llround(static_cast<double>(k) * this->steps() / steps));
        betas[k] = betas_[t];
        ts[k] = timesteps_[t];
    }
    return NoiseSchedule(std::move(betas), std::move(ts));
}

NoiseSchedule make_scaled_linear_schedule(int train_steps, double variance_scale) {
    if (train_steps < 2) {
        throw validation_error("schedule: train_steps must be >= 2");
    }
    if (!(variance_scale > 0.0 && variance_scale <= 1.0)) {
        throw validation_error("schedule: variance_scale must be in (0, 1]");
    }
    // Per-step variance increments linear in sqrt between 0.00085 and 0.012
    // at 1000-step resolution, rescaled for other discretizations.
    const double scale = 1000.0 / train_steps * variance_scale;
    const double lo = std::sqrt(0.00085 * scale);
    const double hi = std::sqrt(0.012 * scale);
    std::vector<double> betas(train_steps + 1);
    std::vector<int> ts(train_steps + 1);
    betas[0] = 1.0;
    ts[0] = 0;
    double cum = 1.0;
    for (int t = 1; t <= train_steps; ++t) {
        const double s = lo + (hi - lo) * (t - 1) / (train_steps - 1);
        cum *= 1.0 - s * s;
        betas[t] = cum;
        ts[t] = t;
    }
    return NoiseSchedule(std::move(betas), std::move(ts));
}

void validate_state(const LatentState& state, const NoiseSchedule& schedule, const char* op) {
    if (!state.tensor.allFinite()) {
        throw validation_error(std::string(op) + ": latent tensor has non-finite entries");
    }
    if (state.t < 0 || state.t > schedule.steps()) {
        throw validation_error(std::string(op) + ": timestep " + std::to_string(state.t) +
                               " outside schedule bounds [0, " + std::to_string(schedule.steps()) + "]");
    }
    const long long n = static_cast<long long>(state.shape[0]) * state.shape[1] * state.shape[2];
    if (n != state.tensor.size()) {
        throw validation_error(std::string(op) + ": latent shape does not match tensor size");
    }
}

}  // namespace morphkit
