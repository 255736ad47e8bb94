#include "morphkit/guidance.hpp"

#include <cmath>
#include <string>

#include "morphkit/errors.hpp"

namespace morphkit {

void validate_guidance(const GuidanceConfig& config) {
    if (!std::isfinite(config.w_min) || !std::isfinite(config.w_max)) {
        throw validation_error("guidance: w_min/w_max must be finite");
    }
    if (config.w_min < 1.0) {
        throw validation_error("guidance: w_min must be >= 1");
    }
    if (config.w_min > config.w_max) {
        throw validation_error("guidance: w_min must be <= w_max");
    }
    if (config.kind == GuidanceKind::Constant && config.w_min != config.w_max) {
        throw validation_error("guidance: constant schedule requires w_min == w_max");
    }
}

Eigen::VectorXd cfg_combine(const Eigen::VectorXd& eps_cond, const Eigen::VectorXd& eps_uncond, double w) {
    if (eps_cond.size() != eps_uncond.size()) {
        throw validation_error("cfg_combine: shape mismatch (" + std::to_string(eps_cond.size()) + " vs " +
                               std::to_string(eps_uncond.size()) + ")");
    }
    if (!std::isfinite(w)) {
        throw validation_error("cfg_combine: w must be finite");
    }
    return w * eps_cond + (1.0 - w) * eps_uncond;
}

double convex_cfg_schedule(double alpha, const GuidanceConfig& config) {
    validate_guidance(config);
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw validation_error("convex_cfg_schedule: alpha must be in [0, 1]");
    }
    if (config.kind == GuidanceKind::Constant) {
        return config.w_min;
    }
    return config.w_max - 2.0 * (config.w_max - config.w_min) * std::abs(alpha - 0.5);
}

SigmaBoostPlan sigma_boost_plan(int steps, int deterministic_prefix) {
    if (steps < 0 || deterministic_prefix < 0) {
        throw validation_error("sigma_boost_plan: counts must be non-negative");
    }
    if (deterministic_prefix > steps) {
        throw validation_error("sigma_boost_plan: deterministic_prefix exceeds step count");
    }
    SigmaBoostPlan plan;
    plan.deterministic_prefix = deterministic_prefix;
    plan.sigmas.assign(steps, 1.0);
    for (int i = 0; i < deterministic_prefix; ++i) plan.sigmas[i] = 0.0;
    return plan;
}

}  // namespace morphkit
