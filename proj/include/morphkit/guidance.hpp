#pragma once

#include <vector>

#include <Eigen/Core>

namespace morphkit {

enum class GuidanceKind { Constant, Convex };

struct GuidanceConfig {
    double w_min = 1.5;
    double w_max = 2.0;
    GuidanceKind kind = GuidanceKind::Convex;

    static GuidanceConfig constant(double w) { return {w, w, GuidanceKind::Constant}; }
};

// Throws validation_error if w_min > w_max, values are non-finite, w_min < 1,
// or a constant schedule has w_min != w_max.
void validate_guidance(const GuidanceConfig& config);

// w * eps_cond + (1 - w) * eps_uncond
Eigen::VectorXd cfg_combine(const Eigen::VectorXd& eps_cond, const Eigen::VectorXd& eps_uncond, double w);

// Guidance weight as a function of the interpolation parameter:
//   w_alpha = w_max - 2 * (w_max - w_min) * |alpha - 0.5|
// i.e. w_min at the endpoints rising to w_max at alpha = 0.5, giving the
// intermediate samples the strongest guidance. Constant schedules return
// w_min everywhere.
double convex_cfg_schedule(double alpha, const GuidanceConfig& config);

// Per-step stochasticity multipliers for the sampler: 0 for the first
// `deterministic_prefix` steps (counted from t = T), 1 for the rest. Entry k
// scales the schedule's maximal admissible sigma at that step.
struct SigmaBoostPlan {
    std::vector<double> sigmas;
    int deterministic_prefix = 0;
};

SigmaBoostPlan sigma_boost_plan(int steps, int deterministic_prefix);

}  // namespace morphkit
