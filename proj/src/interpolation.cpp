#include "morphkit/interpolation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "morphkit/errors.hpp"
#include "morphkit/ode.hpp"

namespace morphkit {

void validate_morph_spec(const MorphSpec& spec) {
    std::string problems;
    auto complain = [&](const std::string& p) { problems += (problems.empty() ? "" : "; ") + p; };
    if (!(spec.alpha_start >= 0.0 && spec.alpha_start <= 1.0)) complain("alpha_start outside [0, 1]");
    if (!(spec.alpha_end >= 0.0 && spec.alpha_end <= 1.0)) complain("alpha_end outside [0, 1]");
    if (!(spec.alpha_start < spec.alpha_end)) complain("alpha_start must be < alpha_end");
    if (!(spec.delta_lpips > 0.0)) complain("delta must be > 0");
    if (!(spec.eps_tol > 0.0)) complain("tolerance must be > 0");
    if (!(spec.eps_tol < spec.delta_lpips)) complain("tolerance must be < delta");
    if (spec.max_frames < 2) complain("max_frames must be >= 2");
    if (!problems.empty()) {
        throw validation_error("morph spec: " + problems);
    }
}

EmbeddingVector lerp_embedding(const EmbeddingVector& e0, const EmbeddingVector& e1, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw validation_error("lerp_embedding: alpha outside [0, 1]");
    }
    if (e0.values.size() != e1.values.size() || e0.tokens != e1.tokens || e0.dim != e1.dim) {
        throw validation_error("lerp_embedding: shape mismatch");
    }
    EmbeddingVector out = e0;
    out.values = (1.0 - alpha) * e0.values + alpha * e1.values;
    return out;
}

LatentState slerp_latent(const LatentState& x0_T, const LatentState& x1_T, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw validation_error("slerp_latent: alpha outside [0, 1]");
    }
    if (x0_T.tensor.size() != x1_T.tensor.size() || x0_T.t != x1_T.t) {
        throw validation_error("slerp_latent: endpoint shape or timestep mismatch");
    }
    if (alpha == 0.0) return x0_T;
    if (alpha == 1.0) return x1_T;

    const double n0 = x0_T.tensor.norm();
    const double n1 = x1_T.tensor.norm();
    if (!(n0 > 0.0) || !(n1 > 0.0)) {
        throw validation_error("slerp_latent: zero-norm endpoint");
    }
    const double cosw = std::clamp(x0_T.tensor.dot(x1_T.tensor) / (n0 * n1), -1.0, 1.0);
    const double omega = std::acos(cosw);

    LatentState out = x0_T;
    constexpr double kOmegaEps = 1e-4;
    if (std::acos(-1.0) - omega < kOmegaEps) {
        throw validation_error("slerp_latent: near-antipodal endpoints, path undefined");
    }
    if (omega < kOmegaEps) {
        out.tensor = (1.0 - alpha) * x0_T.tensor + alpha * x1_T.tensor;
        return out;
    }
    const double s = std::sin(omega);
    out.tensor = (std::sin((1.0 - alpha) * omega) / s) * x0_T.tensor + (std::sin(alpha * omega) / s) * x1_T.tensor;
    return out;
}

Image generate_frame(double alpha, const FrameContext& context) {
    if (context.schedule == nullptr || context.backend == nullptr) {
        throw validation_error("generate_frame: context missing schedule or backend");
    }
    const EmbeddingVector e_alpha = lerp_embedding(context.e0, context.e1, alpha);
    const LatentState x_T = slerp_latent(context.x0_T, context.x1_T, alpha);
    const double w = convex_cfg_schedule(alpha, context.guidance);
    const NoiseSchedule& sched = *context.schedule;
    DenoiserBackend& backend = *context.backend;
    const AdapterSet* adapters = context.adapters;

    PredictFn predict = [&](const LatentState& s) -> Eigen::VectorXd {
        const int t_model = sched.timestep(s.t);
        if (adapters != nullptr) {
            return adapted_predict(s.tensor, t_model, e_alpha, w, *adapters, backend);
        }
        const Eigen::VectorXd eps_cond = backend.predict_noise(s.tensor, t_model, &e_alpha);
        if (w == 1.0) return eps_cond;
        const Eigen::VectorXd eps_uncond = backend.predict_noise(s.tensor, t_model, nullptr);
        return cfg_combine(eps_cond, eps_uncond, w);
    };

    const LatentState x0 = denoise_trajectory(x_T, predict, sched, context.sigma_plan, context.seed);
    return quantize16(backend.decode_latent(x0));
}

std::vector<double> perceptual_uniform_alphas(const MorphSpec& spec, const FrameFn& frame_fn,
                                              const ImageMetric& metric) {
    validate_morph_spec(spec);

    std::map<int64_t, Image> cache;
    auto frame_at = [&](double alpha) -> const Image& {
        const auto key = static_cast<int64_t>(std::llround(alpha * 1e6));
        auto it = cache.find(key);
        if (it == cache.end()) {
            it = cache.emplace(key, frame_fn(alpha)).first;
        }
        return it->second;
    };

    const double delta = spec.delta_lpips;
    std::vector<double> alphas{spec.alpha_start};
    double cur = spec.alpha_start;

    while (metric(frame_at(cur), frame_at(spec.alpha_end)) > delta) {
        if (static_cast<int>(alphas.size()) + 1 > spec.max_frames) {
            throw numeric_error("perceptual_uniform_alphas: max_frames (" + std::to_string(spec.max_frames) +
                                ") exceeded at alpha " + std::to_string(cur));
        }
        double lo = cur;
        double hi = spec.alpha_end;
        double mid = 0.5 * (lo + hi);
        double d = metric(frame_at(cur), frame_at(mid));
        int iters = 0;
        while (std::abs(d - delta) > spec.eps_tol) {
            if (++iters > 40) {
                throw numeric_error("perceptual_uniform_alphas: bracket [" + std::to_string(cur) + ", " +
                                    std::to_string(spec.alpha_end) + "] exhausted after 40 bisections (last d=" +
                                    std::to_string(d) + ", target " + std::to_string(delta) + ")");
            }
            if (d > delta) {
                hi = 0.5 * (lo + hi);
            } else {
                lo = 0.5 * (lo + hi);
            }
            mid = 0.5 * (lo + hi);
            d = metric(frame_at(cur), frame_at(mid));
        }
        cur = mid;
        alphas.push_back(cur);
    }
    alphas.push_back(spec.alpha_end);
    return alphas;
}

}  // namespace morphkit
