#include "morphkit/adaptation.hpp"

#include <cmath>
#include <string>

#include "morphkit/adam.hpp"
#include "morphkit/errors.hpp"
#include "morphkit/guidance.hpp"
#include "morphkit/rng.hpp"

namespace morphkit {

double rppd(const std::vector<Image>& path, const ImageMetric& metric) {
    const int n = static_cast<int>(path.size());
    if (n < 3) {
        throw validation_error("rppd: need at least 3 frames");
    }
    const double endpoint = metric(path.front(), path.back());
    if (!(endpoint > 0.0)) {
        throw validation_error("rppd: endpoint distance is zero (degenerate pair)");
    }
    double hops = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
        hops += metric(path[i], path[i + 1]);
    }
    return hops / ((n - 1) * endpoint);
}

uint64_t heuristic_rank(double gamma) {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw validation_error("heuristic_rank: gamma must be finite and >= 0");
    }
    const double raw = std::floor(18.0 * gamma - 6.0);
    const long long exponent = std::max(0ll, static_cast<long long>(raw));
    if (exponent > 62) {
        throw validation_error("heuristic_rank: gamma " + std::to_string(gamma) + " overflows the rank rule");
    }
    return 1ull << exponent;
}

uint64_t max_admissible_rank(const DenoiserBackend& backend) {
    uint64_t best = 0;
    for (const auto& info : backend.adapter_targets()) {
        const int bound = std::min(info.rows, info.cols) / 4;
        uint64_t pow2 = 1;
        while (pow2 * 2 <= static_cast<uint64_t>(bound)) pow2 *= 2;
        best = best == 0 ? pow2 : std::min(best, pow2);
    }
    return best;
}

AdapterMap init_adapters(const DenoiserBackend& backend, int rank, uint64_t seed, double init_std) {
    if (rank < 1) {
        throw validation_error("adapters: rank must be >= 1");
    }
    Rng rng(seed ^ 0x6c6f7261ull);
    AdapterMap map;
    for (const auto& info : backend.adapter_targets()) {
        if (rank > std::min(info.rows, info.cols) / 4) {
            throw validation_error("adapters: rank " + std::to_string(rank) + " exceeds bound for target '" +
                                   info.id + "' (min dim / 4)");
        }
        LowRankDelta d;
        d.rank = rank;
        d.scale = 1.0 / rank;
        d.down = Eigen::MatrixXd::NullaryExpr(rank, info.cols, [&] { return init_std * rng.gaussian(); });
        d.up = Eigen::MatrixXd::Zero(info.rows, rank);
        map[info.id] = std::move(d);
    }
    return map;
}

namespace {

AdapterMap fit_adapters(DenoiserBackend& backend,
                        const LatentState& x0_a, const EmbeddingVector* e_a,
                        const LatentState& x0_b, const EmbeddingVector* e_b,
                        const AdaptConfig& config, const char* what) {
    const auto* grads = backend.gradients();
    if (grads == nullptr) {
        throw capability_error(std::string(what) + ": backend does not expose gradients");
    }
    const uint64_t checksum_before = backend.parameter_checksum();
    AdapterMap map = init_adapters(backend, config.rank, config.seed, config.init_std);
    if (config.steps == 0) {
        return map;
    }

    std::map<std::string, std::pair<AdamState, AdamState>> opts;
    for (const auto& [id, d] : map) {
        opts.emplace(id, std::make_pair(AdamState(config.learning_rate), AdamState(config.learning_rate)));
    }

    const NoiseSchedule& sched = backend.train_schedule();
    Rng rng(config.seed ^ 0x61646170ull);
    for (int step = 0; step < config.steps; ++step) {
        const int t = static_cast<int>(rng.uniform_int(1, sched.steps()));
        const Eigen::VectorXd noise = rng.gaussian_vector(x0_a.tensor.size());

        std::map<std::string, GradientBackend::FactorGrads> ga, gb;
        const double loss_a = grads->dpm_loss_grad_adapters(x0_a.tensor, e_a, t, noise, map, &ga);
        const double loss_b = grads->dpm_loss_grad_adapters(x0_b.tensor, e_b, t, noise, map, &gb);
        if (!std::isfinite(loss_a) || !std::isfinite(loss_b)) {
            throw numeric_error(std::string(what) + ": NaN loss at step " + std::to_string(step));
        }
        for (auto& [id, delta] : map) {
            const Eigen::MatrixXd d_down = ga[id].d_down + gb[id].d_down;
            const Eigen::MatrixXd d_up = ga[id].d_up + gb[id].d_up;
            opts.at(id).first.update(delta.down, d_down);
            opts.at(id).second.update(delta.up, d_up);
        }
    }
    if (backend.parameter_checksum() != checksum_before) {
        throw numeric_error(std::string(what) + ": base weights changed during adaptation");
    }
    return map;
}

}  // namespace

AdapterMap adapt_conditional(DenoiserBackend& backend,
                             const LatentState& x0_a, const EmbeddingVector& e_a,
                             const LatentState& x0_b, const EmbeddingVector& e_b,
                             const AdaptConfig& config) {
    return fit_adapters(backend, x0_a, &e_a, x0_b, &e_b, config, "adapt_conditional");
}

AdapterMap adapt_unconditional(DenoiserBackend& backend,
                               const LatentState& x0_a, const LatentState& x0_b,
                               const AdaptConfig& config) {
    return fit_adapters(backend, x0_a, nullptr, x0_b, nullptr, config, "adapt_unconditional");
}

Eigen::VectorXd adapted_predict(const Eigen::VectorXd& x, int t, const EmbeddingVector& e, double w,
                                const AdapterSet& adapters, DenoiserBackend& backend) {
    Eigen::VectorXd eps_cond;
    {
        ScopedAdapters guard = attach_adapters(backend, adapters.conditional, AdapterBranch::Conditional);
        if (backend.attached(AdapterBranch::Unconditional) != nullptr) {
            throw numeric_error("adapted_predict: unconditional deltas attached during conditional call");
        }
        eps_cond = backend.predict_noise(x, t, &e);
    }
    Eigen::VectorXd eps_uncond;
    {
        ScopedAdapters guard = attach_adapters(backend, adapters.unconditional, AdapterBranch::Unconditional);
        if (backend.attached(AdapterBranch::Conditional) != nullptr) {
            throw numeric_error("adapted_predict: conditional deltas attached during unconditional call");
        }
        eps_uncond = backend.predict_noise(x, t, nullptr);
    }
    return cfg_combine(eps_cond, eps_uncond, w);
}

}  // namespace morphkit
