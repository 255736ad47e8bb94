#include "morphkit/textual_inversion.hpp"

#include <cmath>

#include "morphkit/adam.hpp"
#include "morphkit/errors.hpp"
#include "morphkit/rng.hpp"

namespace morphkit {

void validate_inversion_config(const InversionConfig& config) {
    if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
        throw validation_error("inversion: learning_rate must be positive");
    }
    if (config.steps < 0) {
        throw validation_error("inversion: steps must be >= 0");
    }
}

std::pair<EmbeddingVector, EmbeddingVector> init_common_embedding(const std::string& token,
                                                                  const DenoiserBackend& backend) {
    if (token.empty()) {
        throw validation_error("init_common_embedding: token must be non-empty");
    }
    EmbeddingVector e = backend.encode_text("An image of " + token);
    return {e, e};
}

double dpm_loss(const LatentState& x0, const EmbeddingVector& e, int t, const Eigen::VectorXd& noise,
                const DenoiserBackend& backend) {
    const NoiseSchedule& sched = backend.train_schedule();
    if (t < 1 || t > sched.steps()) {
        throw validation_error("dpm_loss: t outside [1, T]");
    }
    if (noise.size() != x0.tensor.size()) {
        throw validation_error("dpm_loss: noise shape mismatch");
    }
    const double b = sched.beta(t);
    const Eigen::VectorXd x_t = std::sqrt(b) * x0.tensor + std::sqrt(1.0 - b) * noise;
    const Eigen::VectorXd eps = backend.predict_noise(x_t, sched.timestep(t), &e);
    if (!eps.allFinite()) {
        throw numeric_error("dpm_loss: model output non-finite");
    }
    return (eps - noise).squaredNorm();
}

namespace {

struct PairState {
    const LatentState* x0;
    EmbeddingVector e;
    AdamState opt;
};

}  // namespace

std::pair<EmbeddingVector, EmbeddingVector> optimize_embedding_pair(const LatentState& x0_a,
                                                                    const LatentState& x0_b,
                                                                    const EmbeddingVector& e_a,
                                                                    const EmbeddingVector& e_b,
                                                                    const InversionConfig& config,
                                                                    const DenoiserBackend& backend) {
    validate_inversion_config(config);
    const auto* grads = backend.gradients();
    if (grads == nullptr) {
        throw capability_error("optimize_embedding: backend does not expose gradients");
    }
    const uint64_t checksum_before = backend.parameter_checksum();
    const NoiseSchedule& sched = backend.train_schedule();

    PairState states[2] = {{&x0_a, e_a, AdamState(config.learning_rate, config.weight_decay)},
                           {&x0_b, e_b, AdamState(config.learning_rate, config.weight_decay)}};

    Rng rng(config.seed ^ 0x74657874696e76ull);
    for (int step = 0; step < config.steps; ++step) {
        const int t = static_cast<int>(rng.uniform_int(1, sched.steps()));
        const Eigen::VectorXd noise = rng.gaussian_vector(x0_a.tensor.size());
        for (PairState& s : states) {
            Eigen::VectorXd g;
            const double loss = grads->dpm_loss_grad_e(s.x0->tensor, &s.e, t, noise, &g);
            if (!std::isfinite(loss)) {
                throw numeric_error("optimize_embedding: NaN loss at step " + std::to_string(step));
            }
            s.opt.update(s.e.values, g);
        }
    }
    if (backend.parameter_checksum() != checksum_before) {
        throw numeric_error("optimize_embedding: model weights changed during embedding optimization");
    }
    for (PairState& s : states) {
        s.e.origin = EmbeddingVector::Origin::Optimized;
    }
    return {states[0].e, states[1].e};
}

EmbeddingVector optimize_embedding(const LatentState& x0, const EmbeddingVector& e_init,
                                   const InversionConfig& config, const DenoiserBackend& backend) {
    validate_inversion_config(config);
    const auto* grads = backend.gradients();
    if (grads == nullptr) {
        throw capability_error("optimize_embedding: backend does not expose gradients");
    }
    if (config.steps == 0) {
        return e_init;
    }
    const uint64_t checksum_before = backend.parameter_checksum();
    const NoiseSchedule& sched = backend.train_schedule();

    EmbeddingVector e = e_init;
    AdamState opt(config.learning_rate, config.weight_decay);
    Rng rng(config.seed ^ 0x74657874696e76ull);
    for (int step = 0; step < config.steps; ++step) {
        const int t = static_cast<int>(rng.uniform_int(1, sched.steps()));
        const Eigen::VectorXd noise = rng.gaussian_vector(x0.tensor.size());
        Eigen::VectorXd g;
        const double loss = grads->dpm_loss_grad_e(x0.tensor, &e, t, noise, &g);
        if (!std::isfinite(loss)) {
            throw numeric_error("optimize_embedding: NaN loss at step " + std::to_string(step));
        }
        opt.update(e.values, g);
    }
    if (backend.parameter_checksum() != checksum_before) {
        throw numeric_error("optimize_embedding: model weights changed during embedding optimization");
    }
    e.origin = EmbeddingVector::Origin::Optimized;
    return e;
}

}  // namespace morphkit
