#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "morphkit/backend.hpp"

namespace morphkit {

struct InversionConfig {
    double learning_rate = 0.002;
    int steps = 2500;
    uint64_t seed = 0;
    double weight_decay = 0.01;
};

void validate_inversion_config(const InversionConfig& config);

// Encodes the shared prompt "An image of {token}" and returns two
// independently optimizable copies.
std::pair<EmbeddingVector, EmbeddingVector> init_common_embedding(const std::string& token,
                                                                  const DenoiserBackend& backend);

// || eps(sqrt(b_t) x0 + sqrt(1 - b_t) noise, t, e) - noise ||^2
double dpm_loss(const LatentState& x0, const EmbeddingVector& e, int t, const Eigen::VectorXd& noise,
                const DenoiserBackend& backend);

// First-order optimization of the embedding against the DPM objective with
// fresh (t, noise) each step. Model weights stay frozen.
EmbeddingVector optimize_embedding(const LatentState& x0, const EmbeddingVector& e_init,
                                   const InversionConfig& config, const DenoiserBackend& backend);

// Joint phase-1 optimization of both endpoints: one (t, noise) draw per
// step shared by the two updates.
std::pair<EmbeddingVector, EmbeddingVector> optimize_embedding_pair(const LatentState& x0_a,
                                                                    const LatentState& x0_b,
                                                                    const EmbeddingVector& e_a,
                                                                    const EmbeddingVector& e_b,
                                                                    const InversionConfig& config,
                                                                    const DenoiserBackend& backend);

}  // namespace morphkit
