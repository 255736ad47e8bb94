#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "morphkit/backend.hpp"

namespace morphkit {

// Relative perceptual path diversity of a baseline morph path:
//   gamma = sum_i d(frame_i, frame_{i+1}) / ((N-1) * d(frame_0, frame_{N-1}))
// The path must come from the pre-adaptation baseline at uniform alphas.
double rppd(const std::vector<Image>& path, const ImageMetric& metric);

// Power-of-two rank rule: 2^max(0, floor(18 * gamma - 6)).
uint64_t heuristic_rank(double gamma);

struct RankPolicy {
    double gamma = 0.0;
    uint64_t selected_rank = 1;
    std::optional<int> override;
};

struct AdaptConfig {
    int rank = 2;
    int steps = 150;
    double learning_rate = 1e-3;
    uint64_t seed = 0;
    double init_std = 0.02;
};

// Fits conditional low-rank deltas minimizing the summed DPM objective of
// the two (image, embedding) endpoints over the frozen base model. The
// returned map covers every backend adapter target at the requested rank
// (up factors zero-initialized, so steps == 0 yields the identity).
AdapterMap adapt_conditional(DenoiserBackend& backend,
                             const LatentState& x0_a, const EmbeddingVector& e_a,
                             const LatentState& x0_b, const EmbeddingVector& e_b,
                             const AdaptConfig& config);

// Same objective with the null token as conditioning.
AdapterMap adapt_unconditional(DenoiserBackend& backend,
                               const LatentState& x0_a, const LatentState& x0_b,
                               const AdaptConfig& config);

// Eq.-10-style combined prediction: w * eps_{theta_e}(x, t, e) +
// (1 - w) * eps_{theta_0}(x, t, null). Each branch sees only its own deltas.
Eigen::VectorXd adapted_predict(const Eigen::VectorXd& x, int t, const EmbeddingVector& e, double w,
                                const AdapterSet& adapters, DenoiserBackend& backend);

// Zero-initialized adapter map over all backend targets.
AdapterMap init_adapters(const DenoiserBackend& backend, int rank, uint64_t seed, double init_std = 0.02);

// Largest power-of-two rank admissible for every backend target
// (rank <= min(rows, cols) / 4).
uint64_t max_admissible_rank(const DenoiserBackend& backend);

}  // namespace morphkit
