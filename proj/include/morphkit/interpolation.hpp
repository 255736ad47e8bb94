#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "morphkit/adaptation.hpp"
#include "morphkit/backend.hpp"
#include "morphkit/guidance.hpp"

namespace morphkit {

struct MorphSpec {
    double alpha_start = 0.0;
    double alpha_end = 1.0;
    double delta_lpips = 0.2;   // target per-hop perceptual distance
    double eps_tol = 0.02;      // binary-search tolerance
    int max_frames = 64;
};

void validate_morph_spec(const MorphSpec& spec);

// (1 - alpha) * e0 + alpha * e1
EmbeddingVector lerp_embedding(const EmbeddingVector& e0, const EmbeddingVector& e1, double alpha);

// Great-circle interpolation between two latents at t = T. Falls back to
// lerp when the subtended angle drops below 1e-4 rad (removable
// singularity); near-antipodal pairs are rejected.
LatentState slerp_latent(const LatentState& x0_T, const LatentState& x1_T, double alpha);

// Everything a frame generation needs once phases 1-2 are done.
struct FrameContext {
    EmbeddingVector e0, e1;
    LatentState x0_T, x1_T;
    const AdapterSet* adapters = nullptr;  // null -> base model
    GuidanceConfig guidance;
    const NoiseSchedule* schedule = nullptr;  // inference grid
    std::vector<double> sigma_plan;
    uint64_t seed = 0;
    DenoiserBackend* backend = nullptr;
};

// Interpolates, denoises with the (optionally adapted) guided predictor and
// decodes; the result is quantized to the persisted 16-bit grid so measured
// distances survive a disk roundtrip unchanged.
Image generate_frame(double alpha, const FrameContext& context);

using FrameFn = std::function<Image(double)>;

// Alg.-2-style search for interpolation parameters with constant perceptual
// hops: every consecutive pair except the last lands within eps_tol of
// delta_lpips; the final hop is <= delta_lpips. Frames are memoized on a
// 1e-6 alpha grid.
std::vector<double> perceptual_uniform_alphas(const MorphSpec& spec, const FrameFn& frame_fn,
                                              const ImageMetric& metric);

}  // namespace morphkit
