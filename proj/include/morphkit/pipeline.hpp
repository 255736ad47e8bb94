#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "morphkit/interpolation.hpp"
#include "morphkit/metrics.hpp"

namespace morphkit {

// Full run configuration; flat and round-trippable through key/value text.
struct RunConfig {
    std::string backend = "toy";           // "toy" or "external"
    std::string checkpoint;                // required for external
    std::string token = "shape";
    std::string img_a;
    std::string img_b;
    std::string out_dir = "morph_out";

    uint64_t seed = 0;
    int steps = 16;                        // inference grid
    double cfg_min = 1.5;
    double cfg_max = 2.0;
    std::string cfg_kind = "convex";       // "convex" or "constant"
    int sigma_boost = 6;                   // deterministic prefix length

    int inv_steps = 200;
    double inv_lr = 0.002;

    std::string rank = "auto";             // "auto" or an integer
    int uncond_rank = 2;
    int adapt_steps = 150;
    int uncond_steps = 15;
    double adapt_lr = 1e-3;
    int rppd_frames = 9;

    double alpha_start = 0.0;
    double alpha_end = 1.0;
    double delta = 0.2;
    double tol = 0.02;
    int max_frames = 64;

    int ppl_samples = 200;
    double ppl_epsilon = 0.02;

    std::map<std::string, std::string> to_kv() const;
    static RunConfig from_kv(const std::map<std::string, std::string>& kv);
    std::string render() const;  // "key = value" lines
    static RunConfig parse(const std::string& text);

    bool operator==(const RunConfig&) const = default;
};

// Collects every violation instead of stopping at the first.
std::vector<std::string> validate_run_config(const RunConfig& config, bool check_images);

struct MorphSequence {
    std::vector<Image> frames;
    std::vector<double> alphas;
    std::vector<double> hop_distances;
    RunConfig provenance;
    double gamma = 0.0;
    uint64_t rank_used = 0;
    bool rank_overridden = false;
    bool rank_clamped = false;
    PathMetricsReport metrics;
    std::map<std::string, double> phase_seconds;
    uint64_t backend_checksum = 0;
};

// Alg.-1 orchestration: textual inversion -> rPPD + heuristic rank ->
// low-rank adaptation -> latent inversion -> perceptually-uniform sampling.
// Set config.adapt_steps = 0 and uncond_steps = 0 to run the inversion-only
// baseline. When `out_dir` is non-empty, phase artifacts are persisted as
// they complete so failed runs leave evidence behind.
MorphSequence run_pipeline(const Image& image_a, const Image& image_b, const RunConfig& config,
                           DenoiserBackend& backend, const ImageMetric& metric);

// Writes frames, manifest.json and timings.json; returns the manifest path.
std::filesystem::path persist_sequence(const MorphSequence& seq, const std::filesystem::path& out_dir);

uint64_t file_hash(const std::filesystem::path& path);

// Resolves the backend named by the config: "toy" trains (or loads a
// cached) seeded model under the cache root; "external" loads the
// configured checkpoint. Cache root comes from MORPHKIT_CACHE_ROOT, else
// "./mk_cache".
std::shared_ptr<DenoiserBackend> resolve_backend(const RunConfig& config);

std::filesystem::path cache_root();

}  // namespace morphkit
