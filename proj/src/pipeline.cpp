#include "morphkit/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "morphkit/checkpoint.hpp"
#include "morphkit/errors.hpp"
#include "morphkit/image_io.hpp"
#include "morphkit/ode.hpp"
#include "morphkit/rng.hpp"
#include "morphkit/textual_inversion.hpp"

namespace morphkit {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path);
    out << j.dump(1) << "\n";
}

nlohmann::ordered_json embedding_json(const EmbeddingVector& e) {
    return {{"tokens", e.tokens},
            {"dim", e.dim},
            {"origin", e.origin == EmbeddingVector::Origin::Optimized ? "optimized" : "initial"},
            {"data", encode_doubles(e.values)}};
}

nlohmann::ordered_json latent_json(const LatentState& z) {
    return {{"shape", {z.shape[0], z.shape[1], z.shape[2]}}, {"t", z.t}, {"data", encode_doubles(z.tensor)}};
}

// Inversion runs at w = 1: pure conditional prediction.
LatentState invert_endpoint(const LatentState& x0, const EmbeddingVector& e, const NoiseSchedule& grid,
                            DenoiserBackend& backend, const AdapterMap* cond_deltas) {
    PredictFn predict = [&](const LatentState& s) {
        return backend.predict_noise(s.tensor, grid.timestep(s.t), &e);
    };
    if (cond_deltas != nullptr) {
        ScopedAdapters guard = attach_adapters(backend, *cond_deltas, AdapterBranch::Conditional);
        return invert_trajectory(x0, predict, grid);
    }
    return invert_trajectory(x0, predict, grid);
}

}  // namespace

std::filesystem::path cache_root() {
    if (const char* env = std::getenv("MORPHKIT_CACHE_ROOT")) {
        return std::filesystem::path(env);
    }
    return std::filesystem::path("mk_cache");
}

std::shared_ptr<DenoiserBackend> resolve_backend(const RunConfig& config) {
    if (config.backend == "external") {
        if (config.checkpoint.empty()) {
            throw capability_error("resolve_backend: external backend requires a checkpoint path");
        }
        return external_checkpoint_adapter(config.checkpoint);
    }
    if (config.backend != "toy") {
        throw validation_error("resolve_backend: unknown backend '" + config.backend + "'");
    }
    const int epochs = 60;
    const auto root = cache_root();
    std::filesystem::create_directories(root);
    char name[64];
    std::snprintf(name, sizeof name, "toy-ckpt-seed%llu-e%d.json",
                  static_cast<unsigned long long>(config.seed), epochs);
    const auto path = root / name;
    if (std::filesystem::exists(path)) {
        return external_checkpoint_adapter(path);
    }
    auto backend = train_toy_denoiser(config.seed, epochs);
    save_checkpoint(*backend, path);
    return backend;
}

MorphSequence run_pipeline(const Image& image_a, const Image& image_b, const RunConfig& config,
                           DenoiserBackend& backend, const ImageMetric& metric) {
    const auto problems = validate_run_config(config, /*check_images=*/false);
    if (!problems.empty()) {
        std::string joined;
        for (const auto& p : problems) joined += (joined.empty() ? "" : "; ") + p;
        throw validation_error("run_pipeline: " + joined);
    }

    const std::filesystem::path out_dir = config.out_dir.empty() ? std::filesystem::path()
                                                                 : std::filesystem::path(config.out_dir);
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_text(out_dir / "config.cfg", config.render());
    }

    MorphSequence seq;
    seq.provenance = config;
    seq.backend_checksum = backend.parameter_checksum();

    std::string phase = "setup";
    try {
        // Inputs in the backend's canonical image space.
        const LatentState z_a = backend.encode_image(image_a);
        const LatentState z_b = backend.encode_image(image_b);
        const Image canon_a = quantize16(backend.decode_latent(z_a));
        const Image canon_b = quantize16(backend.decode_latent(z_b));
        if (!(metric(canon_a, canon_b) > 0.0)) {
            throw validation_error("degenerate pair: endpoint perceptual distance is zero");
        }

        const NoiseSchedule grid = backend.train_schedule().subsample(config.steps);
        GuidanceConfig guidance;
        guidance.w_min = config.cfg_min;
        guidance.w_max = config.cfg_max;
        guidance.kind = config.cfg_kind == "constant" ? GuidanceKind::Constant : GuidanceKind::Convex;
        validate_guidance(guidance);

        // Phase 1: textual inversion from the common prompt.
        phase = "textual_inversion";
        auto t0 = Clock::now();
        auto [e_a, e_b] = init_common_embedding(config.token, backend);
        if (config.inv_steps > 0) {
            InversionConfig inv;
            inv.learning_rate = config.inv_lr;
            inv.steps = config.inv_steps;
            inv.seed = config.seed;
            std::tie(e_a, e_b) = optimize_embedding_pair(z_a, z_b, e_a, e_b, inv, backend);
        }
        seq.phase_seconds["textual_inversion"] = seconds_since(t0);
        if (!out_dir.empty()) {
            write_json(out_dir / "embeddings.json",
                       {{"token", config.token}, {"e0", embedding_json(e_a)}, {"e1", embedding_json(e_b)}});
        }

        // Pre-adaptation baseline path at uniform alphas for the rank rule.
        phase = "rppd";
        t0 = Clock::now();
        FrameContext baseline_ctx;
        baseline_ctx.e0 = e_a;
        baseline_ctx.e1 = e_b;
        baseline_ctx.x0_T = invert_endpoint(z_a, e_a, grid, backend, nullptr);
        baseline_ctx.x1_T = invert_endpoint(z_b, e_b, grid, backend, nullptr);
        baseline_ctx.adapters = nullptr;
        baseline_ctx.guidance = guidance;
        baseline_ctx.schedule = &grid;
        baseline_ctx.sigma_plan.assign(config.steps, 0.0);
        baseline_ctx.seed = config.seed;
        baseline_ctx.backend = &backend;

        std::vector<Image> baseline_path;
        for (int i = 0; i < config.rppd_frames; ++i) {
            const double alpha = static_cast<double>(i) / (config.rppd_frames - 1);
            baseline_path.push_back(generate_frame(alpha, baseline_ctx));
        }
        seq.gamma = rppd(baseline_path, metric);

        uint64_t rank = 0;
        if (config.rank == "auto") {
            rank = heuristic_rank(seq.gamma);
            seq.rank_overridden = false;
        } else {
            rank = static_cast<uint64_t>(std::stoi(config.rank));
            seq.rank_overridden = true;
        }
        const uint64_t bound = max_admissible_rank(backend);
        if (rank > bound) {
            seq.rank_clamped = true;
            rank = bound;
        }
        seq.rank_used = rank;
        seq.phase_seconds["rppd"] = seconds_since(t0);
        if (!out_dir.empty()) {
            write_json(out_dir / "baseline.json",
                       {{"gamma", seq.gamma},
                        {"rank_used", seq.rank_used},
                        {"rank_overridden", seq.rank_overridden},
                        {"rank_clamped", seq.rank_clamped},
                        {"rppd_frames", config.rppd_frames}});
        }

        // Phase 2: low-rank adaptation of both branches.
        phase = "adaptation";
        t0 = Clock::now();
        AdapterSet adapters;
        for (const auto& info : backend.adapter_targets()) adapters.targets.push_back(info.id);
        adapters.rank_cond = static_cast<int>(rank);
        adapters.rank_uncond = config.uncond_rank;
        {
            AdaptConfig cond;
            cond.rank = static_cast<int>(rank);
            cond.steps = config.adapt_steps;
            cond.learning_rate = config.adapt_lr;
            cond.seed = config.seed;
            adapters.conditional = adapt_conditional(backend, z_a, e_a, z_b, e_b, cond);

            AdaptConfig uncond;
            uncond.rank = config.uncond_rank;
            uncond.steps = config.uncond_steps;
            uncond.learning_rate = config.adapt_lr;
            uncond.seed = config.seed ^ 0x756e636f6e64ull;
            adapters.unconditional = adapt_unconditional(backend, z_a, z_b, uncond);
        }
        seq.phase_seconds["adaptation"] = seconds_since(t0);
        if (!out_dir.empty()) {
            save_adapters(adapters, out_dir / "adapters.json");
        }

        // Phase 3: latent inversion with the adapted conditional branch,
        // then perceptually-uniform sampling.
        phase = "latent_inversion";
        t0 = Clock::now();
        FrameContext ctx;
        ctx.e0 = e_a;
        ctx.e1 = e_b;
        ctx.x0_T = invert_endpoint(z_a, e_a, grid, backend, &adapters.conditional);
        ctx.x1_T = invert_endpoint(z_b, e_b, grid, backend, &adapters.conditional);
        ctx.adapters = &adapters;
        ctx.guidance = guidance;
        ctx.schedule = &grid;
        ctx.sigma_plan = sigma_boost_plan(config.steps, config.sigma_boost).sigmas;
        ctx.seed = config.seed;
        ctx.backend = &backend;
        seq.phase_seconds["latent_inversion"] = seconds_since(t0);
        if (!out_dir.empty()) {
            write_json(out_dir / "latents.json",
                       {{"x0_T", latent_json(ctx.x0_T)}, {"x1_T", latent_json(ctx.x1_T)}});
        }

        phase = "sampling";
        t0 = Clock::now();
        MorphSpec spec;
        spec.alpha_start = config.alpha_start;
        spec.alpha_end = config.alpha_end;
        spec.delta_lpips = config.delta;
        spec.eps_tol = config.tol;
        spec.max_frames = config.max_frames;
        FrameFn frame_fn = [&](double alpha) { return generate_frame(alpha, ctx); };
        seq.alphas = perceptual_uniform_alphas(spec, frame_fn, metric);
        for (double alpha : seq.alphas) {
            seq.frames.push_back(frame_fn(alpha));
        }
        for (size_t i = 0; i + 1 < seq.frames.size(); ++i) {
            seq.hop_distances.push_back(metric(seq.frames[i], seq.frames[i + 1]));
        }
        seq.phase_seconds["sampling"] = seconds_since(t0);

        phase = "metrics";
        t0 = Clock::now();
        seq.metrics.frame_count = static_cast<int>(seq.frames.size());
        seq.metrics.total_lpips = total_lpips(seq.frames, metric);
        seq.metrics.max_lpips = seq.frames.size() >= 3 ? max_lpips(seq.frames, metric) : 0.0;
        const auto [ep_mean, ep_max] = endpoint_error(seq.frames, canon_a, canon_b, metric);
        seq.metrics.endpoint_error_mean = ep_mean;
        seq.metrics.endpoint_error_max = ep_max;
        if (config.ppl_samples > 0) {
            const PplEstimate est =
                ppl_uniform(frame_fn, metric, config.ppl_epsilon, config.ppl_samples, config.seed);
            seq.metrics.ppl = est.mean;
            seq.metrics.ppl_stderr = est.stderr_;
        }
        seq.phase_seconds["metrics"] = seconds_since(t0);
    } catch (const validation_error& e) {
        if (!out_dir.empty()) {
            write_json(out_dir / "failure.json", {{"phase", phase}, {"error", e.what()}});
        }
        throw validation_error("phase " + phase + ": " + e.what());
    } catch (const capability_error& e) {
        if (!out_dir.empty()) {
            write_json(out_dir / "failure.json", {{"phase", phase}, {"error", e.what()}});
        }
        throw capability_error("phase " + phase + ": " + e.what());
    } catch (const std::exception& e) {
        if (!out_dir.empty()) {
            write_json(out_dir / "failure.json", {{"phase", phase}, {"error", e.what()}});
        }
        throw numeric_error("phase " + phase + ": " + e.what());
    }

    return seq;
}

std::filesystem::path persist_sequence(const MorphSequence& seq, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    nlohmann::ordered_json manifest;
    manifest["format"] = "mk-manifest-v1";
    manifest["config"] = seq.provenance.to_kv();
    manifest["gamma"] = seq.gamma;
    manifest["rank_used"] = seq.rank_used;
    manifest["rank_overridden"] = seq.rank_overridden;
    manifest["rank_clamped"] = seq.rank_clamped;
    manifest["backend_checksum"] = seq.backend_checksum;
    manifest["alphas"] = seq.alphas;
    manifest["hop_distances"] = seq.hop_distances;

    nlohmann::ordered_json frames = nlohmann::ordered_json::array();
    for (size_t i = 0; i < seq.frames.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "frame_%04zu_%.6f.png", i, seq.alphas[i]);
        const auto path = out_dir / name;
        write_png(path, seq.frames[i]);
        char digest[32];
        std::snprintf(digest, sizeof digest, "%016llx", static_cast<unsigned long long>(file_hash(path)));
        frames.push_back({{"file", name}, {"alpha", seq.alphas[i]}, {"hash", digest}});
    }
    manifest["frames"] = std::move(frames);

    nlohmann::ordered_json metrics;
    metrics["total_lpips"] = seq.metrics.total_lpips;
    metrics["max_lpips"] = seq.metrics.max_lpips;
    metrics["endpoint_error_mean"] = seq.metrics.endpoint_error_mean;
    metrics["endpoint_error_max"] = seq.metrics.endpoint_error_max;
    metrics["frame_count"] = seq.metrics.frame_count;
    if (seq.metrics.ppl) {
        metrics["ppl"] = *seq.metrics.ppl;
        metrics["ppl_stderr"] = *seq.metrics.ppl_stderr;
    } else {
        metrics["ppl"] = nullptr;
    }
    metrics["fid"] = seq.metrics.fid ? nlohmann::ordered_json(*seq.metrics.fid) : nlohmann::ordered_json(nullptr);
    manifest["metrics"] = std::move(metrics);

    const auto manifest_path = out_dir / "manifest.json";
    write_json(manifest_path, manifest);

    // Wall times live outside the manifest so replays stay byte-identical.
    nlohmann::ordered_json timings;
    for (const auto& [name, secs] : seq.phase_seconds) timings[name] = secs;
    write_json(out_dir / "timings.json", timings);

    return manifest_path;
}

}  // namespace morphkit
