#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "morphkit/errors.hpp"
#include "morphkit/pipeline.hpp"
#include "morphkit/rng.hpp"

namespace morphkit {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::map<std::string, std::string> RunConfig::to_kv() const {
    std::map<std::string, std::string> kv;
    kv["backend"] = backend;
    kv["checkpoint"] = checkpoint;
    kv["token"] = token;
    kv["img_a"] = img_a;
    kv["img_b"] = img_b;
    kv["out_dir"] = out_dir;
    kv["seed"] = std::to_string(seed);
    kv["steps"] = std::to_string(steps);
    kv["cfg_min"] = fmt_double(cfg_min);
    kv["cfg_max"] = fmt_double(cfg_max);
    kv["cfg_kind"] = cfg_kind;
    kv["sigma_boost"] = std::to_string(sigma_boost);
    kv["inv_steps"] = std::to_string(inv_steps);
    kv["inv_lr"] = fmt_double(inv_lr);
    kv["rank"] = rank;
    kv["uncond_rank"] = std::to_string(uncond_rank);
    kv["adapt_steps"] = std::to_string(adapt_steps);
    kv["uncond_steps"] = std::to_string(uncond_steps);
    kv["adapt_lr"] = fmt_double(adapt_lr);
    kv["rppd_frames"] = std::to_string(rppd_frames);
    kv["alpha_start"] = fmt_double(alpha_start);
    kv["alpha_end"] = fmt_double(alpha_end);
    kv["delta"] = fmt_double(delta);
    kv["tol"] = fmt_double(tol);
    kv["max_frames"] = std::to_string(max_frames);
    kv["ppl_samples"] = std::to_string(ppl_samples);
    kv["ppl_epsilon"] = fmt_double(ppl_epsilon);
    return kv;
}

RunConfig RunConfig::from_kv(const std::map<std::string, std::string>& kv) {
    RunConfig c;
    auto get = [&](const char* key, auto parse, auto& out) {
        const auto it = kv.find(key);
        if (it != kv.end()) out = parse(it->second);
    };
    auto as_str = [](const std::string& s) { return s; };
    auto as_int = [](const std::string& s) { return std::stoi(s); };
    auto as_u64 = [](const std::string& s) { return std::stoull(s); };
    auto as_double = [](const std::string& s) { return std::stod(s); };

    get("backend", as_str, c.backend);
    get("checkpoint", as_str, c.checkpoint);
    get("token", as_str, c.token);
    get("img_a", as_str, c.img_a);
    get("img_b", as_str, c.img_b);
    get("out_dir", as_str, c.out_dir);
    get("seed", as_u64, c.seed);
    get("steps", as_int, c.steps);
    get("cfg_min", as_double, c.cfg_min);
    get("cfg_max", as_double, c.cfg_max);
    get("cfg_kind", as_str, c.cfg_kind);
    get("sigma_boost", as_int, c.sigma_boost);
    get("inv_steps", as_int, c.inv_steps);
    get("inv_lr", as_double, c.inv_lr);
    get("rank", as_str, c.rank);
    get("uncond_rank", as_int, c.uncond_rank);
    get("adapt_steps", as_int, c.adapt_steps);
    get("uncond_steps", as_int, c.uncond_steps);
    get("adapt_lr", as_double, c.adapt_lr);
    get("rppd_frames", as_int, c.rppd_frames);
    get("alpha_start", as_double, c.alpha_start);
    get("alpha_end", as_double, c.alpha_end);
    get("delta", as_double, c.delta);
    get("tol", as_double, c.tol);
    get("max_frames", as_int, c.max_frames);
    get("ppl_samples", as_int, c.ppl_samples);
    get("ppl_epsilon", as_double, c.ppl_epsilon);
    return c;
}

std::string RunConfig::render() const {
    std::ostringstream out;
    for (const auto& [k, v] : to_kv()) {
        out << k << " = " << v << "\n";
    }
    return out.str();
}

RunConfig RunConfig::parse(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos) {
                throw validation_error("config: malformed line " + std::to_string(line_no) + ": '" + line + "'");
            }
            continue;
        }
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return from_kv(kv);
}

std::vector<std::string> validate_run_config(const RunConfig& c, bool check_images) {
    std::vector<std::string> problems;
    if (c.backend != "toy" && c.backend != "external") {
        problems.push_back("backend must be 'toy' or 'external', got '" + c.backend + "'");
    }
    if (c.backend == "external" && c.checkpoint.empty()) {
        problems.push_back("external backend requires a checkpoint path");
    }
    if (c.token.empty()) problems.push_back("token must be non-empty");
    if (check_images) {
        if (c.img_a.empty() || !std::filesystem::exists(c.img_a)) {
            problems.push_back("input image not readable: '" + c.img_a + "'");
        }
        if (c.img_b.empty() || !std::filesystem::exists(c.img_b)) {
            problems.push_back("input image not readable: '" + c.img_b + "'");
        }
    }
    if (c.steps < 1) problems.push_back("steps must be >= 1");
    if (!(c.cfg_min >= 1.0)) problems.push_back("cfg_min must be >= 1");
    if (!(c.cfg_max >= c.cfg_min)) problems.push_back("cfg_max must be >= cfg_min");
    if (c.cfg_kind != "convex" && c.cfg_kind != "constant") {
        problems.push_back("cfg_kind must be 'convex' or 'constant'");
    }
    if (c.cfg_kind == "constant" && c.cfg_min != c.cfg_max) {
        problems.push_back("constant cfg requires cfg_min == cfg_max");
    }
    if (c.sigma_boost < 0 || c.sigma_boost > c.steps) {
        problems.push_back("sigma_boost must be in [0, steps]");
    }
    if (c.inv_steps < 0) problems.push_back("inv_steps must be >= 0");
    if (!(c.inv_lr > 0.0)) problems.push_back("inv_lr must be > 0");
    if (c.rank != "auto") {
        try {
            if (std::stoi(c.rank) < 1) problems.push_back("rank override must be >= 1");
        } catch (...) {
            problems.push_back("rank must be 'auto' or a positive integer, got '" + c.rank + "'");
        }
    }
    if (c.uncond_rank < 1) problems.push_back("uncond_rank must be >= 1");
    if (c.adapt_steps < 0) problems.push_back("adapt_steps must be >= 0");
    if (c.uncond_steps < 0) problems.push_back("uncond_steps must be >= 0");
    if (!(c.adapt_lr > 0.0)) problems.push_back("adapt_lr must be > 0");
    if (c.rppd_frames < 3) problems.push_back("rppd_frames must be >= 3");
    if (!(c.alpha_start >= 0.0 && c.alpha_start < c.alpha_end && c.alpha_end <= 1.0)) {
        problems.push_back("alpha range must satisfy 0 <= start < end <= 1");
    }
    if (!(c.delta > 0.0)) problems.push_back("delta must be > 0");
    if (!(c.tol > 0.0 && c.tol < c.delta)) problems.push_back("tol must be in (0, delta)");
    if (c.max_frames < 2) problems.push_back("max_frames must be >= 2");
    if (c.ppl_samples < 0) problems.push_back("ppl_samples must be >= 0");
    if (!(c.ppl_epsilon > 0.0 && c.ppl_epsilon < 1.0)) problems.push_back("ppl_epsilon must be in (0, 1)");
    return problems;
}

uint64_t file_hash(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw validation_error("file_hash: cannot open '" + path.string() + "'");
    }
    uint64_t h = 0xcbf29ce484222325ull;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        h = fnv1a(buf, static_cast<size_t>(in.gcount()), h);
    }
    return h;
}

}  // namespace morphkit
