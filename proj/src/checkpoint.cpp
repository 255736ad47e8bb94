#include "morphkit/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "morphkit/errors.hpp"
#include "morphkit/rng.hpp"

namespace morphkit {

namespace {

constexpr char kB64Chars[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_index(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

nlohmann::ordered_json read_json_file(const std::filesystem::path& path, const char* what) {
    if (!std::filesystem::exists(path)) {
        throw capability_error(std::string(what) + ": file not found: '" + path.string() + "'");
    }
    std::ifstream in(path);
    nlohmann::ordered_json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw capability_error(std::string(what) + ": cannot parse '" + path.string() + "': " + e.what());
    }
    return j;
}

}  // namespace

std::string base64_encode(const unsigned char* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (size_t i = 0; i < len; i += 3) {
        const unsigned b0 = data[i];
        const unsigned b1 = i + 1 < len ? data[i + 1] : 0;
        const unsigned b2 = i + 2 < len ? data[i + 2] : 0;
        out.push_back(kB64Chars[b0 >> 2]);
        out.push_back(kB64Chars[((b0 & 0x3) << 4) | (b1 >> 4)]);
        out.push_back(i + 1 < len ? kB64Chars[((b1 & 0xf) << 2) | (b2 >> 6)] : '=');
        out.push_back(i + 2 < len ? kB64Chars[b2 & 0x3f] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
    std::vector<unsigned char> out;
    out.reserve(text.size() / 4 * 3);
    int acc = 0;
    int bits = 0;
    for (char c : text) {
        if (c == '=' || c == '\n' || c == '\r') continue;
        const int v = b64_index(c);
        if (v < 0) {
            throw validation_error("base64: invalid character");
        }
        acc = (acc << 6) | v;
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<unsigned char>((acc >> bits) & 0xff));
        }
    }
    return out;
}

std::string encode_doubles(const Eigen::MatrixXd& m) {
    return base64_encode(reinterpret_cast<const unsigned char*>(m.data()), sizeof(double) * m.size());
}

Eigen::MatrixXd decode_doubles(const std::string& text, Eigen::Index rows, Eigen::Index cols) {
    const std::vector<unsigned char> bytes = base64_decode(text);
    if (bytes.size() != sizeof(double) * static_cast<size_t>(rows) * cols) {
        throw capability_error("checkpoint: weight blob size mismatch");
    }
    Eigen::MatrixXd m(rows, cols);
    std::memcpy(m.data(), bytes.data(), bytes.size());
    return m;
}

void save_checkpoint(const ToyBackend& backend, const std::filesystem::path& path) {
    const ToyDims& d = backend.denoiser().dims();
    nlohmann::ordered_json j;
    j["format"] = "mk-checkpoint-v1";
    j["kind"] = "toy-attn-v1";
    j["dtype"] = "f64";
    j["dims"] = {{"image", d.image},   {"patch", d.patch},           {"d_model", d.d_model},
                 {"cond_tokens", d.cond_tokens}, {"hidden", d.hidden}, {"train_steps", d.train_steps}};
    j["train"] = {{"seed", backend.train_info().seed},
                  {"epochs", backend.train_info().epochs},
                  {"trained", backend.train_info().trained}};
    j["codec"] = {{"kind", "identity"}, {"roundtrip_tol", backend.codec_roundtrip_tolerance()}};
    nlohmann::ordered_json weights;
    for (const auto& [name, m] : backend.denoiser().weights().matrices()) {
        weights[name] = {{"rows", m->rows()}, {"cols", m->cols()}, {"data", encode_doubles(*m)}};
    }
    for (const auto& [name, v] : backend.denoiser().weights().vectors()) {
        weights[name] = {{"rows", v->size()}, {"cols", 1}, {"data", encode_doubles(*v)}};
    }
    j["weights"] = std::move(weights);
    char digest[32];
    std::snprintf(digest, sizeof digest, "%016llx",
                  static_cast<unsigned long long>(backend.parameter_checksum()));
    j["checksum"] = digest;

    std::ofstream out(path);
    if (!out) {
        throw validation_error("save_checkpoint: cannot write '" + path.string() + "'");
    }
    out << j.dump(1) << "\n";
}

std::shared_ptr<DenoiserBackend> external_checkpoint_adapter(const std::filesystem::path& path,
                                                             const std::string& dtype,
                                                             const std::string& device) {
    const nlohmann::ordered_json j = read_json_file(path, "external_checkpoint_adapter");
    if (j.value("format", "") != "mk-checkpoint-v1") {
        throw capability_error("external_checkpoint_adapter: unsupported format in '" + path.string() + "'");
    }
    if (j.value("kind", "") != "toy-attn-v1") {
        throw capability_error("external_checkpoint_adapter: unsupported model kind '" +
                               j.value("kind", std::string("<missing>")) + "'");
    }
    if (dtype != "f64") {
        throw capability_error("external_checkpoint_adapter: unsupported dtype '" + dtype + "' (only f64)");
    }
    if (device != "cpu") {
        throw capability_error("external_checkpoint_adapter: unsupported device '" + device + "' (only cpu)");
    }

    ToyDims dims;
    const auto& dj = j.at("dims");
    dims.image = dj.at("image").get<int>();
    dims.patch = dj.at("patch").get<int>();
    dims.d_model = dj.at("d_model").get<int>();
    dims.cond_tokens = dj.at("cond_tokens").get<int>();
    dims.hidden = dj.at("hidden").get<int>();
    dims.train_steps = dj.at("train_steps").get<int>();
    dims.tokens = (dims.image / dims.patch) * (dims.image / dims.patch);
    dims.patch_dim = dims.patch * dims.patch;

    auto backend = std::make_shared<ToyBackend>(dims);
    const auto& wj = j.at("weights");
    for (auto& [name, m] : backend->denoiser().weights().matrices()) {
        if (!wj.contains(name)) {
            throw capability_error("external_checkpoint_adapter: missing weight '" + name + "'");
        }
        const auto& entry = wj.at(name);
        if (entry.at("rows").get<Eigen::Index>() != m->rows() || entry.at("cols").get<Eigen::Index>() != m->cols()) {
            throw capability_error("external_checkpoint_adapter: shape mismatch for weight '" + name + "'");
        }
        *m = decode_doubles(entry.at("data").get<std::string>(), m->rows(), m->cols());
    }
    for (auto& [name, v] : backend->denoiser().weights().vectors()) {
        if (!wj.contains(name)) {
            throw capability_error("external_checkpoint_adapter: missing weight '" + name + "'");
        }
        const auto& entry = wj.at(name);
        *v = decode_doubles(entry.at("data").get<std::string>(), v->size(), 1);
    }
    if (j.contains("train")) {
        ToyBackend::TrainInfo info;
        info.seed = j["train"].value("seed", 0ull);
        info.epochs = j["train"].value("epochs", 0);
        info.trained = j["train"].value("trained", false);
        backend->set_train_info(info);
    }
    if (j.contains("checksum")) {
        char digest[32];
        std::snprintf(digest, sizeof digest, "%016llx",
                      static_cast<unsigned long long>(backend->parameter_checksum()));
        if (j["checksum"].get<std::string>() != digest) {
            throw capability_error("external_checkpoint_adapter: checksum mismatch in '" + path.string() + "'");
        }
    }
    return backend;
}

void save_adapters(const AdapterSet& adapters, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["format"] = "mk-adapters-v1";
    j["targets"] = adapters.targets;
    j["rank_cond"] = adapters.rank_cond;
    j["rank_uncond"] = adapters.rank_uncond;
    auto dump_branch = [](const AdapterMap& map) {
        nlohmann::ordered_json out;
        for (const auto& [id, d] : map) {
            out[id] = {{"rows", d.up.rows()},  {"cols", d.down.cols()}, {"rank", d.rank},
                       {"scale", d.scale},     {"down", encode_doubles(d.down)},
                       {"up", encode_doubles(d.up)}};
        }
        return out;
    };
    j["conditional"] = dump_branch(adapters.conditional);
    j["unconditional"] = dump_branch(adapters.unconditional);

    std::ofstream out(path);
    if (!out) {
        throw validation_error("save_adapters: cannot write '" + path.string() + "'");
    }
    out << j.dump(1) << "\n";
}

AdapterSet load_adapters(const std::filesystem::path& path) {
    const nlohmann::ordered_json j = read_json_file(path, "load_adapters");
    if (j.value("format", "") != "mk-adapters-v1") {
        throw capability_error("load_adapters: unsupported format in '" + path.string() + "'");
    }
    AdapterSet set;
    set.targets = j.at("targets").get<std::vector<std::string>>();
    set.rank_cond = j.value("rank_cond", 0);
    set.rank_uncond = j.value("rank_uncond", 0);
    auto parse_branch = [](const nlohmann::ordered_json& branch) {
        AdapterMap map;
        for (const auto& [id, entry] : branch.items()) {
            LowRankDelta d;
            d.rank = entry.at("rank").get<int>();
            d.scale = entry.at("scale").get<double>();
            const auto rows = entry.at("rows").get<Eigen::Index>();
            const auto cols = entry.at("cols").get<Eigen::Index>();
            d.down = decode_doubles(entry.at("down").get<std::string>(), d.rank, cols);
            d.up = decode_doubles(entry.at("up").get<std::string>(), rows, d.rank);
            map[id] = std::move(d);
        }
        return map;
    };
    set.conditional = parse_branch(j.at("conditional"));
    set.unconditional = parse_branch(j.at("unconditional"));
    return set;
}

}  // namespace morphkit
