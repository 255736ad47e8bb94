#include "morphkit/toy_backend.hpp"

#include <cmath>

#include "morphkit/adam.hpp"
#include "morphkit/errors.hpp"
#include "morphkit/rng.hpp"

namespace morphkit {

double toy_proxy_distance(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
        throw validation_error("toy_proxy_distance: image shape mismatch");
    }
    const int pw = a.width / 2;
    const int ph = a.height / 2;
    double acc = 0.0;
    for (int c = 0; c < a.channels; ++c)
        for (int y = 0; y < ph; ++y)
            for (int x = 0; x < pw; ++x) {
                double pa = 0.0, pb = 0.0;
                for (int dy = 0; dy < 2; ++dy)
                    for (int dx = 0; dx < 2; ++dx) {
                        pa += a.at(2 * y + dy, 2 * x + dx, c);
                        pb += b.at(2 * y + dy, 2 * x + dx, c);
                    }
                acc += std::abs(pa - pb) / 4.0;
            }
    return acc / (static_cast<double>(pw) * ph * a.channels);
}

namespace {

// Each class is an affine family: a fixed template plus a low-rank smooth
// variation basis with Gaussian coefficients. Gaussian class distributions
// keep the denoising posterior smooth enough for the desk-scale model to
// fit, which 16-step ODE inversion accuracy depends on.
Image render_blob(double cx, double cy, double r) {
    Image img(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const double d = std::sqrt((x - cx) * (x - cx) + (y - cy) * (y - cy)) / r;
            img.at(y, x) = 0.1 + 0.8 / (1.0 + std::exp((d - 1.0) * 4.0));
        }
    return img;
}

Image render_cross(double vx, double hy) {
    Image img(16, 16, 1);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const double dv = std::abs(x - vx) - 1.5;
            const double dh = std::abs(y - hy) - 1.5;
            const double bar = std::max(1.0 / (1.0 + std::exp(dv * 4.0)), 1.0 / (1.0 + std::exp(dh * 4.0)));
            img.at(y, x) = 0.9 - 0.8 * bar;
        }
    return img;
}

Eigen::VectorXd as_vec(const Image& img) {
    return Eigen::Map<const Eigen::VectorXd>(img.px.data(), static_cast<Eigen::Index>(img.px.size()));
}

struct ToyClassBasis {
    Eigen::VectorXd mean;
    std::vector<Eigen::VectorXd> modes;  // unit-coefficient variation images
};

const ToyClassBasis& class_basis(int label) {
    static const ToyClassBasis blob = [] {
        ToyClassBasis b;
        b.mean = as_vec(render_blob(7.75, 7.75, 4.2));
        const double h = 0.75;
        b.modes = {
            (as_vec(render_blob(7.75 + h, 7.75, 4.2)) - as_vec(render_blob(7.75 - h, 7.75, 4.2))) / 2.0,
            (as_vec(render_blob(7.75, 7.75 + h, 4.2)) - as_vec(render_blob(7.75, 7.75 - h, 4.2))) / 2.0,
            (as_vec(render_blob(7.75, 7.75, 4.2 + 0.6)) - as_vec(render_blob(7.75, 7.75, 4.2 - 0.6))) / 2.0,
        };
        return b;
    }();
    static const ToyClassBasis cross = [] {
        ToyClassBasis b;
        b.mean = as_vec(render_cross(7.75, 7.75));
        const double h = 1.0;
        b.modes = {
            (as_vec(render_cross(7.75 + h, 7.75)) - as_vec(render_cross(7.75 - h, 7.75))) / 2.0,
            (as_vec(render_cross(7.75, 7.75 + h)) - as_vec(render_cross(7.75, 7.75 - h))) / 2.0,
        };
        return b;
    }();
    return label == 0 ? blob : cross;
}

Image compose_sample(int label, Rng& rng) {
    const ToyClassBasis& basis = class_basis(label);
    Eigen::VectorXd v = basis.mean;
    // subtle intra-class variation: few-step ODE inversion contracts
    // low-variance directions, so the class mass stays near the template
    for (const auto& mode : basis.modes) {
        v += 0.25 * rng.gaussian() * mode;
    }
    Image img(16, 16, 1);
    for (size_t i = 0; i < img.px.size(); ++i) {
        img.px[i] = std::clamp(v[static_cast<Eigen::Index>(i)], 0.0, 1.0);
    }
    return img;
}

}  // namespace

std::vector<ToySample> make_toy_dataset(uint64_t seed, int count) {
    Rng rng(seed ^ 0x7031d5a161626c6full);
    std::vector<ToySample> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        ToySample s;
        s.label = i % 2;
        s.img = quantize16(compose_sample(s.label, rng));
        out.push_back(std::move(s));
    }
    return out;
}

std::string toy_class_prompt(int label) {
    return label == 0 ? "an image of blob" : "an image of cross";
}

ToyBackend::ToyBackend(ToyDims dims)
    : dims_(dims), denoiser_(dims), schedule_(make_scaled_linear_schedule(dims.train_steps, dims.schedule_scale)) {
    denoiser_.init_random(0xb100d);
    null_embedding_ = encode_text("");
}

Eigen::MatrixXd ToyBackend::embedding_as_tokens(const EmbeddingVector& e) const {
    if (e.values.size() != dims_.embed_size()) {
        throw validation_error("toy backend: embedding size mismatch");
    }
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        e.values.data(), dims_.cond_tokens, dims_.d_model);
}

Eigen::VectorXd ToyBackend::predict_noise(const Eigen::VectorXd& x, int t, const EmbeddingVector* e) const {
    const AdapterMap* deltas = (e != nullptr) ? attached_cond_ : attached_uncond_;
    const Eigen::MatrixXd cond = embedding_as_tokens(e != nullptr ? *e : null_embedding_);
    return denoiser_.forward(x, t, cond, deltas);
}

EmbeddingVector ToyBackend::encode_text(const std::string& prompt) const {
    Rng rng(fnv1a(prompt) ^ 0x7e787431u);
    EmbeddingVector e;
    e.tokens = dims_.cond_tokens;
    e.dim = dims_.d_model;
    e.values = 0.5 * rng.gaussian_vector(dims_.embed_size());
    e.origin = EmbeddingVector::Origin::Initial;
    return e;
}

LatentState ToyBackend::encode_image(const Image& img) const {
    Image gray = to_gray(img);
    if (gray.width != dims_.image || gray.height != dims_.image) {
        gray = resize_center_crop(gray, dims_.image, dims_.image);
    }
    LatentState z;
    z.shape = latent_shape();
    z.t = 0;
    z.tensor = Eigen::Map<const Eigen::VectorXd>(gray.px.data(), static_cast<Eigen::Index>(gray.px.size()));
    return z;
}

Image ToyBackend::decode_latent(const LatentState& z) const {
    if (z.tensor.size() != latent_size()) {
        throw validation_error("toy backend: latent size mismatch in decode");
    }
    Image img(dims_.image, dims_.image, 1);
    for (size_t i = 0; i < img.px.size(); ++i) {
        img.px[i] = std::clamp(z.tensor[static_cast<Eigen::Index>(i)], 0.0, 1.0);
    }
    return img;
}

std::vector<AdapterTargetInfo> ToyBackend::adapter_targets() const {
    std::vector<AdapterTargetInfo> out;
    for (const auto& [name, m] : denoiser_.weights().matrices()) {
        if (name.find("attn.") != std::string::npos) {
            out.push_back({name, static_cast<int>(m->rows()), static_cast<int>(m->cols())});
        }
    }
    return out;
}

uint64_t ToyBackend::parameter_checksum() const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& [name, m] : denoiser_.weights().matrices()) {
        h = fnv1a(name, h);
        h = hash_doubles(m->data(), static_cast<size_t>(m->size()), h);
    }
    for (const auto& [name, v] : denoiser_.weights().vectors()) {
        h = fnv1a(name, h);
        h = hash_doubles(v->data(), static_cast<size_t>(v->size()), h);
    }
    return h;
}

void ToyBackend::attach(const AdapterMap* deltas, AdapterBranch branch) {
    if (branch == AdapterBranch::Conditional) {
        attached_cond_ = deltas;
    } else {
        attached_uncond_ = deltas;
    }
}

void ToyBackend::detach(AdapterBranch branch) {
    attach(nullptr, branch);
}

const AdapterMap* ToyBackend::attached(AdapterBranch branch) const {
    return branch == AdapterBranch::Conditional ? attached_cond_ : attached_uncond_;
}

double ToyBackend::dpm_loss_grad_e(const Eigen::VectorXd& x0, const EmbeddingVector* e, int t,
                                   const Eigen::VectorXd& noise, Eigen::VectorXd* grad_e) const {
    if (t < 1 || t > schedule_.steps()) {
        throw validation_error("dpm_loss: t outside [1, T]");
    }
    if (noise.size() != x0.size()) {
        throw validation_error("dpm_loss: noise shape mismatch");
    }
    if (e == nullptr && grad_e != nullptr) {
        throw validation_error("dpm_loss: cannot take embedding gradient of the null token");
    }
    const double b = schedule_.beta(t);
    const Eigen::VectorXd x_t = std::sqrt(b) * x0 + std::sqrt(1.0 - b) * noise;
    const AdapterMap* deltas = (e != nullptr) ? attached_cond_ : attached_uncond_;
    const Eigen::MatrixXd cond = embedding_as_tokens(e != nullptr ? *e : null_embedding_);

    ToyDenoiser::Cache cache;
    const Eigen::VectorXd eps = denoiser_.forward(x_t, t, cond, deltas, grad_e ? &cache : nullptr);
    if (!eps.allFinite()) {
        throw numeric_error("dpm_loss: model output non-finite");
    }
    const Eigen::VectorXd resid = eps - noise;
    const double loss = resid.squaredNorm();
    if (grad_e != nullptr) {
        ToyGrads grads;
        denoiser_.backward(cache, 2.0 * resid, &grads);
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = grads.d_cond;
        *grad_e = Eigen::Map<const Eigen::VectorXd>(rm.data(), rm.size());
    }
    return loss;
}

double ToyBackend::dpm_loss_grad_adapters(const Eigen::VectorXd& x0, const EmbeddingVector* e, int t,
                                          const Eigen::VectorXd& noise, const AdapterMap& deltas,
                                          std::map<std::string, GradientBackend::FactorGrads>* grads) const {
    if (t < 1 || t > schedule_.steps()) {
        throw validation_error("dpm_loss: t outside [1, T]");
    }
    const double b = schedule_.beta(t);
    const Eigen::VectorXd x_t = std::sqrt(b) * x0 + std::sqrt(1.0 - b) * noise;
    const Eigen::MatrixXd cond = embedding_as_tokens(e != nullptr ? *e : null_embedding_);

    ToyDenoiser::Cache cache;
    const Eigen::VectorXd eps = denoiser_.forward(x_t, t, cond, &deltas, grads ? &cache : nullptr);
    if (!eps.allFinite()) {
        throw numeric_error("dpm_loss: model output non-finite");
    }
    const Eigen::VectorXd resid = eps - noise;
    const double loss = resid.squaredNorm();
    if (grads != nullptr) {
        ToyGrads g;
        denoiser_.backward(cache, 2.0 * resid, &g);
        std::map<std::string, const Eigen::MatrixXd*> eff_grads;
        for (const auto& [name, m] : g.w.matrices()) eff_grads[name] = m;
        for (const auto& [id, delta] : deltas) {
            const auto it = eff_grads.find(id);
            if (it == eff_grads.end()) {
                throw validation_error("dpm_loss: unknown adapter target '" + id + "'");
            }
            const Eigen::MatrixXd& dW = *it->second;
            GradientBackend::FactorGrads fg;
            fg.d_down = delta.scale * delta.up.transpose() * dW;
            fg.d_up = delta.scale * dW * delta.down.transpose();
            (*grads)[id] = std::move(fg);
        }
    }
    return loss;
}

double probe_dpm_loss(const DenoiserBackend& backend, const std::vector<ToySample>& probe_images,
                      const EmbeddingVector* e, uint64_t seed, int samples) {
    const auto* grad_backend = backend.gradients();
    if (grad_backend == nullptr) {
        throw capability_error("probe_dpm_loss: backend does not expose gradients");
    }
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    double acc = 0.0;
    for (int i = 0; i < samples; ++i) {
        const ToySample& s = probe_images[i % probe_images.size()];
        const LatentState z = backend.encode_image(s.img);
        const int t = static_cast<int>(rng.uniform_int(1, backend.train_schedule().steps()));
        const Eigen::VectorXd noise = rng.gaussian_vector(z.tensor.size());
        const EmbeddingVector cls = backend.encode_text(toy_class_prompt(s.label));
        acc += grad_backend->dpm_loss_grad_e(z.tensor, e != nullptr ? e : &cls, t, noise, nullptr);
    }
    return acc / samples;
}

std::shared_ptr<ToyBackend> train_toy_denoiser(uint64_t seed, int epochs) {
    auto backend = std::make_shared<ToyBackend>();
    backend->denoiser().init_random(seed ^ 0x1717c0ffee11ull);
    backend->set_train_info({seed, epochs, epochs > 0});
    if (epochs <= 0) {
        return backend;  // untrained, flagged via train_info().trained == false
    }

    const auto dataset = make_toy_dataset(seed, 256);
    const auto probe = make_toy_dataset(seed ^ 0x50b0beull, 16);
    const double before = probe_dpm_loss(*backend, probe, nullptr, seed);

    const int batch = 16;
    const int steps_per_epoch = static_cast<int>(dataset.size()) / batch;
    ToyWeights& w = backend->denoiser().weights();
    std::vector<AdamState> mat_opt(w.matrices().size(), AdamState(2e-3));
    std::vector<AdamState> vec_opt(w.vectors().size(), AdamState(2e-3));

    Rng rng(seed ^ 0x7261696eull);
    const NoiseSchedule& sched = backend->train_schedule();
    const Eigen::Index n = backend->latent_size();

    const int total_steps = epochs * steps_per_epoch;
    int global_step = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (int step = 0; step < steps_per_epoch; ++step) {
            // cosine decay to 5% of the base rate
            const double progress = static_cast<double>(global_step++) / total_steps;
            const double lr = 2e-3 * (0.05 + 0.95 * 0.5 * (1.0 + std::cos(3.14159265358979 * progress)));
            for (auto& o : mat_opt) o.set_lr(lr);
            for (auto& o : vec_opt) o.set_lr(lr);
            ToyGrads total;
            {
                auto wm = w.matrices();
                auto gm = total.w.matrices();
                for (size_t i = 0; i < wm.size(); ++i) {
                    gm[i].second->setZero(wm[i].second->rows(), wm[i].second->cols());
                }
                auto wv = w.vectors();
                auto gv = total.w.vectors();
                for (size_t i = 0; i < wv.size(); ++i) gv[i].second->setZero(wv[i].second->size());
            }

            for (int i = 0; i < batch; ++i) {
                const ToySample& s = dataset[static_cast<size_t>(rng.uniform_int(0, dataset.size() - 1))];
                const LatentState z = backend->encode_image(s.img);
                // skip the extreme low-noise zone: its 1/sqrt(1-beta)
                // amplification swamps the loss with targets a model this
                // size cannot express, starving the fittable region
                const int t = static_cast<int>(rng.uniform_int(48, sched.steps()));
                const Eigen::VectorXd noise = rng.gaussian_vector(n);
                const bool drop_cond = rng.uniform() < 0.1;
                const EmbeddingVector emb =
                    drop_cond ? backend->null_embedding() : backend->encode_text(toy_class_prompt(s.label));

                const double b = sched.beta(t);
                const Eigen::VectorXd x_t = std::sqrt(b) * z.tensor + std::sqrt(1.0 - b) * noise;
                ToyDenoiser::Cache cache;
                const Eigen::VectorXd eps =
                    backend->denoiser().forward(x_t, t, backend->embedding_as_tokens(emb), nullptr, &cache);
                const Eigen::VectorXd d_eps = (2.0 / (batch * n)) * (eps - noise);
                ToyGrads g;
                backend->denoiser().backward(cache, d_eps, &g);
                auto gm = total.w.matrices();
                auto sm = g.w.matrices();
                for (size_t k = 0; k < gm.size(); ++k) *gm[k].second += *sm[k].second;
                auto gv = total.w.vectors();
                auto sv = g.w.vectors();
                for (size_t k = 0; k < gv.size(); ++k) *gv[k].second += *sv[k].second;
            }

            auto mats = w.matrices();
            auto gmats = total.w.matrices();
            for (size_t i = 0; i < mats.size(); ++i) {
                mat_opt[i].update(*mats[i].second, *gmats[i].second);
            }
            auto vecs = w.vectors();
            auto gvecs = total.w.vectors();
            for (size_t i = 0; i < vecs.size(); ++i) {
                vec_opt[i].update(*vecs[i].second, *gvecs[i].second);
            }
        }
    }

    const double after = probe_dpm_loss(*backend, probe, nullptr, seed);
    if (!(after < before)) {
        throw numeric_error("train_toy_denoiser: probe loss did not improve (" + std::to_string(before) + " -> " +
                            std::to_string(after) + ")");
    }
    return backend;
}

}  // namespace morphkit
