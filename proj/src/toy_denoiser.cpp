#include "morphkit/toy_denoiser.hpp"

#include <cmath>

#include "morphkit/errors.hpp"
#include "morphkit/rng.hpp"
#include "morphkit/schedule.hpp"

namespace morphkit {

std::vector<std::pair<std::string, Eigen::MatrixXd*>> ToyWeights::matrices() {
    return {{"win", &win},
            {"self_attn.wq", &sq}, {"self_attn.wk", &sk}, {"self_attn.wv", &sv}, {"self_attn.wo", &so},
            {"cross_attn.wq", &cq}, {"cross_attn.wk", &ck}, {"cross_attn.wv", &cv}, {"cross_attn.wo", &co},
            {"mlp.w1", &w1}, {"mlp.w2", &w2}, {"wout", &wout}};
}

std::vector<std::pair<std::string, const Eigen::MatrixXd*>> ToyWeights::matrices() const {
    return {{"win", &win},
            {"self_attn.wq", &sq}, {"self_attn.wk", &sk}, {"self_attn.wv", &sv}, {"self_attn.wo", &so},
            {"cross_attn.wq", &cq}, {"cross_attn.wk", &ck}, {"cross_attn.wv", &cv}, {"cross_attn.wo", &co},
            {"mlp.w1", &w1}, {"mlp.w2", &w2}, {"wout", &wout}};
}

std::vector<std::pair<std::string, Eigen::VectorXd*>> ToyWeights::vectors() {
    return {{"mlp.b1", &b1}, {"mlp.b2", &b2}};
}

std::vector<std::pair<std::string, const Eigen::VectorXd*>> ToyWeights::vectors() const {
    return {{"mlp.b1", &b1}, {"mlp.b2", &b2}};
}

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Eigen::MatrixXd with_delta(const Eigen::MatrixXd& base, const AdapterMap* deltas, const std::string& id) {
    if (deltas == nullptr) return base;
    const auto it = deltas->find(id);
    if (it == deltas->end()) return base;
    return base + it->second.effective();
}

void softmax_rows(Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        const double mx = m.row(r).maxCoeff();
        m.row(r) = (m.row(r).array() - mx).exp();
        m.row(r) /= m.row(r).sum();
    }
}

// d softmax: rows of `att` are the probabilities, rows of `d_att` the
// upstream gradient.
Eigen::MatrixXd softmax_rows_back(const Eigen::MatrixXd& att, const Eigen::MatrixXd& d_att) {
    Eigen::MatrixXd d_s(att.rows(), att.cols());
    for (Eigen::Index r = 0; r < att.rows(); ++r) {
        const double dot = d_att.row(r).dot(att.row(r));
        d_s.row(r) = att.row(r).array() * (d_att.row(r).array() - dot);
    }
    return d_s;
}

}  // namespace

ToyDenoiser::ToyDenoiser(ToyDims dims) : dims_(dims) {
    const int side = dims_.image / dims_.patch;
    if (side * dims_.patch != dims_.image || dims_.tokens != side * side ||
        dims_.patch_dim != dims_.patch * dims_.patch || dims_.d_model % 2 != 0) {
        throw validation_error("toy denoiser: inconsistent dims");
    }
    const auto zero = [&](int r, int c) { return Eigen::MatrixXd::Zero(r, c); };
    weights_.win = zero(dims_.d_model, dims_.patch_dim);
    weights_.sq = zero(dims_.d_model, dims_.d_model);
    weights_.sk = zero(dims_.d_model, dims_.d_model);
    weights_.sv = zero(dims_.d_model, dims_.d_model);
    weights_.so = zero(dims_.d_model, dims_.d_model);
    weights_.cq = zero(dims_.d_model, dims_.d_model);
    weights_.ck = zero(dims_.d_model, dims_.d_model);
    weights_.cv = zero(dims_.d_model, dims_.d_model);
    weights_.co = zero(dims_.d_model, dims_.d_model);
    weights_.w1 = zero(dims_.hidden, dims_.d_model);
    weights_.b1 = Eigen::VectorXd::Zero(dims_.hidden);
    weights_.w2 = zero(dims_.d_model, dims_.hidden);
    weights_.b2 = Eigen::VectorXd::Zero(dims_.d_model);
    weights_.wout = zero(dims_.patch_dim, dims_.d_model);

    positional_ = Eigen::MatrixXd(dims_.tokens, dims_.d_model);
    for (int p = 0; p < dims_.tokens; ++p) {
        for (int j = 0; j < dims_.d_model / 2; ++j) {
            const double angle = kTwoPi * (j + 1) * p / dims_.tokens;
            positional_(p, 2 * j) = 0.3 * std::sin(angle);
            positional_(p, 2 * j + 1) = 0.3 * std::cos(angle);
        }
    }

    const NoiseSchedule train = make_scaled_linear_schedule(dims_.train_steps, dims_.schedule_scale);
    skip_coeff_.resize(dims_.train_steps + 1);
    out_coeff_.resize(dims_.train_steps + 1);
    for (int t = 0; t <= dims_.train_steps; ++t) {
        const double b = train.beta(t);
        skip_coeff_[t] = std::sqrt(1.0 - b);
        out_coeff_[t] = t == 0 ? 0.0 : b / std::sqrt(1.0 - b);
    }
}

void ToyDenoiser::init_random(uint64_t seed) {
    Rng rng(seed);
    auto fill = [&](Eigen::MatrixXd& m, double gain) {
        const double scale = gain / std::sqrt(static_cast<double>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = scale * rng.gaussian();
    };
    for (auto& [name, m] : weights_.matrices()) {
        fill(*m, name == "wout" ? 0.1 : 1.0);  // small residual head at init
    }
    weights_.b1.setZero();
    weights_.b2.setZero();
}

Eigen::MatrixXd ToyDenoiser::patchify(const Eigen::VectorXd& x) const {
    const int side = dims_.image / dims_.patch;
    Eigen::MatrixXd out(dims_.tokens, dims_.patch_dim);
    for (int py = 0; py < side; ++py)
        for (int px = 0; px < side; ++px)
            for (int iy = 0; iy < dims_.patch; ++iy)
                for (int ix = 0; ix < dims_.patch; ++ix) {
                    const int y = py * dims_.patch + iy;
                    const int xx = px * dims_.patch + ix;
                    out(py * side + px, iy * dims_.patch + ix) = x[y * dims_.image + xx];
                }
    return out;
}

Eigen::VectorXd ToyDenoiser::unpatchify(const Eigen::MatrixXd& p) const {
    const int side = dims_.image / dims_.patch;
    Eigen::VectorXd out(dims_.latent_size());
    for (int py = 0; py < side; ++py)
        for (int px = 0; px < side; ++px)
            for (int iy = 0; iy < dims_.patch; ++iy)
                for (int ix = 0; ix < dims_.patch; ++ix) {
                    const int y = py * dims_.patch + iy;
                    const int xx = px * dims_.patch + ix;
                    out[y * dims_.image + xx] = p(py * side + px, iy * dims_.patch + ix);
                }
    return out;
}

Eigen::VectorXd ToyDenoiser::time_embedding(int t) const {
    const double tf = static_cast<double>(t) / dims_.train_steps;
    Eigen::VectorXd emb(dims_.d_model);
    const int pairs = dims_.d_model / 2;
    for (int j = 0; j < pairs; ++j) {
        // geometric frequencies between 0.25 and 1.5 cycles over the
        // schedule; kept low so eps stays smooth across coarse solver grids
        const double freq = 0.25 * std::pow(6.0, static_cast<double>(j) / (pairs - 1));
        emb[2 * j] = std::sin(kTwoPi * freq * tf);
        emb[2 * j + 1] = std::cos(kTwoPi * freq * tf);
    }
    return emb;
}

Eigen::VectorXd ToyDenoiser::forward(const Eigen::VectorXd& x, int t, const Eigen::MatrixXd& cond,
                                     const AdapterMap* deltas, Cache* cache) const {
    if (x.size() != dims_.latent_size()) {
        throw validation_error("toy denoiser: latent size mismatch");
    }
    if (cond.rows() != dims_.cond_tokens || cond.cols() != dims_.d_model) {
        throw validation_error("toy denoiser: conditioning shape mismatch");
    }
    if (t < 0 || t > dims_.train_steps) {
        throw validation_error("toy denoiser: timestep outside training range");
    }

    const Eigen::MatrixXd sq_w = with_delta(weights_.sq, deltas, "self_attn.wq");
    const Eigen::MatrixXd sk_w = with_delta(weights_.sk, deltas, "self_attn.wk");
    const Eigen::MatrixXd sv_w = with_delta(weights_.sv, deltas, "self_attn.wv");
    const Eigen::MatrixXd so_w = with_delta(weights_.so, deltas, "self_attn.wo");
    const Eigen::MatrixXd cq_w = with_delta(weights_.cq, deltas, "cross_attn.wq");
    const Eigen::MatrixXd ck_w = with_delta(weights_.ck, deltas, "cross_attn.wk");
    const Eigen::MatrixXd cv_w = with_delta(weights_.cv, deltas, "cross_attn.wv");
    const Eigen::MatrixXd co_w = with_delta(weights_.co, deltas, "cross_attn.wo");

    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dims_.d_model));
    const Eigen::MatrixXd x0 = patchify(x);
    Eigen::MatrixXd xt = x0 * weights_.win.transpose();
    xt.rowwise() += time_embedding(t).transpose();
    xt += positional_;

    // self-attention over latent tokens
    const Eigen::MatrixXd sq = xt * sq_w.transpose();
    const Eigen::MatrixXd sk = xt * sk_w.transpose();
    const Eigen::MatrixXd sv = xt * sv_w.transpose();
    Eigen::MatrixXd satt = inv_sqrt_d * sq * sk.transpose();
    softmax_rows(satt);
    const Eigen::MatrixXd sh = satt * sv;
    const Eigen::MatrixXd y1 = xt + sh * so_w.transpose();

    // cross-attention against the conditioning tokens
    const Eigen::MatrixXd cq = y1 * cq_w.transpose();
    const Eigen::MatrixXd ck = cond * ck_w.transpose();
    const Eigen::MatrixXd cv = cond * cv_w.transpose();
    Eigen::MatrixXd catt = inv_sqrt_d * cq * ck.transpose();
    softmax_rows(catt);
    const Eigen::MatrixXd ch = catt * cv;
    const Eigen::MatrixXd y2 = y1 + ch * co_w.transpose();

    // per-token MLP
    Eigen::MatrixXd z = y2 * weights_.w1.transpose();
    z.rowwise() += weights_.b1.transpose();
    z = z.array().tanh();
    Eigen::MatrixXd o = z * weights_.w2.transpose();
    o.rowwise() += weights_.b2.transpose();
    const Eigen::MatrixXd u = y2 + o;
    const Eigen::MatrixXd out = u * weights_.wout.transpose();

    if (cache != nullptr) {
        cache->c_out = out_coefficient(t);
        cache->x0 = x0;
        cache->x = xt;
        cache->sq = sq;
        cache->sk = sk;
        cache->sv = sv;
        cache->satt = satt;
        cache->sh = sh;
        cache->y1 = y1;
        cache->cq = cq;
        cache->ck = ck;
        cache->cv = cv;
        cache->catt = catt;
        cache->ch = ch;
        cache->y2 = y2;
        cache->z = z;
        cache->u = u;
        cache->cond = cond;
        cache->sq_eff = sq_w;
        cache->sk_eff = sk_w;
        cache->sv_eff = sv_w;
        cache->so_eff = so_w;
        cache->cq_eff = cq_w;
        cache->ck_eff = ck_w;
        cache->cv_eff = cv_w;
        cache->co_eff = co_w;
    }
    return out_coefficient(t) * unpatchify(out) + skip_coefficient(t) * x;
}

void ToyDenoiser::backward(const Cache& cache, const Eigen::VectorXd& d_eps, ToyGrads* grads) const {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(dims_.d_model));
    const Eigen::MatrixXd d_out = cache.c_out * patchify(d_eps);

    Eigen::MatrixXd d_u = d_out * weights_.wout;
    grads->w.wout = d_out.transpose() * cache.u;

    Eigen::MatrixXd d_y2 = d_u;  // residual branch
    const Eigen::MatrixXd& d_o = d_u;

    Eigen::MatrixXd d_z = d_o * weights_.w2;
    grads->w.w2 = d_o.transpose() * cache.z;
    grads->w.b2 = d_o.colwise().sum().transpose();

    const Eigen::MatrixXd d_z1 = d_z.array() * (1.0 - cache.z.array().square());
    d_y2 += d_z1 * weights_.w1;
    grads->w.w1 = d_z1.transpose() * cache.y2;
    grads->w.b1 = d_z1.colwise().sum().transpose();

    // cross-attention
    Eigen::MatrixXd d_ch = d_y2 * cache.co_eff;
    grads->w.co = d_y2.transpose() * cache.ch;
    Eigen::MatrixXd d_catt = d_ch * cache.cv.transpose();
    const Eigen::MatrixXd d_cv = cache.catt.transpose() * d_ch;
    const Eigen::MatrixXd d_cs = softmax_rows_back(cache.catt, d_catt);
    const Eigen::MatrixXd d_cq = inv_sqrt_d * d_cs * cache.ck;
    const Eigen::MatrixXd d_ck = inv_sqrt_d * d_cs.transpose() * cache.cq;

    Eigen::MatrixXd d_y1 = d_y2 + d_cq * cache.cq_eff;
    grads->w.cq = d_cq.transpose() * cache.y1;
    grads->w.ck = d_ck.transpose() * cache.cond;
    grads->w.cv = d_cv.transpose() * cache.cond;
    grads->d_cond = d_ck * cache.ck_eff + d_cv * cache.cv_eff;

    // self-attention
    Eigen::MatrixXd d_sh = d_y1 * cache.so_eff;
    grads->w.so = d_y1.transpose() * cache.sh;
    Eigen::MatrixXd d_satt = d_sh * cache.sv.transpose();
    const Eigen::MatrixXd d_sv = cache.satt.transpose() * d_sh;
    const Eigen::MatrixXd d_ss = softmax_rows_back(cache.satt, d_satt);
    const Eigen::MatrixXd d_sq = inv_sqrt_d * d_ss * cache.sk;
    const Eigen::MatrixXd d_sk = inv_sqrt_d * d_ss.transpose() * cache.sq;

    Eigen::MatrixXd d_x = d_y1 + d_sq * cache.sq_eff + d_sk * cache.sk_eff + d_sv * cache.sv_eff;
    grads->w.sq = d_sq.transpose() * cache.x;
    grads->w.sk = d_sk.transpose() * cache.x;
    grads->w.sv = d_sv.transpose() * cache.x;

    grads->w.win = d_x.transpose() * cache.x0;
}

}  // namespace morphkit
