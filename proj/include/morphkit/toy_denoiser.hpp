#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "morphkit/adapters.hpp"

namespace morphkit {

// Architecture constants for the desk-scale denoiser: a 16x16 single-channel
// latent split into 4x4 patches, one self-attention block over the latent
// tokens, one cross-attention block against the conditioning tokens, and a
// per-token MLP. Small enough to train on a CPU in seconds, differentiable
// by hand.
struct ToyDims {
    int image = 16;        // latent is image x image
    int patch = 4;         // patch side
    int tokens = 16;       // (image/patch)^2
    int patch_dim = 16;    // patch^2
    int d_model = 32;
    int cond_tokens = 4;   // conditioning tokens
    int hidden = 64;       // MLP width
    int train_steps = 1000;
    // Variance scale of the toy training schedule. The milder tail
    // (cumulative signal ~0.04 at T) keeps 16-step ODE inversion accurate
    // for a model this size.
    double schedule_scale = 0.6004458089463038;

    int latent_size() const { return image * image; }
    int embed_size() const { return cond_tokens * d_model; }
};

struct ToyWeights {
    Eigen::MatrixXd win;   // d_model x patch_dim
    Eigen::MatrixXd sq;    // d_model x d_model, self-attention projections
    Eigen::MatrixXd sk;
    Eigen::MatrixXd sv;
    Eigen::MatrixXd so;
    Eigen::MatrixXd cq;    // d_model x d_model, cross-attention projections
    Eigen::MatrixXd ck;
    Eigen::MatrixXd cv;
    Eigen::MatrixXd co;
    Eigen::MatrixXd w1;    // hidden x d_model
    Eigen::VectorXd b1;    // hidden
    Eigen::MatrixXd w2;    // d_model x hidden
    Eigen::VectorXd b2;    // d_model
    Eigen::MatrixXd wout;  // patch_dim x d_model

    std::vector<std::pair<std::string, Eigen::MatrixXd*>> matrices();
    std::vector<std::pair<std::string, const Eigen::MatrixXd*>> matrices() const;
    std::vector<std::pair<std::string, Eigen::VectorXd*>> vectors();
    std::vector<std::pair<std::string, const Eigen::VectorXd*>> vectors() const;
};

struct ToyGrads {
    ToyWeights w;             // gradients, same shapes
    Eigen::MatrixXd d_cond;   // cond_tokens x d_model
};

// eps predictor. The eight attention projections are the adapter targets;
// `deltas` (optional) adds low-rank updates to them for this evaluation
// only. The prediction is sqrt(1 - beta(t)) * x plus the learned residual,
// which keeps the function smooth across coarse solver grids.
class ToyDenoiser {
public:
    explicit ToyDenoiser(ToyDims dims);

    const ToyDims& dims() const { return dims_; }
    ToyWeights& weights() { return weights_; }
    const ToyWeights& weights() const { return weights_; }

    struct Cache {
        double c_out = 1.0;
        Eigen::MatrixXd x0, x;
        Eigen::MatrixXd sq, sk, sv, satt, sh, y1;   // self-attention block
        Eigen::MatrixXd cq, ck, cv, catt, ch, y2;   // cross-attention block
        Eigen::MatrixXd z, u;
        Eigen::MatrixXd cond;
        Eigen::MatrixXd sq_eff, sk_eff, sv_eff, so_eff;
        Eigen::MatrixXd cq_eff, ck_eff, cv_eff, co_eff;
    };

    Eigen::VectorXd forward(const Eigen::VectorXd& x, int t, const Eigen::MatrixXd& cond,
                            const AdapterMap* deltas = nullptr, Cache* cache = nullptr) const;

    // Backpropagates d loss / d eps. Attention-projection gradients in
    // `grads->w` are w.r.t. the effective matrices (base + delta).
    void backward(const Cache& cache, const Eigen::VectorXd& d_eps, ToyGrads* grads) const;

    void init_random(uint64_t seed);

    Eigen::MatrixXd patchify(const Eigen::VectorXd& x) const;
    Eigen::VectorXd unpatchify(const Eigen::MatrixXd& p) const;
    Eigen::VectorXd time_embedding(int t) const;

    // Prediction preconditioning over the training schedule:
    //   eps_hat = skip(t) * x + out(t) * F(x, t, e)
    // with skip = sqrt(1 - beta) and out = beta / sqrt(1 - beta) (0 at t = 0).
    // The network face F then only ever produces O(1) values; the steep
    // low-t amplification of the eps target lives in out(t).
    double skip_coefficient(int t) const { return skip_coeff_.at(t); }
    double out_coefficient(int t) const { return out_coeff_.at(t); }

private:
    ToyDims dims_;
    ToyWeights weights_;
    Eigen::MatrixXd positional_;     // tokens x d_model, fixed
    std::vector<double> skip_coeff_;
    std::vector<double> out_coeff_;
};

}  // namespace morphkit
