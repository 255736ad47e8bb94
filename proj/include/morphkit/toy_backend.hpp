#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "morphkit/backend.hpp"
#include "morphkit/toy_denoiser.hpp"

namespace morphkit {

// Desk-scale stand-in for a learned perceptual metric: mean absolute
// difference after 2x average pooling. Values land in [0, 1].
double toy_proxy_distance(const Image& a, const Image& b);

struct ToySample {
    Image img;
    int label = 0;  // 0 = blob, 1 = stripes
};

// Two visually distinct 16x16 classes, deterministic under the seed.
std::vector<ToySample> make_toy_dataset(uint64_t seed, int count);
std::string toy_class_prompt(int label);

// Self-contained backend over ToyDenoiser: identity codec at 16x16x1,
// hash-seeded text encoder, full analytic gradients.
class ToyBackend : public DenoiserBackend, public GradientBackend {
public:
    explicit ToyBackend(ToyDims dims = ToyDims{});

    // DenoiserBackend
    std::array<int, 3> latent_shape() const override { return {1, dims_.image, dims_.image}; }
    const NoiseSchedule& train_schedule() const override { return schedule_; }
    Eigen::VectorXd predict_noise(const Eigen::VectorXd& x, int t, const EmbeddingVector* e) const override;
    EmbeddingVector encode_text(const std::string& prompt) const override;
    LatentState encode_image(const Image& img) const override;
    Image decode_latent(const LatentState& z) const override;
    double codec_roundtrip_tolerance() const override { return 1e-12; }
    std::vector<AdapterTargetInfo> adapter_targets() const override;
    uint64_t parameter_checksum() const override;
    void attach(const AdapterMap* deltas, AdapterBranch branch) override;
    void detach(AdapterBranch branch) override;
    const AdapterMap* attached(AdapterBranch branch) const override;
    const GradientBackend* gradients() const override { return this; }

    // GradientBackend
    double dpm_loss_grad_e(const Eigen::VectorXd& x0, const EmbeddingVector* e, int t,
                           const Eigen::VectorXd& noise, Eigen::VectorXd* grad_e) const override;
    double dpm_loss_grad_adapters(const Eigen::VectorXd& x0, const EmbeddingVector* e, int t,
                                  const Eigen::VectorXd& noise, const AdapterMap& deltas,
                                  std::map<std::string, GradientBackend::FactorGrads>* grads) const override;

    ToyDenoiser& denoiser() { return denoiser_; }
    const ToyDenoiser& denoiser() const { return denoiser_; }
    const EmbeddingVector& null_embedding() const { return null_embedding_; }

    Eigen::MatrixXd embedding_as_tokens(const EmbeddingVector& e) const;

    struct TrainInfo {
        uint64_t seed = 0;
        int epochs = 0;
        bool trained = false;
    };
    const TrainInfo& train_info() const { return train_info_; }
    void set_train_info(TrainInfo info) { train_info_ = info; }

private:
    ToyDims dims_;
    ToyDenoiser denoiser_;
    NoiseSchedule schedule_;
    EmbeddingVector null_embedding_;
    const AdapterMap* attached_cond_ = nullptr;
    const AdapterMap* attached_uncond_ = nullptr;
    TrainInfo train_info_;
};

// Trains a fresh ToyBackend on the seeded dataset with the DPM objective
// (10% of samples unconditioned). Throws numeric_error if the probe loss
// fails to improve; with epochs == 0 returns the untrained model flagged as
// such. Probe loss must drop by at least 50% for a default run.
std::shared_ptr<ToyBackend> train_toy_denoiser(uint64_t seed, int epochs = 60);

// Mean DPM loss over a deterministic probe batch; the yardstick used by
// training and adaptation tests.
double probe_dpm_loss(const DenoiserBackend& backend, const std::vector<ToySample>& probe_images,
                      const EmbeddingVector* e, uint64_t seed, int samples = 32);

}  // namespace morphkit
