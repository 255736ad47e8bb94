#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "morphkit/adapters.hpp"
#include "morphkit/image.hpp"
#include "morphkit/schedule.hpp"

namespace morphkit {

// Optimizable conditioning vector: a token_count x embed_dim block treated
// as one flat vector.
struct EmbeddingVector {
    Eigen::VectorXd values;
    int tokens = 0;
    int dim = 0;
    enum class Origin { Initial, Optimized } origin = Origin::Initial;

    Eigen::Index size() const { return values.size(); }
};

class GradientBackend;

// Model-facing interface. Backends are read-only after construction except
// for adapter attachment, which requires exclusive access.
class DenoiserBackend {
public:
    virtual ~DenoiserBackend() = default;

    virtual std::array<int, 3> latent_shape() const = 0;
    Eigen::Index latent_size() const {
        const auto s = latent_shape();
        return static_cast<Eigen::Index>(s[0]) * s[1] * s[2];
    }

    // Training-resolution corruption schedule this model was fit against.
    virtual const NoiseSchedule& train_schedule() const = 0;

    // eps prediction at model timestep t (training-resolution units).
    // e == nullptr selects the unconditional branch (the null token).
    // Attached adapters for the matching branch are applied.
    virtual Eigen::VectorXd predict_noise(const Eigen::VectorXd& x, int t, const EmbeddingVector* e) const = 0;

    virtual EmbeddingVector encode_text(const std::string& prompt) const = 0;
    virtual LatentState encode_image(const Image& img) const = 0;
    virtual Image decode_latent(const LatentState& z) const = 0;
    virtual double codec_roundtrip_tolerance() const = 0;

    virtual std::vector<AdapterTargetInfo> adapter_targets() const = 0;

    // Digest over base weights only; attachment must never change it.
    virtual uint64_t parameter_checksum() const = 0;

    // Adapter routing. The map must stay alive while attached.
    virtual void attach(const AdapterMap* deltas, AdapterBranch branch) = 0;
    virtual void detach(AdapterBranch branch) = 0;
    virtual const AdapterMap* attached(AdapterBranch branch) const = 0;

    // Optional capability: analytic gradients for optimization. Null when
    // the backend cannot differentiate.
    virtual const GradientBackend* gradients() const { return nullptr; }
};

// Gradient capability used by textual inversion and adaptation.
class GradientBackend {
public:
    virtual ~GradientBackend() = default;

    // DPM objective || eps(x_t, t, e) - noise ||^2 with
    // x_t = sqrt(b_t) x0 + sqrt(1 - b_t) noise on the training schedule.
    // grad_e, when non-null, receives d loss / d e. e == nullptr selects the
    // unconditional branch (grad_e must then be null).
    virtual double dpm_loss_grad_e(const Eigen::VectorXd& x0,
                                   const EmbeddingVector* e,
                                   int t,
                                   const Eigen::VectorXd& noise,
                                   Eigen::VectorXd* grad_e) const = 0;

    // Same objective evaluated with `deltas` applied on `branch`; gradients
    // w.r.t. every delta's factors are written into `grads` (keyed like
    // `deltas`, shapes matching down/up).
    struct FactorGrads {
        Eigen::MatrixXd d_down;
        Eigen::MatrixXd d_up;
    };
    virtual double dpm_loss_grad_adapters(const Eigen::VectorXd& x0,
                                          const EmbeddingVector* e,
                                          int t,
                                          const Eigen::VectorXd& noise,
                                          const AdapterMap& deltas,
                                          std::map<std::string, FactorGrads>* grads) const = 0;
};

// RAII attachment: routes predictions through base + delta for one branch,
// restores baseline behavior on destruction.
class ScopedAdapters {
public:
    ScopedAdapters(DenoiserBackend& backend, const AdapterMap& deltas, AdapterBranch branch);
    ~ScopedAdapters();
    ScopedAdapters(const ScopedAdapters&) = delete;
    ScopedAdapters& operator=(const ScopedAdapters&) = delete;

private:
    DenoiserBackend& backend_;
    AdapterBranch branch_;
};

// Validates target ids against backend.adapter_targets() and attaches.
ScopedAdapters attach_adapters(DenoiserBackend& backend, const AdapterMap& deltas, AdapterBranch branch);

}  // namespace morphkit
