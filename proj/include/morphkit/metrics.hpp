#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "morphkit/image.hpp"

namespace morphkit {

struct MorphSequence;

struct PathMetricsReport {
    double total_lpips = 0.0;
    double max_lpips = 0.0;
    std::optional<double> ppl;
    std::optional<double> ppl_stderr;
    double endpoint_error_mean = 0.0;
    double endpoint_error_max = 0.0;
    std::optional<double> fid;
    int frame_count = 0;
};

// Sum of consecutive perceptual distances.
double total_lpips(const std::vector<Image>& frames, const ImageMetric& metric);

// max over interior frames of the distance to the nearest endpoint.
double max_lpips(const std::vector<Image>& frames, const ImageMetric& metric);

struct PplEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    int samples = 0;
};

// Monte-Carlo perceptual path length: E[ d(x(a), x(a+eps)) / eps^2 ] with
// a ~ U(0,1), redrawing when a + eps > 1.
PplEstimate ppl_uniform(const std::function<Image(double)>& generator, const ImageMetric& metric,
                        double epsilon, int samples, uint64_t seed);

// Distances between reconstructed endpoints and the originals: (mean, max).
std::pair<double, double> endpoint_error(const std::vector<Image>& frames,
                                         const Image& original_a, const Image& original_b,
                                         const ImageMetric& metric);

// Frechet distance between Gaussian fits (mean + unbiased covariance) of
// two feature sets (rows = samples).
double frechet_distance(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b);

using FeatureExtractor = std::function<Eigen::VectorXd(const Image&)>;

// Reads every PNG in each directory, extracts features, fits Gaussians and
// returns the Frechet distance. nullopt when no extractor is supplied
// (metric unavailable, never reported as zero).
std::optional<double> fid_hook(const std::filesystem::path& real_dir,
                               const std::filesystem::path& generated_dir,
                               const FeatureExtractor& extractor);

// 8x8 average-pooled pixels; the desk-scale feature stand-in for fid_hook.
Eigen::VectorXd pooled_pixel_features(const Image& img);

}  // namespace morphkit
