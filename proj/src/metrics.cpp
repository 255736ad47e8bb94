#include "morphkit/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "morphkit/errors.hpp"
#include "morphkit/image_io.hpp"
#include "morphkit/rng.hpp"

namespace morphkit {

double total_lpips(const std::vector<Image>& frames, const ImageMetric& metric) {
    if (frames.size() < 2) {
        throw validation_error("total_lpips: need at least 2 frames");
    }
    double acc = 0.0;
    for (size_t i = 0; i + 1 < frames.size(); ++i) {
        acc += metric(frames[i], frames[i + 1]);
    }
    return acc;
}

double max_lpips(const std::vector<Image>& frames, const ImageMetric& metric) {
    if (frames.size() < 3) {
        throw validation_error("max_lpips: need at least 3 frames (interior frames required)");
    }
    double worst = 0.0;
    for (size_t i = 1; i + 1 < frames.size(); ++i) {
        const double d = std::min(metric(frames[i], frames.front()), metric(frames[i], frames.back()));
        worst = std::max(worst, d);
    }
    return worst;
}

PplEstimate ppl_uniform(const std::function<Image(double)>& generator, const ImageMetric& metric,
                        double epsilon, int samples, uint64_t seed) {
    if (!(epsilon > 0.0 && epsilon < 1.0)) {
        throw validation_error("ppl_uniform: epsilon must be in (0, 1)");
    }
    if (samples < 1) {
        throw validation_error("ppl_uniform: samples must be >= 1");
    }
    Rng rng(seed ^ 0x70706cull);
    double acc = 0.0;
    double acc2 = 0.0;
    for (int i = 0; i < samples; ++i) {
        double a = rng.uniform();
        while (a + epsilon > 1.0) a = rng.uniform();
        const double d = metric(generator(a), generator(a + epsilon)) / (epsilon * epsilon);
        acc += d;
        acc2 += d * d;
    }
    PplEstimate est;
    est.samples = samples;
    est.mean = acc / samples;
    const double var = std::max(0.0, acc2 / samples - est.mean * est.mean);
    est.stderr_ = samples > 1 ? std::sqrt(var / (samples - 1)) : 0.0;
    return est;
}

std::pair<double, double> endpoint_error(const std::vector<Image>& frames,
                                         const Image& original_a, const Image& original_b,
                                         const ImageMetric& metric) {
    if (frames.size() < 2) {
        throw validation_error("endpoint_error: need at least 2 frames");
    }
    const double da = metric(frames.front(), original_a);
    const double db = metric(frames.back(), original_b);
    return {0.5 * (da + db), std::max(da, db)};
}

namespace {

// Gaussian fit with unbiased covariance.
void fit_gaussian(const Eigen::MatrixXd& features, Eigen::VectorXd* mean, Eigen::MatrixXd* cov) {
    const Eigen::Index n = features.rows();
    if (n < 2) {
        throw validation_error("frechet_distance: need at least 2 samples per set");
    }
    *mean = features.colwise().mean();
    const Eigen::MatrixXd centered = features.rowwise() - mean->transpose();
    *cov = centered.transpose() * centered / static_cast<double>(n - 1);
}

// PSD square root via eigendecomposition, clamping tiny negative modes.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const Eigen::MatrixXd& features_a, const Eigen::MatrixXd& features_b) {
    if (features_a.cols() != features_b.cols()) {
        throw validation_error("frechet_distance: feature dimension mismatch");
    }
    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd cov_a, cov_b;
    fit_gaussian(features_a, &mu_a, &cov_a);
    fit_gaussian(features_b, &mu_b, &cov_b);

    const Eigen::MatrixXd sqrt_a = psd_sqrt(cov_a);
    const Eigen::MatrixXd cross = psd_sqrt(sqrt_a * cov_b * sqrt_a);
    const double d2 = (mu_a - mu_b).squaredNorm() + (cov_a + cov_b - 2.0 * cross).trace();
    return std::max(0.0, d2);
}

Eigen::VectorXd pooled_pixel_features(const Image& img) {
    const Image gray = to_gray(img);
    const Image pooled = resize_center_crop(gray, 8, 8);
    return Eigen::Map<const Eigen::VectorXd>(pooled.px.data(), static_cast<Eigen::Index>(pooled.px.size()));
}

std::optional<double> fid_hook(const std::filesystem::path& real_dir,
                               const std::filesystem::path& generated_dir,
                               const FeatureExtractor& extractor) {
    if (!extractor) {
        return std::nullopt;
    }
    auto load_features = [&](const std::filesystem::path& dir) {
        std::vector<Eigen::VectorXd> rows;
        std::vector<std::filesystem::path> files;
        if (!std::filesystem::is_directory(dir)) {
            throw validation_error("fid_hook: '" + dir.string() + "' is not a directory");
        }
        for (const auto& entry : std::filesystem::directory_iterator(dir)) {
            if (entry.path().extension() == ".png") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) rows.push_back(extractor(read_png(f)));
        if (rows.empty()) {
            throw validation_error("fid_hook: no PNG images in '" + dir.string() + "'");
        }
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
        for (size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i];
        return m;
    };
    return frechet_distance(load_features(real_dir), load_features(generated_dir));
}

}  // namespace morphkit
