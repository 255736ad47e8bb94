#pragma once

#include <cstdio>
#include <filesystem>
#include <memory>

#include "morphkit/checkpoint.hpp"
#include "morphkit/pipeline.hpp"
#include "morphkit/toy_backend.hpp"

namespace morphkit::test {

inline constexpr uint64_t kTestSeed = 7;
inline constexpr int kTestEpochs = 60;

// One trained toy model per process, disk-cached across binaries.
inline std::shared_ptr<ToyBackend> trained_backend() {
    static std::shared_ptr<ToyBackend> cached = [] {
        const auto root = cache_root();
        std::filesystem::create_directories(root);
        char name[64];
        std::snprintf(name, sizeof name, "toy-ckpt-seed%llu-e%d.json",
                      static_cast<unsigned long long>(kTestSeed), kTestEpochs);
        const auto path = root / name;
        if (std::filesystem::exists(path)) {
            return std::static_pointer_cast<ToyBackend>(external_checkpoint_adapter(path));
        }
        auto backend = train_toy_denoiser(kTestSeed, kTestEpochs);
        save_checkpoint(*backend, path);
        return backend;
    }();
    return cached;
}

inline double rel_l2(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return (a - b).norm() / b.norm();
}

}  // namespace morphkit::test
