#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "morphkit/adapters.hpp"
#include "morphkit/backend.hpp"
#include "morphkit/toy_backend.hpp"

namespace morphkit {

// base64 helpers shared by the JSON containers.
std::string base64_encode(const unsigned char* data, size_t len);
std::vector<unsigned char> base64_decode(const std::string& text);
std::string encode_doubles(const Eigen::MatrixXd& m);
Eigen::MatrixXd decode_doubles(const std::string& text, Eigen::Index rows, Eigen::Index cols);

// Writes a self-describing JSON checkpoint (format "mk-checkpoint-v1",
// kind "toy-attn-v1") with base64 weight blobs and a content checksum.
void save_checkpoint(const ToyBackend& backend, const std::filesystem::path& path);

// Loads a checkpoint into a fresh backend over the declared architecture.
// Missing files, unknown formats/kinds, unsupported dtype/device and
// checksum mismatches raise capability_error; there is no fallback.
std::shared_ptr<DenoiserBackend> external_checkpoint_adapter(const std::filesystem::path& path,
                                                             const std::string& dtype = "f64",
                                                             const std::string& device = "cpu");

// Adapter archive: one file keyed by target-matrix id with shape and rank
// metadata for both branches.
void save_adapters(const AdapterSet& adapters, const std::filesystem::path& path);
AdapterSet load_adapters(const std::filesystem::path& path);

}  // namespace morphkit
