#include "morphkit/backend.hpp"

#include "morphkit/errors.hpp"

namespace morphkit {

ScopedAdapters::ScopedAdapters(DenoiserBackend& backend, const AdapterMap& deltas, AdapterBranch branch)
    : backend_(backend), branch_(branch) {
    backend_.attach(&deltas, branch);
}

ScopedAdapters::~ScopedAdapters() {
    backend_.detach(branch_);
}

ScopedAdapters attach_adapters(DenoiserBackend& backend, const AdapterMap& deltas, AdapterBranch branch) {
    const auto targets = backend.adapter_targets();
    for (const auto& [id, delta] : deltas) {
        bool known = false;
        for (const auto& info : targets) {
            if (info.id != id) continue;
            known = true;
            if (delta.up.rows() != info.rows || delta.down.cols() != info.cols ||
                delta.up.cols() != delta.rank || delta.down.rows() != delta.rank) {
                throw validation_error("attach_adapters: delta shape mismatch for target '" + id + "'");
            }
        }
        if (!known) {
            throw validation_error("attach_adapters: unknown target id '" + id + "'");
        }
    }
    return ScopedAdapters(backend, deltas, branch);
}

}  // namespace morphkit
