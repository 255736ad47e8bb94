#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace morphkit {

// Additive low-rank weight delta for one target matrix W (rows x cols):
//   delta_W = scale * up * down, up: rows x rank, down: rank x cols.
struct LowRankDelta {
    Eigen::MatrixXd down;  // rank x cols
    Eigen::MatrixXd up;    // rows x rank
    double scale = 1.0;
    int rank = 0;

    Eigen::MatrixXd effective() const { return scale * up * down; }
};

using AdapterMap = std::map<std::string, LowRankDelta>;

// Conditional and unconditional adapter groups over one shared target list.
struct AdapterSet {
    AdapterMap conditional;
    AdapterMap unconditional;
    std::vector<std::string> targets;
    int rank_cond = 0;
    int rank_uncond = 0;
};

enum class AdapterBranch { Conditional, Unconditional };

struct AdapterTargetInfo {
    std::string id;
    int rows = 0;
    int cols = 0;
};

}  // namespace morphkit
