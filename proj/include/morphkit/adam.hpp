#pragma once

#include <cmath>

#include <Eigen/Core>

namespace morphkit {

// First-order adaptive update for one tensor. weight_decay is decoupled
// (applied directly to the parameter, not through the moments).
class AdamState {
public:
    AdamState(double lr, double weight_decay = 0.0, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void set_lr(double lr) { lr_ = lr; }

    template <typename Derived, typename GradDerived>
    void update(Eigen::MatrixBase<Derived>& param, const Eigen::MatrixBase<GradDerived>& grad) {
        if (m_.size() == 0) {
            m_ = Eigen::ArrayXXd::Zero(param.rows(), param.cols());
            v_ = Eigen::ArrayXXd::Zero(param.rows(), param.cols());
        }
        ++step_;
        const Eigen::ArrayXXd g = grad.array();
        m_ = beta1_ * m_ + (1.0 - beta1_) * g;
        v_ = beta2_ * v_ + (1.0 - beta2_) * g.square();
        const double bc1 = 1.0 - std::pow(beta1_, step_);
        const double bc2 = 1.0 - std::pow(beta2_, step_);
        if (wd_ > 0.0) {
            param.array() -= lr_ * wd_ * param.array();
        }
        param.array() -= lr_ * (m_ / bc1) / ((v_ / bc2).sqrt() + eps_);
    }

private:
    double lr_, wd_, beta1_, beta2_, eps_;
    int step_ = 0;
    Eigen::ArrayXXd m_, v_;
};

}  // namespace morphkit
