#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "morphkit/errors.hpp"
#include "morphkit/guidance.hpp"
#include "morphkit/ode.hpp"
#include "morphkit/rng.hpp"
#include "test_support.hpp"

using namespace morphkit;

namespace {

// Linear-in-t cumulative schedule from 1 down to 0.03; subsampling hits the
// same beta values at shared grid points.
NoiseSchedule linear_beta_schedule(int steps) {
    std::vector<double> betas(steps + 1);
    for (int t = 0; t <= steps; ++t) {
        betas[t] = 1.0 - 0.97 * static_cast<double>(t) / steps;
    }
    return NoiseSchedule(std::move(betas));
}

LatentState make_state(Eigen::VectorXd tensor, int t) {
    LatentState s;
    s.shape = {1, 1, static_cast<int>(tensor.size())};
    s.tensor = std::move(tensor);
    s.t = t;
    return s;
}

}  // namespace

TEST_CASE("reverse step with zero prediction rescales") {
    const NoiseSchedule sched = make_scaled_linear_schedule(1000).subsample(16);
    Rng rng(11);
    const LatentState x_t = make_state(rng.gaussian_vector(8), 5);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(8);
    const LatentState out = ddim_reverse_step(x_t, zero, sched);
    const double factor = std::sqrt(sched.beta(4) / sched.beta(5));
    CHECK(out.t == 4);
    CHECK((out.tensor - factor * x_t.tensor).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("reverse step with perfect prediction recovers the forward point") {
    const NoiseSchedule sched = make_scaled_linear_schedule(1000).subsample(16);
    Rng rng(12);
    const Eigen::VectorXd x0 = rng.gaussian_vector(16);
    const Eigen::VectorXd eps = rng.gaussian_vector(16);
    const int t = 9;
    const double b = sched.beta(t);
    const LatentState x_t = make_state(std::sqrt(b) * x0 + std::sqrt(1.0 - b) * eps, t);
    const LatentState out = ddim_reverse_step(x_t, eps, sched);
    const double b_prev = sched.beta(t - 1);
    const Eigen::VectorXd expected = std::sqrt(b_prev) * x0 + std::sqrt(1.0 - b_prev) * eps;
    CHECK(test::rel_l2(out.tensor, expected) < 1e-13);
}

TEST_CASE("16-step trajectory matches fine integration of the same ODE") {
    // 1-D model with a known linear predictor eps(x) = a * x / sqrt(beta).
    // The 1024-step run is the oracle for the continuous probability flow.
    const NoiseSchedule fine = linear_beta_schedule(1024);
    const NoiseSchedule coarse = fine.subsample(16);
    const double a = 0.01;

    auto run = [&](const NoiseSchedule& sched) {
        PredictFn predict = [&](const LatentState& s) {
            return Eigen::VectorXd::Constant(1, a * s.tensor[0] / std::sqrt(sched.beta(s.t))).eval();
        };
        LatentState x_T = make_state(Eigen::VectorXd::Constant(1, 1.7), sched.steps());
        const std::vector<double> no_sigma(sched.steps(), 0.0);
        return denoise_trajectory(x_T, predict, sched, no_sigma, 0).tensor[0];
    };

    const double coarse_x0 = run(coarse);
    const double fine_x0 = run(fine);
    CHECK(std::abs(coarse_x0 - fine_x0) / std::abs(fine_x0) < 1e-3);
}

TEST_CASE("inversion step with zero prediction rescales") {
    const NoiseSchedule sched = make_scaled_linear_schedule(1000).subsample(16);
    Rng rng(13);
    const LatentState x_t = make_state(rng.gaussian_vector(8), 3);
    const LatentState out = ode_inversion_step(x_t, Eigen::VectorXd::Zero(8), sched);
    const double factor = std::sqrt(sched.beta(4) / sched.beta(3));
    CHECK(out.t == 4);
    CHECK((out.tensor - factor * x_t.tensor).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("inversion and reverse steps are mutual inverses for fixed eps") {
    const NoiseSchedule sched = make_scaled_linear_schedule(1000).subsample(16);
    Rng rng(14);
    for (int t = 0; t < sched.steps(); ++t) {
        const LatentState x = make_state(rng.gaussian_vector(8), t);
        const Eigen::VectorXd eps = rng.gaussian_vector(8);
        const LatentState up = ode_inversion_step(x, eps, sched);
        const LatentState back = ddim_reverse_step(up, eps, sched);
        CHECK(test::rel_l2(back.tensor, x.tensor) < 1e-12);
    }
    for (int t = 1; t <= sched.steps(); ++t) {
        const LatentState x = make_state(rng.gaussian_vector(8), t);
        const Eigen::VectorXd eps = rng.gaussian_vector(8);
        const LatentState down = ddim_reverse_step(x, eps, sched);
        const LatentState back = ode_inversion_step(down, eps, sched);
        CHECK(test::rel_l2(back.tensor, x.tensor) < 1e-12);
    }
}

TEST_CASE("zero predictor trajectories telescope and obey the rescale law") {
    const NoiseSchedule sched = make_scaled_linear_schedule(1000).subsample(16);
    Rng rng(15);
    PredictFn zero = [](const LatentState& s) { return Eigen::VectorXd::Zero(s.tensor.size()).eval(); };

    LatentState x_T = make_state(rng.gaussian_vector(8), sched.steps());
    const std::vector<double> no_sigma(sched.steps(), 0.0);
    const LatentState x_0 = denoise_trajectory(x_T, zero, sched, no_sigma, 0);
    const double factor = std::sqrt(sched.beta(0) / sched.beta(sched.steps()));
    CHECK(test::rel_l2(x_0.tensor, (factor * x_T.tensor).eval()) < 1e-12);

    // ||x_t|| / sqrt(beta_t) constant along the trajectory
    LatentState state = make_state(rng.gaussian_vector(8), 0);
    const double ratio0 = state.tensor.norm() / std::sqrt(sched.beta(0));
    for (int k = 0; k < sched.steps(); ++k) {
        state = ode_inversion_step(state, Eigen::VectorXd::Zero(8), sched);
        const double ratio = state.tensor.norm() / std::sqrt(sched.beta(state.t));
        CHECK(std::abs(ratio - ratio0) / ratio0 < 1e-12);
    }
    CHECK(test::rel_l2(denoise_trajectory(x_T, zero, sched, no_sigma, 0).tensor, x_0.tensor) == 0.0);
}

TEST_CASE("trajectories are deterministic and sigma boosting changes the result") {
    auto backend = test::trained_backend();
    const NoiseSchedule grid = backend->train_schedule().subsample(16);
    const EmbeddingVector e = backend->encode_text(toy_class_prompt(0));
    PredictFn predict = [&](const LatentState& s) {
        return backend->predict_noise(s.tensor, grid.timestep(s.t), &e);
    };

    Rng rng(16);
    const LatentState x_T = make_state(rng.gaussian_vector(backend->latent_size()), grid.steps());
    const std::vector<double> no_sigma(grid.steps(), 0.0);
    const std::vector<double> boost = sigma_boost_plan(16, 6).sigmas;

    const LatentState a = denoise_trajectory(x_T, predict, grid, boost, 99);
    const LatentState b = denoise_trajectory(x_T, predict, grid, boost, 99);
    CHECK(a.tensor == b.tensor);  // bitwise

    const LatentState det = denoise_trajectory(x_T, predict, grid, no_sigma, 99);
    CHECK(a.tensor.allFinite());
    CHECK(det.tensor.allFinite());
    CHECK((a.tensor - det.tensor).norm() > 0.0);
}

TEST_CASE("trained-backend roundtrip reconstructs inputs") {
    auto backend = test::trained_backend();
    const NoiseSchedule grid = backend->train_schedule().subsample(16);
    const auto dataset = make_toy_dataset(21, 2);

    for (const auto& sample : dataset) {
        const EmbeddingVector e = backend->encode_text(toy_class_prompt(sample.label));
        PredictFn predict = [&](const LatentState& s) {
            return backend->predict_noise(s.tensor, grid.timestep(s.t), &e);
        };
        const LatentState z0 = backend->encode_image(sample.img);
        const LatentState z_T = invert_trajectory(z0, predict, grid);
        const std::vector<double> no_sigma(grid.steps(), 0.0);
        const LatentState z_back = denoise_trajectory(z_T, predict, grid, no_sigma, 0);
        CHECK(test::rel_l2(z_back.tensor, z0.tensor) <= 0.05);
    }
}

TEST_CASE("inversion is injective on the toy corpus") {
    auto backend = test::trained_backend();
    const NoiseSchedule grid = backend->train_schedule().subsample(16);
    const auto dataset = make_toy_dataset(22, 6);

    std::vector<Eigen::VectorXd> latents;
    for (const auto& sample : dataset) {
        const EmbeddingVector e = backend->encode_text(toy_class_prompt(sample.label));
        PredictFn predict = [&](const LatentState& s) {
            return backend->predict_noise(s.tensor, grid.timestep(s.t), &e);
        };
        latents.push_back(invert_trajectory(backend->encode_image(sample.img), predict, grid).tensor);
    }
    for (size_t i = 0; i < latents.size(); ++i)
        for (size_t j = i + 1; j < latents.size(); ++j) {
            CHECK((latents[i] - latents[j]).norm() > 1e-6);
        }
}

TEST_CASE("halving the step size shrinks the discretization error") {
    auto backend = test::trained_backend();
    const EmbeddingVector e = backend->encode_text(toy_class_prompt(0));

    auto run = [&](int steps, const LatentState& x_T_template) {
        const NoiseSchedule grid = backend->train_schedule().subsample(steps);
        PredictFn predict = [&](const LatentState& s) {
            return backend->predict_noise(s.tensor, grid.timestep(s.t), &e);
        };
        LatentState x_T = x_T_template;
        x_T.t = grid.steps();
        const std::vector<double> no_sigma(grid.steps(), 0.0);
        return denoise_trajectory(x_T, predict, grid, no_sigma, 0).tensor;
    };

    Rng rng(23);
    const LatentState x_T = make_state(rng.gaussian_vector(backend->latent_size()), 0);
    const Eigen::VectorXd x16 = run(16, x_T);
    const Eigen::VectorXd x32 = run(32, x_T);
    const Eigen::VectorXd x64 = run(64, x_T);
    const double d_coarse = (x16 - x32).norm();
    const double d_fine = (x32 - x64).norm();
    CHECK(d_coarse >= 1.5 * d_fine);
}

TEST_CASE("step preconditions and schedule violations are rejected") {
    const NoiseSchedule sched = make_scaled_linear_schedule(1000).subsample(16);
    Rng rng(17);
    const LatentState x1 = make_state(rng.gaussian_vector(4), 1);
    const Eigen::VectorXd eps = rng.gaussian_vector(4);

    // sigma too large for the radical
    const double sigma_bad = std::sqrt(1.0 - sched.beta(0)) + 0.1;
    const Eigen::VectorXd noise = rng.gaussian_vector(4);
    CHECK_THROWS_AS(ddim_reverse_step(x1, eps, sched, sigma_bad, &noise), validation_error);

    // noise required when sigma > 0
    CHECK_THROWS_AS(ddim_reverse_step(x1, eps, sched, 0.1, nullptr), validation_error);

    // boundary timesteps
    const LatentState x0 = make_state(rng.gaussian_vector(4), 0);
    CHECK_THROWS_AS(ddim_reverse_step(x0, eps, sched), validation_error);
    const LatentState xT = make_state(rng.gaussian_vector(4), sched.steps());
    CHECK_THROWS_AS(ode_inversion_step(xT, eps, sched), validation_error);

    // non-finite input
    LatentState bad = make_state(rng.gaussian_vector(4), 2);
    bad.tensor[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(ddim_reverse_step(bad, eps, sched), validation_error);

    // predictor returning non-finite aborts with step index
    PredictFn nan_predict = [](const LatentState& s) {
        return Eigen::VectorXd::Constant(s.tensor.size(), std::numeric_limits<double>::quiet_NaN()).eval();
    };
    const LatentState start = make_state(rng.gaussian_vector(4), sched.steps());
    const std::vector<double> no_sigma(sched.steps(), 0.0);
    CHECK_THROWS_WITH_AS(denoise_trajectory(start, nan_predict, sched, no_sigma, 0),
                         doctest::Contains("step 0"), numeric_error);
}

TEST_CASE("schedule construction enforces the invariants") {
    CHECK_THROWS_AS(NoiseSchedule({1.0, 0.5, 0.5, 0.01}), validation_error);   // not strictly decreasing
    CHECK_THROWS_AS(NoiseSchedule({0.9, 0.5, 0.01}), validation_error);        // betas[0] too small
    CHECK_THROWS_AS(NoiseSchedule({1.0, 0.5, 0.2}), validation_error);         // betas[T] too large
    CHECK_THROWS_AS(NoiseSchedule({1.0, -0.5, 0.01}), validation_error);       // out of (0, 1]

    const NoiseSchedule sched = make_scaled_linear_schedule(1000);
    CHECK(sched.steps() == 1000);
    CHECK(sched.beta(0) == 1.0);
    CHECK(sched.beta(1000) > 0.0);
    CHECK(sched.beta(1000) < 0.05);

    const NoiseSchedule sub = sched.subsample(16);
    CHECK(sub.steps() == 16);
    CHECK(sub.beta(0) == sched.beta(0));
    CHECK(sub.beta(16) == sched.beta(1000));
    CHECK(sub.timestep(8) == 500);

    // DDPM sigma always sits inside the reverse-step radical
    for (int t = 1; t <= sub.steps(); ++t) {
        CHECK(sub.max_sigma(t) * sub.max_sigma(t) <= 1.0 - sub.beta(t - 1) + 1e-15);
    }
}
