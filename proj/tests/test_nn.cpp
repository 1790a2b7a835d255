#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "noisylab/losses.hpp"
#include "noisylab/nn.hpp"
#include "noisylab/rng.hpp"
#include "oracles.hpp"

using namespace noisylab;

namespace {

// f(theta) = mean cross-entropy of the model on (batch, labels); the scalar
// objective used for finite-difference checks.
double ce_objective(const std::vector<int>& dims, const std::vector<double>& params,
                    const Matrix& batch, const std::vector<int>& labels) {
  MlpModel model(dims, 0);
  std::copy(params.begin(), params.end(), model.flat().begin());
  const ForwardRecord rec = forward(model, batch);
  return cross_entropy_loss(rec.probs, labels).value;
}

}  // namespace

TEST_CASE("zero parameters give uniform probabilities") {
  MlpModel model({4, 6, 5}, 3);
  std::fill(model.flat().begin(), model.flat().end(), 0.0);
  rng::Engine gen(1);
  const Matrix batch = oracles::random_matrix(3, 4, gen);
  const ForwardRecord rec = forward(model, batch);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 5; ++j) CHECK(rec.probs(i, j) == doctest::Approx(0.2).epsilon(1e-12));
  }
}

TEST_CASE("softmax survives huge logits") {
  // Rig the model so one logit lands at 1000 and the other at 0.
  MlpModel model({1, 1, 2}, 0);
  std::fill(model.flat().begin(), model.flat().end(), 0.0);
  model.w1()(0, 0) = 1.0;
  model.w2()(0, 0) = 1000.0;
  Matrix batch(1, 1);
  batch(0, 0) = 1.0;
  const ForwardRecord rec = forward(model, batch);
  CHECK(std::isfinite(rec.probs(0, 0)));
  CHECK(std::isfinite(rec.probs(0, 1)));
  CHECK(rec.probs(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rec.probs(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("probability rows sum to 1 within 1e-6") {
  MlpModel model({8, 16, 10}, 11);
  rng::Engine gen(2);
  const Matrix batch = oracles::random_matrix(32, 8, gen, 3.0);
  const ForwardRecord rec = forward(model, batch);
  for (int i = 0; i < rec.batch(); ++i) {
    double sum = 0.0;
    for (int j = 0; j < 10; ++j) {
      CHECK(rec.probs(i, j) >= 0.0);
      sum += rec.probs(i, j);
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("forward is pure") {
  MlpModel model({3, 4, 2}, 5);
  const std::vector<double> before(model.flat().begin(), model.flat().end());
  rng::Engine gen(3);
  const Matrix batch = oracles::random_matrix(6, 3, gen);
  (void)forward(model, batch);
  const std::vector<double> after(model.flat().begin(), model.flat().end());
  CHECK(before == after);
}

TEST_CASE("forward rejects shape mismatch") {
  MlpModel model({3, 4, 2}, 5);
  CHECK_THROWS_AS(forward(model, Matrix(2, 5)), std::invalid_argument);
}

TEST_CASE("flat and structured parameter views alias") {
  MlpModel model({2, 3, 2}, 9);
  model.w1()(1, 2) = 42.0;
  CHECK(model.flat()[1 * 3 + 2] == 42.0);
  model.flat()[model.param_count() - 1] = -7.0;
  CHECK(model.b2()[1] == -7.0);
}

TEST_CASE("zero logit-gradient backpropagates to a zero parameter gradient") {
  MlpModel model({3, 5, 4}, 7);
  rng::Engine gen(4);
  const Matrix batch = oracles::random_matrix(6, 3, gen);
  const ForwardRecord rec = forward(model, batch);
  const auto grad = backward(model, rec, Matrix(6, 4, 0.0));
  for (double g : grad) CHECK(g == 0.0);
}

TEST_CASE("backward matches central finite differences on a 3-class toy model") {
  const std::vector<int> dims = {4, 5, 3};
  MlpModel model(dims, 13);
  rng::Engine gen(6);
  const Matrix batch = oracles::random_matrix(7, 4, gen);
  std::vector<int> labels(7);
  for (int& l : labels) l = static_cast<int>(rng::bounded(gen, 3));

  const ForwardRecord rec = forward(model, batch);
  const CrossEntropyLoss ce = cross_entropy_loss(rec.probs, labels);
  const auto grad = backward(model, rec, ce.dlogits);

  const std::vector<double> point(model.flat().begin(), model.flat().end());
  const double err = oracles::max_fd_error(
      [&](const std::vector<double>& p) { return ce_objective(dims, p, batch, labels); }, point,
      grad);
  CHECK(err < 1e-4);
}

TEST_CASE("backward is bitwise deterministic") {
  MlpModel model({4, 8, 3}, 17);
  rng::Engine gen(8);
  const Matrix batch = oracles::random_matrix(9, 4, gen);
  const ForwardRecord rec = forward(model, batch);
  const Matrix dlogits = oracles::random_matrix(9, 3, gen);
  const auto g1 = backward(model, rec, dlogits);
  const auto g2 = backward(model, rec, dlogits);
  CHECK(g1 == g2);
}

TEST_CASE("adam leaves parameters unchanged on a zero gradient but decays moments") {
  MlpModel model({2, 2, 2}, 21);
  AdamState st(model.param_count(), 1e-3);
  st.m.assign(st.m.size(), 0.5);
  st.v.assign(st.v.size(), 0.25);
  const std::vector<double> before(model.flat().begin(), model.flat().end());
  const std::vector<double> zeros(model.param_count(), 0.0);
  adam_step(model, st, zeros);
  CHECK(st.step == 1);
  for (size_t i = 0; i < before.size(); ++i) {
    // m decays to beta1*m, v to beta2*v; the update direction stays zero
    // only approximately, so allow the tiny bias-corrected drift.
    CHECK(st.m[i] == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(st.v[i] == doctest::Approx(0.24975).epsilon(1e-12));
  }
}

TEST_CASE("adam first step on a unit gradient moves by about the learning rate") {
  MlpModel model({1, 1, 1}, 0);
  std::fill(model.flat().begin(), model.flat().end(), 1.0);
  AdamState st(model.param_count(), 1e-3);
  const std::vector<double> g(model.param_count(), 1.0);
  adam_step(model, st, g);
  // Step 1, g = 1: m_hat = 1, v_hat = 1, so the move is lr / (1 + eps).
  const double expected_move = 1e-3 / (1.0 + 1e-8);
  for (double p : model.flat()) CHECK(p == doctest::Approx(1.0 - expected_move).epsilon(1e-12));
}

TEST_CASE("adam refuses non-finite gradients and leaves state untouched") {
  MlpModel model({2, 3, 2}, 31);
  AdamState st(model.param_count(), 1e-3);
  std::vector<double> g(model.param_count(), 0.1);
  g[3] = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> before(model.flat().begin(), model.flat().end());
  CHECK_THROWS_AS(adam_step(model, st, g), std::runtime_error);
  CHECK(st.step == 0);
  const std::vector<double> after(model.flat().begin(), model.flat().end());
  CHECK(before == after);
}

TEST_CASE("param_distance basics and brute-force oracle") {
  MlpModel a({3, 4, 2}, 1);
  MlpModel b = a;
  CHECK(param_distance(a, b) == 0.0);

  b.flat()[5] += 3.0;
  CHECK(param_distance(a, b) == doctest::Approx(3.0).epsilon(1e-12));

  MlpModel c({3, 4, 2}, 99);
  double acc = 0.0;
  for (int i = 0; i < a.param_count(); ++i) {
    const double d = a.flat()[i] - c.flat()[i];
    acc += d * d;
  }
  CHECK(param_distance(a, c) == doctest::Approx(std::sqrt(acc)).epsilon(1e-12));

  MlpModel wrong({3, 5, 2}, 1);
  CHECK_THROWS_AS(param_distance(a, wrong), std::invalid_argument);
}

TEST_CASE("param_distance is symmetric and satisfies the triangle inequality") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    MlpModel a({4, 3, 2}, seed * 3 + 1);
    MlpModel b({4, 3, 2}, seed * 3 + 2);
    MlpModel c({4, 3, 2}, seed * 3 + 3);
    CHECK(param_distance(a, b) == param_distance(b, a));
    CHECK(param_distance(a, c) <= param_distance(a, b) + param_distance(b, c) + 1e-12);
  }
}

TEST_CASE("checkpoints round-trip bitwise") {
  const std::string path =
      (std::filesystem::temp_directory_path() / ("noisylab_ckpt_" + std::to_string(::getpid())))
          .string();
  MlpModel model({7, 5, 3}, 123);
  save_checkpoint(model, path);
  const MlpModel back = load_checkpoint(path);
  CHECK(back.layer_dims() == model.layer_dims());
  REQUIRE(back.param_count() == model.param_count());
  for (int i = 0; i < model.param_count(); ++i) CHECK(back.flat()[i] == model.flat()[i]);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects a corrupt header") {
  const std::string path =
      (std::filesystem::temp_directory_path() / ("noisylab_badckpt_" + std::to_string(::getpid())))
          .string();
  {
    std::ofstream out(path);
    out << "SOMETHING-ELSE v1 3,4,2 26\n";
  }
  CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("initialization stays within the fan-in bound and differs per seed") {
  MlpModel a({100, 50, 10}, 1);
  MlpModel b({100, 50, 10}, 2);
  CHECK(param_distance(a, b) > 0.0);
  const double bound1 = 1.0 / std::sqrt(100.0);
  auto w1 = a.w1();
  for (int i = 0; i < 100; ++i) {
    for (int j = 0; j < 50; ++j) {
      CHECK(std::abs(w1(i, j)) <= bound1);
    }
  }
}
