#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "pcawfl/learner.hpp"
#include "pcawfl/mathkit.hpp"

using namespace pcawfl;

namespace {

learner::WorkerShard random_shard(int dim, int classes, int count,
                                  std::uint64_t seed) {
  mathkit::RngStream s(seed, 0x1EA2, 0);
  learner::WorkerShard shard;
  shard.samples.resize(dim, count);
  for (int m = 0; m < count; ++m) {
    for (int i = 0; i < dim; ++i)
      shard.samples(i, m) = mathkit::sample_real_gaussian(1.0, s);
    shard.labels.push_back(static_cast<int>(s.next_u64() % classes));
  }
  return shard;
}

}  // namespace

TEST_CASE("parameter counting") {
  REQUIRE(learner::param_count({4, {2}, 3}) == (4 + 1) * 2 + (2 + 1) * 3);
  REQUIRE(learner::param_count({784, {64}, 10}) == 785 * 64 + 65 * 10);
  REQUIRE(learner::param_count({16, {128}, 6}) == 17 * 128 + 129 * 6);
  REQUIRE(learner::param_count({5, {}, 2}) == 12);  // logistic regression shape
  REQUIRE_THROWS_AS(learner::param_count({0, {2}, 3}), std::invalid_argument);
  REQUIRE_THROWS_AS(learner::param_count({4, {0}, 3}), std::invalid_argument);
}

TEST_CASE("model initialization") {
  const learner::MlpSpec spec{4, {2}, 3};

  SECTION("deterministic given the stream") {
    mathkit::RngStream a(3, 0, 0), b(3, 0, 0);
    const auto w1 = learner::init_model(spec, a);
    const auto w2 = learner::init_model(spec, b);
    REQUIRE(w1 == w2);
    REQUIRE(a.draws() == 14);  // one per weight, none per bias
  }

  SECTION("biases are exactly zero, weights bounded") {
    mathkit::RngStream s(9, 0, 0);
    const auto w = learner::init_model(spec, s);
    REQUIRE(w(8) == 0.0);
    REQUIRE(w(9) == 0.0);
    for (int i = 16; i < 19; ++i) REQUIRE(w(i) == 0.0);
    const double bound1 = std::sqrt(6.0 / (4 + 2));
    for (int i = 0; i < 8; ++i) REQUIRE(std::abs(w(i)) <= bound1);
  }

  SECTION("large-layer weight mean near zero") {
    const learner::MlpSpec wide{784, {64}, 10};
    mathkit::RngStream s(10, 0, 0);
    const auto w = learner::init_model(wide, s);
    const int n = 784 * 64;
    const double mean = w.head(n).mean();
    const double bound = std::sqrt(6.0 / (784 + 64));
    const double se = bound / std::sqrt(3.0 * n);
    REQUIRE(std::abs(mean) <= 3.0 * se);
  }
}

TEST_CASE("softmax columns") {
  mathkit::RngStream s(21, 0, 0);
  Eigen::MatrixXd logits(5, 7);
  for (int j = 0; j < 7; ++j)
    for (int i = 0; i < 5; ++i)
      logits(i, j) = mathkit::sample_real_gaussian(9.0, s);
  const auto p = learner::softmax_columns(logits);
  for (int j = 0; j < 7; ++j) {
    REQUIRE(p.col(j).sum() == Catch::Approx(1.0).margin(1e-12));
    for (int i = 0; i < 5; ++i) REQUIRE(p(i, j) > 0.0);
  }
  // Stability under large shifts.
  logits.array() += 1000.0;
  const auto shifted = learner::softmax_columns(logits);
  REQUIRE((shifted - p).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("loss at zero weights is ln(classes)") {
  const learner::MlpSpec spec{6, {3}, 4};
  const learner::ModelVector w = learner::ModelVector::Zero(learner::param_count(spec));
  const auto shard = random_shard(6, 4, 2, 77);
  REQUIRE(learner::local_loss(w, shard, spec) == std::log(4.0));
}

TEST_CASE("loss matches a hand-evaluated one-hidden-unit network") {
  const learner::MlpSpec spec{1, {1}, 2};
  learner::ModelVector w(learner::param_count(spec));
  const double a = 0.51, c = -0.2, d = 1.3, e = -0.4, f = 0.05, g = 0.33;
  w << a, c, d, e, f, g;
  learner::WorkerShard shard;
  shard.samples.resize(1, 1);
  shard.samples(0, 0) = 0.7;
  shard.labels = {0};

  const double h = std::tanh(a * 0.7 + c);
  const double z0 = d * h + f, z1 = e * h + g;
  const double want = std::log(std::exp(z0) + std::exp(z1)) - z0;
  REQUIRE(learner::local_loss(w, shard, spec) == Catch::Approx(want).epsilon(1e-14));
  REQUIRE(learner::local_loss(w, shard, spec) >= 0.0);
}

TEST_CASE("loss input validation") {
  const learner::MlpSpec spec{4, {2}, 3};
  mathkit::RngStream s(1, 0, 0);
  const auto w = learner::init_model(spec, s);
  auto shard = random_shard(5, 3, 4, 8);
  REQUIRE_THROWS_AS(learner::local_loss(w, shard, spec), std::invalid_argument);
  shard = random_shard(4, 3, 4, 8);
  shard.labels[2] = 3;
  REQUIRE_THROWS_AS(learner::local_loss(w, shard, spec), std::invalid_argument);
  learner::WorkerShard empty;
  empty.samples.resize(4, 0);
  REQUIRE_THROWS_AS(learner::local_loss(w, empty, spec), std::invalid_argument);
}

TEST_CASE("gradient matches central finite differences") {
  const learner::MlpSpec spec{4, {2}, 3};
  mathkit::RngStream s(12, 0, 0);
  auto w = learner::init_model(spec, s);
  const auto shard = random_shard(4, 3, 5, 91);
  const auto grad = learner::local_gradient(w, shard, spec);

  const double step = 1e-5;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    learner::ModelVector plus = w, minus = w;
    plus(i) += step;
    minus(i) -= step;
    const double fd = (learner::local_loss(plus, shard, spec) -
                       learner::local_loss(minus, shard, spec)) /
                      (2.0 * step);
    const double rel = std::abs(fd - grad(i)) / std::max(std::abs(grad(i)), 1e-8);
    INFO("coordinate " << i << " fd " << fd << " grad " << grad(i));
    REQUIRE(rel < 1e-5);
  }
}

TEST_CASE("gradient structural properties") {
  const learner::MlpSpec spec{4, {2}, 3};

  SECTION("duplicating every sample leaves the mean gradient unchanged") {
    mathkit::RngStream s(13, 0, 0);
    const auto w = learner::init_model(spec, s);
    const auto shard = random_shard(4, 3, 5, 17);
    learner::WorkerShard doubled;
    doubled.samples.resize(4, 10);
    doubled.samples << shard.samples, shard.samples;
    doubled.labels = shard.labels;
    doubled.labels.insert(doubled.labels.end(), shard.labels.begin(),
                          shard.labels.end());
    const auto g1 = learner::local_gradient(w, shard, spec);
    const auto g2 = learner::local_gradient(w, doubled, spec);
    REQUIRE(g1.isApprox(g2, 1e-14));
  }

  SECTION("zero inputs and zero weights silence the weight gradients") {
    const learner::ModelVector w =
        learner::ModelVector::Zero(learner::param_count(spec));
    learner::WorkerShard shard;
    shard.samples = Eigen::MatrixXd::Zero(4, 3);
    shard.labels = {0, 1, 2};
    const auto grad = learner::local_gradient(w, shard, spec);
    // Layout: W1 [0,8), b1 [8,10), W2 [10,16), b2 [16,19).
    REQUIRE(grad.head(10).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(grad.segment(10, 6).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(grad.tail(3).cwiseAbs().maxCoeff() > 0.0);
  }

  SECTION("pooled gradient is the mean of even-shard gradients") {
    mathkit::RngStream s(14, 0, 0);
    const auto w = learner::init_model(spec, s);
    const auto pooled = random_shard(4, 3, 12, 23);
    learner::GradientVector mean =
        learner::GradientVector::Zero(learner::param_count(spec));
    for (int n = 0; n < 3; ++n) {
      learner::WorkerShard part;
      part.samples = pooled.samples.middleCols(4 * n, 4);
      part.labels.assign(pooled.labels.begin() + 4 * n,
                         pooled.labels.begin() + 4 * (n + 1));
      mean += learner::local_gradient(w, part, spec);
    }
    mean /= 3.0;
    const auto whole = learner::local_gradient(w, pooled, spec);
    REQUIRE(whole.isApprox(mean, 1e-12));
  }
}

TEST_CASE("test accuracy") {
  const learner::MlpSpec spec{6, {4}, 10};
  mathkit::RngStream s(15, 0, 0);
  const auto w = learner::init_model(spec, s);

  SECTION("self-labeled data scores 1.0, a flipped label scores 0.0") {
    auto shard = random_shard(6, 10, 40, 31);
    const auto fwd_labels = [&](const Eigen::MatrixXd& x) {
      learner::WorkerShard probe;
      probe.samples = x;
      probe.labels.assign(static_cast<std::size_t>(x.cols()), 0);
      return probe;
    };
    auto probe = fwd_labels(shard.samples);
    // Label each sample by the model's own argmax.
    for (Eigen::Index m = 0; m < probe.samples.cols(); ++m) {
      int best = 0;
      learner::WorkerShard one;
      one.samples = probe.samples.col(m);
      one.labels = {0};
      double top = -1.0;
      for (int c = 0; c < 10; ++c) {
        one.labels[0] = c;
        const double conf = std::exp(-learner::local_loss(w, one, spec));
        if (conf > top) {
          top = conf;
          best = c;
        }
      }
      probe.labels[static_cast<std::size_t>(m)] = best;
    }
    REQUIRE(learner::test_accuracy(w, probe, spec) == 1.0);

    learner::WorkerShard wrong;
    wrong.samples = probe.samples.col(0);
    wrong.labels = {(probe.labels[0] + 1) % 10};
    REQUIRE(learner::test_accuracy(w, wrong, spec) == 0.0);
  }

  SECTION("random model on random balanced labels scores near chance") {
    const auto shard = random_shard(6, 10, 20000, 37);
    const double acc = learner::test_accuracy(w, shard, spec);
    const double se = std::sqrt(0.1 * 0.9 / 20000.0);
    REQUIRE(acc == Catch::Approx(0.1).margin(3.0 * se));
  }

  SECTION("ties break toward the lowest class index") {
    const learner::ModelVector zero =
        learner::ModelVector::Zero(learner::param_count(spec));
    learner::WorkerShard shard;
    shard.samples = Eigen::MatrixXd::Ones(6, 2);
    shard.labels = {0, 3};  // all logits equal, argmax must return 0
    REQUIRE(learner::test_accuracy(zero, shard, spec) == 0.5);
  }
}

TEST_CASE("gradient diversity") {
  Eigen::VectorXd a(1), b(1);
  a << 1.0;
  b << -1.0;
  REQUIRE(learner::estimate_G({a, a, a}) == 0.0);
  REQUIRE(learner::estimate_G({a, b}) == 1.0);

  // Independent route: G = mean ||y||^2 - ||mean y||^2.
  std::vector<learner::GradientVector> set;
  mathkit::RngStream s(16, 0, 0);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(6);
  double mean_norm_sq = 0.0;
  for (int n = 0; n < 5; ++n) {
    Eigen::VectorXd g(6);
    for (int i = 0; i < 6; ++i) g(i) = mathkit::sample_real_gaussian(2.0, s);
    set.push_back(g);
    mean += g;
    mean_norm_sq += g.squaredNorm();
  }
  mean /= 5.0;
  const double oracle = mean_norm_sq / 5.0 - mean.squaredNorm();
  REQUIRE(learner::estimate_G(set) == Catch::Approx(oracle).epsilon(1e-12));
  REQUIRE_THROWS_AS(learner::estimate_G({}), std::invalid_argument);
}

TEST_CASE("curvature estimate") {
  SECTION("exact on a quadratic surrogate") {
    const double lambda = 2.7;
    const auto grad = [lambda](const learner::ModelVector& w) {
      return learner::GradientVector(lambda * w);
    };
    learner::ModelVector w(8);
    w.setOnes();
    mathkit::RngStream s(40, 0, 0);
    REQUIRE(learner::estimate_lipschitz(grad, w, 6, s) ==
            Catch::Approx(lambda).margin(1e-6));
  }

  SECTION("non-decreasing in trials") {
    const learner::MlpSpec spec{4, {2}, 3};
    mathkit::RngStream init(41, 0, 0);
    const auto w = learner::init_model(spec, init);
    const auto shard = random_shard(4, 3, 6, 47);
    mathkit::RngStream s4(42, 0, 0), s16(42, 0, 0);
    const double few = learner::estimate_L(w, shard, spec, 4, s4);
    const double many = learner::estimate_L(w, shard, spec, 16, s16);
    REQUIRE(many >= few);
    mathkit::RngStream bad(42, 0, 0);
    REQUIRE_THROWS_AS(learner::estimate_L(w, shard, spec, 0, bad),
                      std::invalid_argument);
  }

  SECTION("within a factor of the finite-difference Hessian norm") {
    const learner::MlpSpec spec{4, {2}, 3};
    mathkit::RngStream init(43, 0, 0);
    const auto w = learner::init_model(spec, init);
    const auto shard = random_shard(4, 3, 5, 53);
    const Eigen::Index d = w.size();

    Eigen::MatrixXd hessian(d, d);
    const double step = 1e-5;
    for (Eigen::Index j = 0; j < d; ++j) {
      learner::ModelVector plus = w, minus = w;
      plus(j) += step;
      minus(j) -= step;
      hessian.col(j) = (learner::local_gradient(plus, shard, spec) -
                        learner::local_gradient(minus, shard, spec)) /
                       (2.0 * step);
    }
    hessian = 0.5 * (hessian + hessian.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian);
    const double spectral = eig.eigenvalues().cwiseAbs().maxCoeff();

    mathkit::RngStream s(44, 0, 0);
    const double estimate = learner::estimate_L(w, shard, spec, 32, s);
    REQUIRE(estimate <= spectral * 1.01);  // lower-bound diagnostic
    REQUIRE(estimate >= spectral / 10.0);
  }
}
