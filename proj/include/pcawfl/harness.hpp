#pragma once

// Experiment driver: dataset preparation, the one-shot PCA preprocessing
// round, the per-frame train/transmit/aggregate/update loop, the theorem
// bound evaluation, and the channel statistics verification suite.
//
// Determinism contract: every random quantity comes from a counter-keyed
// stream addressed by (seed, role, frame). Worker n's fading for frame k
// uses (seed, n, 2k) and its receiver noise (seed, n, 2k+1); datasets, model
// init, and curvature probes use reserved role tags far above any worker id.
// Reductions always run in worker order on the main thread, so results are
// independent of the --threads setting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "pcawfl/channel.hpp"
#include "pcawfl/config.hpp"
#include "pcawfl/dataset.hpp"
#include "pcawfl/dpca.hpp"
#include "pcawfl/learner.hpp"
#include "pcawfl/mathkit.hpp"
#include "pcawfl/metrics.hpp"
#include "pcawfl/optim.hpp"

namespace pcawfl::harness {

inline constexpr std::uint64_t kTrainDataTag = 0x00DA7A00;
inline constexpr std::uint64_t kTestDataTag = 0x00DA7A01;
inline constexpr std::uint64_t kModelTag = 0x00C0DE00;
inline constexpr std::uint64_t kProbeTag = 0x00C04B00;
inline constexpr std::uint64_t kStatsTag = 0x0057A700;  // + worker id

struct RunResult {
  std::vector<FrameRecord> records;
  learner::ModelVector final_model;
  learner::MlpSpec mlp;
  dpca::GlobalBasis basis;
  int d1 = 0;
  double initial_loss = 0.0;
  double min_loss = 0.0;
  double empirical_G = 0.0;
  std::optional<double> final_accuracy;
  double sigma_sq = 0.0;
  channel::TheoryConstants constants;  // zero when the channel is bypassed
};

namespace detail {

struct PreparedData {
  std::vector<dpca::WorkerShard> shards;  // projected, one per worker
  dpca::WorkerShard testset;              // projected; empty when unused
  dpca::GlobalBasis basis;
};

inline PreparedData prepare_data(const SimConfig& cfg) {
  Dataset train, test;
  const long train_count =
      static_cast<long>(cfg.num_workers) * cfg.samples_per_worker;

  if (cfg.dataset == DatasetKind::kSynth) {
    mathkit::RngStream train_stream(cfg.seed, kTrainDataTag, 0);
    train = synth_dataset(cfg.raw_dim, cfg.classes, train_count,
                          cfg.separation, train_stream);
    if (cfg.test_samples > 0) {
      mathkit::RngStream test_stream(cfg.seed, kTestDataTag, 0);
      test = synth_dataset(cfg.raw_dim, cfg.classes, cfg.test_samples,
                           cfg.separation, test_stream);
    }
  } else {
    train = load_idx(cfg.idx_images, cfg.idx_labels);
    if (train.samples.rows() != cfg.raw_dim)
      throw std::runtime_error("dataset: idx sample dimension " +
                               std::to_string(train.samples.rows()) +
                               " does not match raw_dim");
    if (train.samples.cols() < train_count)
      throw std::runtime_error(
          "dataset: idx training set smaller than num_workers * samples_per_worker");
    train.samples.conservativeResize(Eigen::NoChange, train_count);
    train.labels.resize(static_cast<std::size_t>(train_count));
    if (!cfg.idx_test_images.empty()) {
      test = load_idx(cfg.idx_test_images, cfg.idx_test_labels);
      if (test.samples.rows() != cfg.raw_dim)
        throw std::runtime_error("dataset: idx test dimension mismatch");
      if (cfg.test_samples > 0 && test.samples.cols() > cfg.test_samples) {
        test.samples.conservativeResize(Eigen::NoChange, cfg.test_samples);
        test.labels.resize(static_cast<std::size_t>(cfg.test_samples));
      }
    }
  }

  if (cfg.split == SplitPolicy::kByClass) train = sort_by_label(train);

  if (cfg.pca_center) {
    const Eigen::VectorXd mean = train.samples.rowwise().mean();
    train.samples.colwise() -= mean;
    if (test.samples.cols() > 0) test.samples.colwise() -= mean;
  }

  auto raw_shards = split_contiguous(train, cfg.num_workers);

  std::vector<dpca::LocalFactor> factors;
  factors.reserve(raw_shards.size());
  for (const auto& shard : raw_shards)
    factors.push_back(dpca::local_factor(shard, cfg.reduced_dim));

  PreparedData out;
  out.basis = dpca::merge_factors(factors);
  out.shards.reserve(raw_shards.size());
  for (const auto& shard : raw_shards)
    out.shards.push_back(dpca::project(out.basis, shard));
  if (test.samples.cols() > 0) {
    out.testset.samples = out.basis.basis.transpose() * test.samples;
    out.testset.labels = test.labels;
    out.testset.worker_id = -1;
  }
  return out;
}

// One worker's contribution for one frame: local gradient and loss, plus the
// post-channel estimate when the analog uplink is in use.
inline void worker_frame(const SimConfig& cfg, const learner::ModelVector& w,
                         const learner::MlpSpec& spec,
                         const dpca::WorkerShard& shard,
                         const channel::WorkerGeometry& geom,
                         const channel::NoiseModel& noise, long frame, int n,
                         learner::GradientVector& grad_out, double& loss_out,
                         learner::GradientVector& recv_out) {
  grad_out = learner::local_gradient(w, shard, spec);
  loss_out = learner::local_loss(w, shard, spec);
  if (uses_channel(cfg.optimizer)) {
    const int d1 = static_cast<int>(grad_out.size());
    mathkit::RngStream fading(cfg.seed, static_cast<std::uint64_t>(n),
                              static_cast<std::uint64_t>(2 * frame));
    const auto ch_frame = channel::draw_channel_frame(geom, d1, cfg.h0, fading);
    const auto plan =
        channel::make_transmit_plan(ch_frame, grad_out, cfg.p0, cfg.h0, geom);
    mathkit::RngStream rx_noise(cfg.seed, static_cast<std::uint64_t>(n),
                                static_cast<std::uint64_t>(2 * frame + 1));
    recv_out = channel::transmit(grad_out, plan, ch_frame, noise, rx_noise);
  } else {
    recv_out = grad_out;
  }
}

}  // namespace detail

inline RunResult run_experiment(const SimConfig& cfg, int threads = 1) {
  if (threads < 1) throw std::invalid_argument("run_experiment: threads >= 1");
  const int n_workers = cfg.num_workers;
  const long frames = cfg.num_frames;

  auto data = detail::prepare_data(cfg);

  learner::MlpSpec spec;
  spec.input_dim = cfg.reduced_dim;
  spec.hidden_dims = cfg.hidden_dims;
  spec.output_dim = cfg.classes;
  const int d1 = learner::param_count(spec);

  mathkit::RngStream model_stream(cfg.seed, kModelTag, 0);
  learner::ModelVector w = learner::init_model(spec, model_stream);

  std::vector<channel::WorkerGeometry> geoms;
  geoms.reserve(static_cast<std::size_t>(n_workers));
  for (int n = 0; n < n_workers; ++n)
    geoms.push_back({cfg.distances[static_cast<std::size_t>(n)],
                     cfg.pathloss_exponent});
  const channel::NoiseModel noise{cfg.noise_variance};

  optim::MomentumState momentum =
      optim::MomentumState::initial(w, cfg.momentum, cfg.stepsize);
  optim::AdamState adam = optim::AdamState::initial(d1);
  optim::AdamHyper adam_hyper{cfg.stepsize, cfg.adam_beta1, cfg.adam_beta2,
                              cfg.adam_epsilon};

  const long eval_every =
      cfg.eval_every > 0 ? cfg.eval_every : std::max(1L, frames / 200);
  const bool have_test = data.testset.samples.cols() > 0;

  RunResult result;
  result.mlp = spec;
  result.basis = data.basis;
  result.d1 = d1;
  result.sigma_sq = cfg.noise_variance;
  if (uses_channel(cfg.optimizer))
    result.constants = channel::lemma_constants(geoms, cfg.h0, cfg.p0);
  result.records.reserve(static_cast<std::size_t>(frames));

  std::vector<learner::GradientVector> grads(
      static_cast<std::size_t>(n_workers));
  std::vector<learner::GradientVector> received(
      static_cast<std::size_t>(n_workers));
  std::vector<double> losses(static_cast<std::size_t>(n_workers), 0.0);

  const int pool = std::min(threads, n_workers);
  double running_sum = 0.0;
  double best_G = 0.0;
  double min_loss = std::numeric_limits<double>::infinity();

  for (long k = 0; k < frames; ++k) {
    auto run_slice = [&](int lo, int hi) {
      for (int n = lo; n < hi; ++n)
        detail::worker_frame(cfg, w, spec,
                             data.shards[static_cast<std::size_t>(n)],
                             geoms[static_cast<std::size_t>(n)], noise, k, n,
                             grads[static_cast<std::size_t>(n)],
                             losses[static_cast<std::size_t>(n)],
                             received[static_cast<std::size_t>(n)]);
    };
    if (pool <= 1) {
      run_slice(0, n_workers);
    } else {
      std::vector<std::thread> crew;
      std::vector<std::exception_ptr> errors(static_cast<std::size_t>(pool));
      const int chunk = (n_workers + pool - 1) / pool;
      for (int t = 0; t < pool; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(n_workers, lo + chunk);
        crew.emplace_back([&, t, lo, hi] {
          try {
            run_slice(lo, hi);
          } catch (...) {
            errors[static_cast<std::size_t>(t)] = std::current_exception();
          }
        });
      }
      for (auto& th : crew) th.join();
      for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    }

    const learner::GradientVector true_grad = channel::aggregate(grads);
    const learner::GradientVector agg = channel::aggregate(received);
    double loss = 0.0;
    for (double v : losses) loss += v;
    loss /= static_cast<double>(n_workers);

    best_G = std::max(best_G, learner::estimate_G(grads));
    min_loss = std::min(min_loss, loss);
    running_sum += true_grad.squaredNorm();

    FrameRecord rec;
    rec.frame = k;
    rec.grad_norm_sq = true_grad.squaredNorm();
    rec.running_avg_grad_norm_sq = running_sum / static_cast<double>(k + 1);
    rec.loss = loss;
    rec.channel_usages = (k + 1) * static_cast<long>(n_workers) * (d1 + 1);
    rec.empirical_G = best_G;
    if (have_test && (k % eval_every == 0 || k == frames - 1)) {
      rec.test_accuracy = learner::test_accuracy(w, data.testset, spec);
      result.final_accuracy = rec.test_accuracy;
    }
    result.records.push_back(std::move(rec));

    switch (cfg.optimizer) {
      case Optimizer::kWfl:
      case Optimizer::kEf:
        w = optim::wfl_step(w, agg, cfg.stepsize);
        break;
      case Optimizer::kAwfl: {
        auto next = optim::awfl_step(w, momentum, agg);
        w = std::move(next.first);
        momentum = std::move(next.second);
        break;
      }
      case Optimizer::kAdam:
      case Optimizer::kEfAdam: {
        auto next = optim::adam_step(w, adam, agg, adam_hyper);
        w = std::move(next.first);
        adam = std::move(next.second);
        break;
      }
    }
  }

  result.final_model = std::move(w);
  result.initial_loss = result.records.front().loss;
  result.min_loss = min_loss;
  result.empirical_G = best_G;
  return result;
}

// Curvature estimate for the trained task: probes the pooled projected
// training set at the initial model.
inline double estimate_task_lipschitz(const SimConfig& cfg) {
  auto data = detail::prepare_data(cfg);
  learner::MlpSpec spec{cfg.reduced_dim, cfg.hidden_dims, cfg.classes};
  dpca::WorkerShard pooled;
  pooled.worker_id = 0;
  Eigen::Index total = 0;
  for (const auto& s : data.shards) total += s.samples.cols();
  pooled.samples.resize(cfg.reduced_dim, total);
  pooled.labels.reserve(static_cast<std::size_t>(total));
  Eigen::Index at = 0;
  for (const auto& s : data.shards) {
    pooled.samples.middleCols(at, s.samples.cols()) = s.samples;
    pooled.labels.insert(pooled.labels.end(), s.labels.begin(), s.labels.end());
    at += s.samples.cols();
  }
  mathkit::RngStream model_stream(cfg.seed, kModelTag, 0);
  const learner::ModelVector w0 = learner::init_model(spec, model_stream);
  mathkit::RngStream probe(cfg.seed, kProbeTag, 0);
  return learner::estimate_L(w0, pooled, spec, cfg.lipschitz_trials, probe);
}

// Theorem 1 / Theorem 2 right-hand sides. Two noise-term conventions are
// reported: "printed" divides the sigma^2 term by p0 a second time, matching
// the theorem statements as typeset; "lemma" keeps the scaling that follows
// from the variance bound, where c2 already carries the 1/p0.
struct BoundReport {
  double measured_avg = 0.0;  // time average of ||grad f||^2 over the run
  double c1 = 0.0, c2 = 0.0;
  double wfl_first = 0.0, awfl_first = 0.0;          // transient terms
  double wfl_floor_printed = 0.0, wfl_floor_lemma = 0.0;
  double awfl_floor_printed = 0.0, awfl_floor_lemma = 0.0;
  double wfl_rhs_printed = 0.0, wfl_rhs_lemma = 0.0;
  double awfl_rhs_printed = 0.0, awfl_rhs_lemma = 0.0;
  optim::StepsizeGuard guard;
};

inline BoundReport eval_theorem_bounds(const SimConfig& cfg, double empirical_G,
                                       double lipschitz, double loss_drop,
                                       double measured_avg) {
  if (!(lipschitz > 0.0))
    throw std::domain_error("eval_theorem_bounds: lipschitz must be positive");
  if (loss_drop < 0.0) loss_drop = 0.0;

  learner::MlpSpec spec{cfg.reduced_dim, cfg.hidden_dims, cfg.classes};
  const double d1 = static_cast<double>(learner::param_count(spec));
  const double n = static_cast<double>(cfg.num_workers);
  const double k_frames = static_cast<double>(cfg.num_frames);
  const double eta = cfg.stepsize;
  const double beta = cfg.momentum;

  BoundReport report;
  report.measured_avg = measured_avg;
  report.guard = optim::stepsize_guard(eta, beta, lipschitz);

  if (uses_channel(cfg.optimizer)) {
    std::vector<channel::WorkerGeometry> geoms;
    for (double dist : cfg.distances)
      geoms.push_back({dist, cfg.pathloss_exponent});
    const auto constants = channel::lemma_constants(geoms, cfg.h0, cfg.p0);
    report.c1 = constants.c1;
    report.c2 = constants.c2;
  }

  const double noise_printed = report.c2 * d1 * cfg.noise_variance / cfg.p0;
  const double noise_lemma = report.c2 * d1 * cfg.noise_variance;
  const double spread_printed = report.c1 + noise_printed + empirical_G;
  const double spread_lemma = report.c1 + noise_lemma + empirical_G;

  report.wfl_first = 4.0 * loss_drop / (eta * k_frames);
  report.wfl_floor_printed = spread_printed * eta * lipschitz / n;
  report.wfl_floor_lemma = spread_lemma * eta * lipschitz / n;
  report.wfl_rhs_printed = report.wfl_first + report.wfl_floor_printed;
  report.wfl_rhs_lemma = report.wfl_first + report.wfl_floor_lemma;

  const double shrink = 1.0 - beta;
  report.awfl_first = 4.0 * shrink * loss_drop / (eta * k_frames);
  report.awfl_floor_printed =
      spread_printed * eta * lipschitz / (n * shrink * shrink);
  report.awfl_floor_lemma =
      spread_lemma * eta * lipschitz / (n * shrink * shrink);
  report.awfl_rhs_printed = report.awfl_first + report.awfl_floor_printed;
  report.awfl_rhs_lemma = report.awfl_first + report.awfl_floor_lemma;
  return report;
}

// Monte Carlo verification of the estimator statistics: unbiasedness of the
// aggregate, the Lemma 1 second-moment bound, and the closed form for
// E[rho^-2], all at the configured geometry. Gradients are fixed unit
// vectors drawn once from the stats tag; the channel streams use the same
// (seed, worker, 2k / 2k+1) addressing as training frames.
struct WorkerRhoCheck {
  int worker = 0;
  double expected = 0.0;
  double estimate = 0.0;
  double rel_dev = 0.0;
};

struct StatsReport {
  int dim = 0;
  long draws = 0;
  double tolerance = 0.02;
  double unbias_rel_dev = 0.0;
  double second_moment = 0.0;
  double bound = 0.0;
  double bound_slack = 0.0;
  std::vector<WorkerRhoCheck> rho_checks;
  double max_rho_rel_dev = 0.0;
  bool unbiased_ok = false, bound_ok = false, rho_ok = false, all_ok = false;
  channel::TheoryConstants constants;
};

inline StatsReport verify_statistics(const SimConfig& cfg) {
  if (!(cfg.h0 > 0.0))
    throw std::domain_error("verify_statistics: needs h0 > 0");
  const int n_workers = cfg.num_workers;
  const int d1 = cfg.mc_dim;
  const long draws = cfg.mc_draws;

  std::vector<channel::WorkerGeometry> geoms;
  for (double dist : cfg.distances)
    geoms.push_back({dist, cfg.pathloss_exponent});
  const channel::NoiseModel noise{cfg.noise_variance};

  std::vector<learner::GradientVector> y(static_cast<std::size_t>(n_workers));
  for (int n = 0; n < n_workers; ++n) {
    mathkit::RngStream gen(cfg.seed, kStatsTag + static_cast<std::uint64_t>(n), 0);
    learner::GradientVector v(d1);
    for (int i = 0; i < d1; ++i)
      v(i) = mathkit::sample_real_gaussian(1.0, gen);
    y[static_cast<std::size_t>(n)] = v / v.norm();
  }
  const learner::GradientVector target = channel::aggregate(y);
  const double target_norm_sq = target.squaredNorm();
  const double big_g = learner::estimate_G(y);

  StatsReport report;
  report.dim = d1;
  report.draws = draws;
  report.constants = channel::lemma_constants(geoms, cfg.h0, cfg.p0);
  report.bound = channel::variance_bound(report.constants, d1,
                                         cfg.noise_variance, big_g,
                                         target_norm_sq, n_workers);

  learner::GradientVector mean_agg = learner::GradientVector::Zero(d1);
  double sum_sq = 0.0;
  std::vector<double> rho_sum(static_cast<std::size_t>(n_workers), 0.0);
  std::vector<long> rho_count(static_cast<std::size_t>(n_workers), 0);
  std::vector<learner::GradientVector> received(
      static_cast<std::size_t>(n_workers));

  for (long t = 0; t < draws; ++t) {
    for (int n = 0; n < n_workers; ++n) {
      mathkit::RngStream fading(cfg.seed, static_cast<std::uint64_t>(n),
                                static_cast<std::uint64_t>(2 * t));
      const auto frame = channel::draw_channel_frame(
          geoms[static_cast<std::size_t>(n)], d1, cfg.h0, fading);
      const auto plan = channel::make_transmit_plan(
          frame, y[static_cast<std::size_t>(n)], cfg.p0, cfg.h0,
          geoms[static_cast<std::size_t>(n)]);
      if (!plan.silent) {
        const double rho = plan.alignment_factor;
        rho_sum[static_cast<std::size_t>(n)] += 1.0 / (rho * rho);
        rho_count[static_cast<std::size_t>(n)] += 1;
      }
      mathkit::RngStream rx(cfg.seed, static_cast<std::uint64_t>(n),
                            static_cast<std::uint64_t>(2 * t + 1));
      received[static_cast<std::size_t>(n)] = channel::transmit(
          y[static_cast<std::size_t>(n)], plan, frame, noise, rx);
    }
    const auto agg = channel::aggregate(received);
    mean_agg += agg;
    sum_sq += agg.squaredNorm();
  }

  mean_agg /= static_cast<double>(draws);
  report.unbias_rel_dev = (mean_agg - target).norm() / target.norm();
  report.second_moment = sum_sq / static_cast<double>(draws);
  report.bound_slack = report.bound - report.second_moment;
  report.constants.variance_bound_slack = report.bound_slack;

  report.max_rho_rel_dev = 0.0;
  for (int n = 0; n < n_workers; ++n) {
    WorkerRhoCheck check;
    check.worker = n;
    check.expected = channel::expected_inv_rho_sq(
        geoms[static_cast<std::size_t>(n)], cfg.h0, cfg.p0);
    const long count = rho_count[static_cast<std::size_t>(n)];
    check.estimate =
        count > 0 ? rho_sum[static_cast<std::size_t>(n)] / count : 0.0;
    check.rel_dev = std::abs(check.estimate - check.expected) / check.expected;
    report.max_rho_rel_dev = std::max(report.max_rho_rel_dev, check.rel_dev);
    report.rho_checks.push_back(check);
  }

  report.unbiased_ok = report.unbias_rel_dev <= report.tolerance;
  report.bound_ok = report.second_moment <= report.bound;
  report.rho_ok = report.max_rho_rel_dev <= report.tolerance;
  report.all_ok = report.unbiased_ok && report.bound_ok && report.rho_ok;
  return report;
}

}  // namespace pcawfl::harness
