#pragma once

// The supervised task: a tanh MLP with softmax cross-entropy loss, full-batch
// local gradients, accuracy evaluation, and the two diagnostic constants of
// the convergence theory (gradient diversity G, curvature estimate L).
//
// Parameter layout is fixed: layers in order, each as a row-major (out x in)
// weight matrix followed by its bias vector. Everything downstream (d1,
// channel-usage counts, the RNG draw order of the initializer) depends on it.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "pcawfl/dpca.hpp"
#include "pcawfl/mathkit.hpp"

namespace pcawfl::learner {

using ModelVector = Eigen::VectorXd;
using GradientVector = Eigen::VectorXd;
using dpca::WorkerShard;

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 2;  // class count; activation is tanh on hidden layers
};

namespace detail {

inline std::vector<int> layer_dims(const MlpSpec& spec) {
  if (spec.input_dim < 1 || spec.output_dim < 1)
    throw std::invalid_argument("mlp spec: dimensions must be >= 1");
  std::vector<int> dims;
  dims.push_back(spec.input_dim);
  for (int h : spec.hidden_dims) {
    if (h < 1) throw std::invalid_argument("mlp spec: hidden dims must be >= 1");
    dims.push_back(h);
  }
  dims.push_back(spec.output_dim);
  return dims;
}

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using WeightMap = Eigen::Map<RowMajorMatrix>;
using ConstWeightMap = Eigen::Map<const RowMajorMatrix>;

}  // namespace detail

inline int param_count(const MlpSpec& spec) {
  const auto dims = detail::layer_dims(spec);
  long total = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    total += static_cast<long>(dims[l] + 1) * dims[l + 1];
  return static_cast<int>(total);
}

// Glorot-uniform weights, zero biases. Weights are drawn in layout order so
// the model is a pure function of the stream.
inline ModelVector init_model(const MlpSpec& spec, mathkit::RngStream& stream) {
  const auto dims = detail::layer_dims(spec);
  ModelVector w = ModelVector::Zero(param_count(spec));
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    const double bound = std::sqrt(6.0 / (in + out));
    for (int i = 0; i < out * in; ++i)
      w(offset + i) = bound * (2.0 * stream.next_unit() - 1.0);
    offset += static_cast<Eigen::Index>(out) * in + out;  // biases stay zero
  }
  return w;
}

namespace detail {

struct Forward {
  std::vector<Eigen::MatrixXd> activations;  // activations[0] = input batch
  Eigen::MatrixXd logits;
};

inline void check_shard(const WorkerShard& shard, const MlpSpec& spec) {
  if (shard.samples.rows() != spec.input_dim)
    throw std::invalid_argument("shard dimension does not match mlp input");
  if (shard.samples.cols() == 0)
    throw std::invalid_argument("empty shard");
  if (shard.labels.size() != static_cast<std::size_t>(shard.samples.cols()))
    throw std::invalid_argument("labels/samples count mismatch");
  for (int label : shard.labels)
    if (label < 0 || label >= spec.output_dim)
      throw std::invalid_argument("label out of range");
}

inline Forward forward_pass(const ModelVector& w, const Eigen::MatrixXd& batch,
                            const MlpSpec& spec) {
  const auto dims = layer_dims(spec);
  if (w.size() != param_count(spec))
    throw std::invalid_argument("model size does not match spec");
  Forward fwd;
  fwd.activations.reserve(dims.size());
  fwd.activations.push_back(batch);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    ConstWeightMap weight(w.data() + offset, out, in);
    Eigen::Map<const Eigen::VectorXd> bias(
        w.data() + offset + static_cast<Eigen::Index>(out) * in, out);
    Eigen::MatrixXd z = weight * fwd.activations.back();
    z.colwise() += bias;
    if (l + 2 < dims.size()) {
      fwd.activations.push_back(z.array().tanh().matrix());
    } else {
      fwd.logits = std::move(z);
    }
    offset += static_cast<Eigen::Index>(out) * in + out;
  }
  return fwd;
}

}  // namespace detail

// Column-wise softmax, stabilized by the per-column maximum.
inline Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index m = 0; m < logits.cols(); ++m) {
    const double peak = logits.col(m).maxCoeff();
    p.col(m) = (logits.col(m).array() - peak).exp();
    p.col(m) /= p.col(m).sum();
  }
  return p;
}

inline double local_loss(const ModelVector& w, const WorkerShard& shard,
                         const MlpSpec& spec) {
  detail::check_shard(shard, spec);
  const auto fwd = detail::forward_pass(w, shard.samples, spec);
  const Eigen::Index m_count = shard.samples.cols();
  double loss = 0.0;
  for (Eigen::Index m = 0; m < m_count; ++m) {
    const auto col = fwd.logits.col(m);
    const double peak = col.maxCoeff();
    const double lse = peak + std::log((col.array() - peak).exp().sum());
    loss += lse - col(shard.labels[static_cast<std::size_t>(m)]);
  }
  return loss / static_cast<double>(m_count);
}

inline GradientVector local_gradient(const ModelVector& w,
                                     const WorkerShard& shard,
                                     const MlpSpec& spec) {
  detail::check_shard(shard, spec);
  const auto dims = detail::layer_dims(spec);
  const auto fwd = detail::forward_pass(w, shard.samples, spec);
  const Eigen::Index m_count = shard.samples.cols();

  Eigen::MatrixXd delta = softmax_columns(fwd.logits);
  for (Eigen::Index m = 0; m < m_count; ++m)
    delta(shard.labels[static_cast<std::size_t>(m)], m) -= 1.0;
  delta /= static_cast<double>(m_count);

  GradientVector grad = GradientVector::Zero(w.size());
  Eigen::Index offset = grad.size();
  for (std::size_t l = dims.size() - 1; l-- > 0;) {
    const int in = dims[l], out = dims[l + 1];
    offset -= static_cast<Eigen::Index>(out) * in + out;
    detail::WeightMap grad_weight(grad.data() + offset, out, in);
    Eigen::Map<Eigen::VectorXd> grad_bias(
        grad.data() + offset + static_cast<Eigen::Index>(out) * in, out);
    grad_weight = delta * fwd.activations[l].transpose();
    grad_bias = delta.rowwise().sum();
    if (l > 0) {
      detail::ConstWeightMap weight(w.data() + offset, out, in);
      delta = (weight.transpose() * delta).cwiseProduct(
          (1.0 - fwd.activations[l].array().square()).matrix());
    }
  }
  return grad;
}

inline double test_accuracy(const ModelVector& w, const WorkerShard& testset,
                            const MlpSpec& spec) {
  detail::check_shard(testset, spec);
  const auto fwd = detail::forward_pass(w, testset.samples, spec);
  const Eigen::Index m_count = testset.samples.cols();
  long correct = 0;
  for (Eigen::Index m = 0; m < m_count; ++m) {
    int arg = 0;
    for (int c = 1; c < spec.output_dim; ++c)
      if (fwd.logits(c, m) > fwd.logits(arg, m)) arg = c;  // ties keep lowest
    if (arg == testset.labels[static_cast<std::size_t>(m)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(m_count);
}

// Gradient diversity (1/N) sum ||y_n - mean||^2; the harness keeps the running
// max over frames as the empirical G.
inline double estimate_G(const std::vector<GradientVector>& gradients) {
  if (gradients.empty()) throw std::invalid_argument("estimate_G: no gradients");
  const Eigen::Index d = gradients.front().size();
  GradientVector mean = GradientVector::Zero(d);
  for (const auto& g : gradients) {
    if (g.size() != d) throw std::invalid_argument("estimate_G: size mismatch");
    mean += g;
  }
  mean /= static_cast<double>(gradients.size());
  double sum = 0.0;
  for (const auto& g : gradients) sum += (g - mean).squaredNorm();
  return sum / static_cast<double>(gradients.size());
}

// Curvature probe: max difference quotient of the gradient over random
// perturbations at a ladder of radii. A lower-bound diagnostic for L, not a
// certificate.
template <class GradFn>
double estimate_lipschitz(const GradFn& grad_fn, const ModelVector& w,
                          int trials, mathkit::RngStream& stream) {
  if (trials < 1) throw std::invalid_argument("estimate_lipschitz: trials >= 1");
  static constexpr double kRadii[] = {1e-3, 1e-2, 1e-1, 1.0};
  const GradientVector base = grad_fn(w);
  const double scale = 1.0 + w.norm();
  double best = 0.0;
  for (int t = 0; t < trials; ++t) {
    ModelVector dir(w.size());
    for (Eigen::Index i = 0; i < dir.size(); ++i)
      dir(i) = mathkit::sample_real_gaussian(1.0, stream);
    const double norm = dir.norm();
    if (norm == 0.0) continue;
    const double radius = kRadii[t % 4] * scale;
    dir *= radius / norm;
    best = std::max(best, (grad_fn(w + dir) - base).norm() / radius);
  }
  return best;
}

inline double estimate_L(const ModelVector& w, const WorkerShard& shard,
                         const MlpSpec& spec, int trials,
                         mathkit::RngStream& stream) {
  return estimate_lipschitz(
      [&](const ModelVector& point) { return local_gradient(point, shard, spec); },
      w, trials, stream);
}

}  // namespace pcawfl::learner
