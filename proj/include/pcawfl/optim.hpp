#pragma once

// Server-side update rules. The accelerated rule is implemented twice on
// purpose: the three-line momentum recursion is the runtime path, and the
// classical two-sequence Nesterov form exists so tests can verify both
// produce the same trajectory. A shared state struct carries what each
// stepper needs (u for the three-line form, prev_u for the standard form).

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace pcawfl::optim {

using ModelVector = Eigen::VectorXd;
using GradientVector = Eigen::VectorXd;

struct MomentumState {
  Eigen::VectorXd u;       // momentum accumulator, u_0 = 0
  Eigen::VectorXd prev_u;  // standard-form u_{k-1}, seeded with w_0 so the
                           // first standard step matches the three-line form
  double beta = 0.0;
  double eta = 0.0;

  static MomentumState initial(const ModelVector& w0, double beta, double eta) {
    if (!(beta >= 0.0 && beta < 1.0))
      throw std::invalid_argument("momentum factor must be in [0, 1)");
    if (!(eta > 0.0)) throw std::invalid_argument("stepsize must be positive");
    MomentumState s;
    s.u = Eigen::VectorXd::Zero(w0.size());
    s.prev_u = w0;
    s.beta = beta;
    s.eta = eta;
    return s;
  }
};

inline ModelVector wfl_step(const ModelVector& w, const GradientVector& agg,
                            double eta) {
  if (!(eta > 0.0)) throw std::invalid_argument("stepsize must be positive");
  if (w.size() != agg.size())
    throw std::invalid_argument("wfl_step: dimension mismatch");
  return w - eta * agg;
}

// Three-line accelerated rule: u <- beta u + agg; v = beta u + agg;
// w <- w - eta v.
inline std::pair<ModelVector, MomentumState> awfl_step(
    const ModelVector& w, const MomentumState& state,
    const GradientVector& agg) {
  if (w.size() != agg.size() || state.u.size() != w.size())
    throw std::invalid_argument("awfl_step: dimension mismatch");
  MomentumState next = state;
  next.u = state.beta * state.u + agg;
  const Eigen::VectorXd v = state.beta * next.u + agg;
  return {w - state.eta * v, std::move(next)};
}

// Standard Nesterov two-sequence form: u_k = w_k - eta agg;
// w_{k+1} = (1 + beta) u_k - beta u_{k-1}.
inline std::pair<ModelVector, MomentumState> awfl_standard_step(
    const ModelVector& w, const MomentumState& state,
    const GradientVector& agg) {
  if (w.size() != agg.size() || state.prev_u.size() != w.size())
    throw std::invalid_argument("awfl_standard_step: dimension mismatch");
  MomentumState next = state;
  const Eigen::VectorXd u_k = w - state.eta * agg;
  ModelVector advanced = (1.0 + state.beta) * u_k - state.beta * state.prev_u;
  next.prev_u = u_k;
  return {std::move(advanced), std::move(next)};
}

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;

  static AdamState initial(Eigen::Index d1) {
    return {Eigen::VectorXd::Zero(d1), Eigen::VectorXd::Zero(d1), 0};
  }
};

struct AdamHyper {
  double eta = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline std::pair<ModelVector, AdamState> adam_step(const ModelVector& w,
                                                   const AdamState& state,
                                                   const GradientVector& agg,
                                                   const AdamHyper& hyper) {
  if (w.size() != agg.size() || state.m.size() != w.size())
    throw std::invalid_argument("adam_step: dimension mismatch");
  if (!(hyper.eta > 0.0) || hyper.beta1 < 0.0 || hyper.beta1 >= 1.0 ||
      hyper.beta2 < 0.0 || hyper.beta2 >= 1.0 || !(hyper.epsilon > 0.0))
    throw std::invalid_argument("adam_step: bad hyperparameters");
  AdamState next = state;
  next.t = state.t + 1;
  next.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * agg;
  next.v = hyper.beta2 * state.v + (1.0 - hyper.beta2) * agg.cwiseProduct(agg);
  const double m_corr = 1.0 - std::pow(hyper.beta1, static_cast<double>(next.t));
  const double v_corr = 1.0 - std::pow(hyper.beta2, static_cast<double>(next.t));
  const Eigen::ArrayXd m_hat = next.m.array() / m_corr;
  const Eigen::ArrayXd v_hat = next.v.array() / v_corr;
  ModelVector advanced =
      w.array() - hyper.eta * m_hat / (v_hat.sqrt() + hyper.epsilon);
  return {std::move(advanced), std::move(next)};
}

struct StepsizeGuard {
  double wfl_limit = 0.0;
  double awfl_limit = 0.0;
  bool wfl_ok = false;
  bool awfl_ok = false;
  double wfl_margin = 0.0;
  double awfl_margin = 0.0;
};

// Advisory check of the theorems' stepsize conditions; callers warn and
// proceed on violation.
inline StepsizeGuard stepsize_guard(double eta, double beta, double lipschitz) {
  if (!(lipschitz > 0.0)) throw std::domain_error("stepsize_guard: L must be > 0");
  if (!(eta > 0.0)) throw std::invalid_argument("stepsize_guard: eta must be > 0");
  if (!(beta >= 0.0 && beta < 1.0))
    throw std::invalid_argument("stepsize_guard: beta must be in [0, 1)");
  StepsizeGuard g;
  g.wfl_limit = 3.0 / (4.0 * lipschitz);
  const double one_minus = 1.0 - beta;
  g.awfl_limit = 3.0 * one_minus * one_minus /
                 (2.0 * (2.0 + beta * beta * beta) * lipschitz);
  g.wfl_ok = eta <= g.wfl_limit;
  g.awfl_ok = eta <= g.awfl_limit;
  g.wfl_margin = g.wfl_limit - eta;
  g.awfl_margin = g.awfl_limit - eta;
  return g;
}

}  // namespace pcawfl::optim
