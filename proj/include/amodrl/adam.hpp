#pragma once

#include <cmath>
#include <vector>

#include "amodrl/errors.hpp"
#include "amodrl/tape.hpp"

namespace amodrl {

/// First/second-moment accumulators for one parameter.
struct AdamState {
  Tensor m;
  Tensor v;
  long step = 0;
};

struct AdamConfig {
  double lr = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of `value` from `grad`.
inline void adam_step(Tensor& value, const Tensor& grad, AdamState& st, const AdamConfig& cfg) {
  if (cfg.lr <= 0.0) throw ArgumentError("adam_step: lr must be positive");
  if (!value.same_shape(grad))
    throw DimensionError("adam_step: param " + value.shape_str() + " vs grad " +
                         grad.shape_str());
  if (st.m.size() != value.size()) {
    st.m = Tensor::zeros(value.rows, value.cols);
    st.v = Tensor::zeros(value.rows, value.cols);
    st.step = 0;
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (size_t i = 0; i < value.size(); ++i) {
    const double g = grad.data[i];
    st.m.data[i] = cfg.beta1 * st.m.data[i] + (1.0 - cfg.beta1) * g;
    st.v.data[i] = cfg.beta2 * st.v.data[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = st.m.data[i] / c1;
    const double vhat = st.v.data[i] / c2;
    value.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

/// Adam across a fixed parameter set. The parameter list must be identical
/// (same order) on every call; states are keyed by position.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamConfig cfg = {}) : cfg_(cfg) {}

  const AdamConfig& config() const { return cfg_; }

  void step(const std::vector<Parameter*>& params) {
    if (states_.empty()) states_.resize(params.size());
    if (states_.size() != params.size())
      throw ContractError("AdamOptimizer: parameter set changed size");
    for (size_t i = 0; i < params.size(); ++i)
      adam_step(params[i]->value, params[i]->grad, states_[i], cfg_);
  }

  std::vector<AdamState>& states() { return states_; }
  const std::vector<AdamState>& states() const { return states_; }

 private:
  AdamConfig cfg_;
  std::vector<AdamState> states_;
};

/// Rescale gradients so their joint L2 norm is at most `max_norm`.
/// Returns the pre-clip norm.
inline double clip_global_norm(const std::vector<Parameter*>& params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params)
    for (double g : p->grad.data) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double f = max_norm / norm;
    for (Parameter* p : params)
      for (double& g : p->grad.data) g *= f;
  }
  return norm;
}

}  // namespace amodrl
