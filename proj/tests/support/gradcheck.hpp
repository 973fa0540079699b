#pragma once

// Central finite-difference checks against the tape gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "argmine/layers.hpp"
#include "argmine/random.hpp"
#include "argmine/tensor.hpp"

namespace argmine::testing {

struct ProbeResult {
  std::size_t probes = 0;
  double max_rel = 0.0;   // worst per-probe |a-n| / max(|a|, |n|, floor)
  double norm_rel = 0.0;  // ||a-n|| / max(||a||, ||n||, floor) over the probes
  std::size_t kinks = 0;  // probes dropped because the step straddled a ReLU corner
  // Largest |analytic| over the whole tensor and largest |numeric| over the
  // probes. When both sit at roundoff level (a gradient that vanishes
  // identically, like an attention key bias) a relative error is noise over
  // noise, so they are bounded absolutely instead.
  double max_analytic = 0.0;
  double max_abs = 0.0;

  // roundoff of a difference quotient is about ulp(L) / eps, ~1e-9 for the
  // losses used here
  static constexpr double kZeroTol = 1e-8;
  bool vanishing() const { return max_analytic < kZeroTol; }
  bool ok(double rel_tol = 1e-4) const { return vanishing() ? max_abs < kZeroTol : norm_rel < rel_tol; }
};

/// `loss` must rebuild the graph from scratch and be a pure function of
/// the current parameter values (reseed any dropout rng inside it).
/// Probes favour entries with a non-zero analytic gradient.
/// With `kink_tol` > 0 a probe whose forward and backward one-sided slopes
/// differ by more than kink_tol * max(|slope|, floor) is skipped: smooth
/// curvature cannot explain that gap at small eps, a slope jump can.
inline ProbeResult probe_gradient(const std::function<nn::Tensor()>& loss, nn::Tensor param, std::size_t probes,
                                  Rng& rng, double eps = 1e-5, double floor = 1e-6, double kink_tol = 0.0) {
  param.zero_grad();
  const nn::Tensor base = loss();
  const double centre = base.item();
  nn::backward(base);
  const std::vector<double> analytic(param.grad().begin(), param.grad().end());
  std::vector<std::size_t> candidates, touched;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (analytic[i] != 0.0) touched.push_back(i);
  }
  const std::size_t n = param.numel();
  if (n <= probes) {
    for (std::size_t i = 0; i < n; ++i) candidates.push_back(i);
  } else {
    for (std::size_t k = 0; k < probes; ++k) {
      const bool pick_touched = !touched.empty() && k % 2 == 0;
      candidates.push_back(pick_touched ? touched[rng.index(touched.size())] : rng.index(n));
    }
  }
  ProbeResult r;
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  auto values = param.mutable_values();
  for (std::size_t i : candidates) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double up = loss().item();
    values[i] = saved - eps;
    const double down = loss().item();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    if (kink_tol > 0.0) {
      const double fwd = (up - centre) / eps, bwd = (centre - down) / eps;
      if (std::abs(fwd - bwd) > kink_tol * std::max({std::abs(fwd), std::abs(bwd), floor})) {
        ++r.kinks;
        continue;
      }
    }
    const double a = analytic[i];
    r.max_abs = std::max(r.max_abs, std::abs(numeric));
    const double scale = std::max({std::abs(a), std::abs(numeric), floor});
    r.max_rel = std::max(r.max_rel, std::abs(a - numeric) / scale);
    diff2 += (a - numeric) * (a - numeric);
    a2 += a * a;
    n2 += numeric * numeric;
    ++r.probes;
  }
  for (double a : analytic) r.max_analytic = std::max(r.max_analytic, std::abs(a));
  r.norm_rel = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), floor});
  param.zero_grad();
  return r;
}

inline nn::Tensor random_tensor(nn::Shape shape, Rng& rng, bool requires_grad = true, double scale = 1.0) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-scale, scale);
  return nn::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

/// Scalar probe of a tensor-valued function: sum(w * f) with fixed random w.
inline nn::Tensor weighted_sum(const nn::Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return nn::sum(nn::mul(y, random_tensor(y.shape(), rng, false)));
}

}  // namespace argmine::testing
