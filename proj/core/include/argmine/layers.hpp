#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "argmine/random.hpp"
#include "argmine/tensor.hpp"

namespace argmine::nn {

/// Ordered set of named trainable tensors. Names are unique; insertion order
/// is the serialization order.
class ParameterStore {
 public:
  /// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))
  Tensor add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng);
  Tensor add_normal(const std::string& name, Shape shape, double stddev, Rng& rng);
  Tensor add_constant(const std::string& name, Shape shape, double value);

  bool contains(const std::string& name) const;
  Tensor get(const std::string& name) const;  // throws std::out_of_range
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t num_values() const;

  void zero_grad();
  /// Sets every value to `value`. Handy for closed-form tests.
  void fill(double value);

 private:
  Tensor insert(const std::string& name, Tensor t);
  std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Forward-pass mode. A null rng means evaluation: dropout is the identity.
struct Mode {
  Rng* rng = nullptr;
  double dropout = 0.0;

  bool training() const { return rng != nullptr; }
  Tensor drop(const Tensor& x) const;
};

/// y = x W + b with W stored [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t width);
  Tensor operator()(const Tensor& x) const;
};

/// Position-wise residual block: x + W2 relu(W1 LN(x)).
struct FeedForward {
  LayerNorm norm;
  Linear up;
  Linear down;

  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& name, std::size_t width, std::size_t hidden, Rng& rng);
  Tensor operator()(const Tensor& x, const Mode& mode) const;
};

struct GruDirection {
  Tensor w_x, w_h, b_x, b_h;

  GruDirection() = default;
  GruDirection(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, Rng& rng);
  Tensor operator()(const Tensor& x, bool reverse) const;
};

/// Bidirectional GRU; the two direction states are concatenated and
/// projected back to the input width.
struct BiGruLayer {
  GruDirection forward;
  GruDirection backward;
  Linear project;

  BiGruLayer() = default;
  BiGruLayer(ParameterStore& store, const std::string& name, std::size_t width, Rng& rng);
  Tensor operator()(const Tensor& x, const Mode& mode) const;
};

/// Pre-norm multi-head self-attention followed by a feed-forward block.
struct TransformerLayer {
  LayerNorm norm;
  Linear query, key, value, output;
  FeedForward ffn;
  std::size_t heads = 1;

  TransformerLayer() = default;
  TransformerLayer(ParameterStore& store, const std::string& name, std::size_t width, std::size_t heads,
                   std::size_t ffn_hidden, Rng& rng);
  /// When `attention` is given it receives one n x n weight matrix per head.
  Tensor operator()(const Tensor& x, const Mode& mode, std::vector<Tensor>* attention = nullptr) const;
};

}  // namespace argmine::nn
