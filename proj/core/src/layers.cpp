#include "argmine/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "argmine/error.hpp"

namespace argmine::nn {

namespace {

std::size_t product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor ParameterStore::insert(const std::string& name, Tensor t) {
  if (contains(name)) throw InvalidConfig("duplicate parameter name " + name);
  t.set_requires_grad(true);
  entries_.emplace_back(name, t);
  return t;
}

Tensor ParameterStore::add_uniform(const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::vector<double> v(product(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return insert(name, Tensor::from(std::move(shape), std::move(v)));
}

Tensor ParameterStore::add_normal(const std::string& name, Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(product(shape));
  for (double& x : v) x = rng.normal(0.0, stddev);
  return insert(name, Tensor::from(std::move(shape), std::move(v)));
}

Tensor ParameterStore::add_constant(const std::string& name, Shape shape, double value) {
  return insert(name, Tensor::full(std::move(shape), value));
}

bool ParameterStore::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

Tensor ParameterStore::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("no parameter named " + name);
}

std::size_t ParameterStore::num_values() const {
  std::size_t total = 0;
  for (const auto& e : entries_) total += e.second.numel();
  return total;
}

void ParameterStore::zero_grad() {
  for (auto& e : entries_) e.second.zero_grad();
}

void ParameterStore::fill(double value) {
  for (auto& e : entries_) {
    auto v = e.second.mutable_values();
    std::fill(v.begin(), v.end(), value);
  }
}

Tensor Mode::drop(const Tensor& x) const {
  if (!training() || dropout <= 0.0) return x;
  return nn::dropout(x, dropout, *rng, true);
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight(store.add_uniform(name + ".weight", {in, out}, in, rng)),
      bias(store.add_uniform(name + ".bias", {out}, in, rng)) {}

Tensor Linear::operator()(const Tensor& x) const { return add_bias(matmul(x, weight), bias); }

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t width)
    : gamma(store.add_constant(name + ".gamma", {width}, 1.0)), beta(store.add_constant(name + ".beta", {width}, 0.0)) {}

Tensor LayerNorm::operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }

FeedForward::FeedForward(ParameterStore& store, const std::string& name, std::size_t width, std::size_t hidden,
                         Rng& rng)
    : norm(store, name + ".norm", width), up(store, name + ".up", width, hidden, rng),
      down(store, name + ".down", hidden, width, rng) {}

Tensor FeedForward::operator()(const Tensor& x, const Mode& mode) const {
  return add(x, mode.drop(down(relu(up(norm(x))))));
}

GruDirection::GruDirection(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden,
                           Rng& rng)
    : w_x(store.add_uniform(name + ".w_x", {in, 3 * hidden}, hidden, rng)),
      w_h(store.add_uniform(name + ".w_h", {hidden, 3 * hidden}, hidden, rng)),
      b_x(store.add_uniform(name + ".b_x", {3 * hidden}, hidden, rng)),
      b_h(store.add_uniform(name + ".b_h", {3 * hidden}, hidden, rng)) {}

Tensor GruDirection::operator()(const Tensor& x, bool reverse) const {
  return gru_sequence(x, w_x, w_h, b_x, b_h, reverse);
}

BiGruLayer::BiGruLayer(ParameterStore& store, const std::string& name, std::size_t width, Rng& rng)
    : forward(store, name + ".fwd", width, width, rng), backward(store, name + ".bwd", width, width, rng),
      project(store, name + ".proj", 2 * width, width, rng) {}

Tensor BiGruLayer::operator()(const Tensor& x, const Mode& mode) const {
  Tensor both = concat({forward(x, false), backward(x, true)});
  return mode.drop(project(both));
}

TransformerLayer::TransformerLayer(ParameterStore& store, const std::string& name, std::size_t width,
                                   std::size_t num_heads, std::size_t ffn_hidden, Rng& rng)
    : norm(store, name + ".norm", width), query(store, name + ".q", width, width, rng),
      key(store, name + ".k", width, width, rng), value(store, name + ".v", width, width, rng),
      output(store, name + ".o", width, width, rng), ffn(store, name + ".ffn", width, ffn_hidden, rng),
      heads(num_heads) {
  if (num_heads == 0 || width % num_heads != 0) {
    throw InvalidConfig("width " + std::to_string(width) + " is not divisible by " + std::to_string(num_heads) +
                        " heads");
  }
}

Tensor TransformerLayer::operator()(const Tensor& x, const Mode& mode, std::vector<Tensor>* attention) const {
  const Tensor h = norm(x);
  const Tensor q = query(h), k = key(h), v = value(h);
  const std::size_t width = x.dim(1), dk = width / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t i = 0; i < heads; ++i) {
    const std::size_t b = i * dk, e = b + dk;
    Tensor weights = softmax(scale(matmul_nt(slice_cols(q, b, e), slice_cols(k, b, e)), inv));
    if (attention) attention->push_back(weights);
    outs.push_back(matmul(weights, slice_cols(v, b, e)));
  }
  Tensor mixed = heads == 1 ? outs.front() : concat(outs);
  Tensor y = add(x, mode.drop(output(mixed)));
  return ffn(y, mode);
}

}  // namespace argmine::nn
