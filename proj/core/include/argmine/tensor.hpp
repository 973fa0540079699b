#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

#include "argmine/random.hpp"

namespace argmine::nn {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

namespace detail {

// Storage with a fixed 64-byte alignment. Vectorised reductions peel a
// prefix up to the first aligned element, so under malloc's 16-byte
// guarantee the summation order (and the last bit) would depend on where
// the heap happened to place a buffer.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

struct Impl;

struct Node {
  std::vector<std::shared_ptr<Impl>> inputs;
  // Reads the output gradient and accumulates into the inputs' gradients.
  std::function<void(const Impl& out)> backward;
};

struct Impl {
  Shape shape;
  Buffer value;
  Buffer grad;  // empty until a gradient reaches this tensor
  bool requires_grad = false;
  std::shared_ptr<Node> node;

  Buffer& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major tensor of doubles with reverse-mode gradient tracking.
/// Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const { return shape().at(axis); }
  std::size_t numel() const;
  /// Leading extent for 2-D tensors, 1 for vectors.
  std::size_t rows() const;
  /// Trailing extent.
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Same values, no history, no gradient.
  Tensor detach() const;
  Tensor clone() const;

  detail::Impl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::Impl>& handle() const { return impl_; }

  static Tensor make_result(Shape shape, detail::Buffer values, std::vector<Tensor> inputs,
                            std::function<void(const detail::Impl& out)> backward);

 private:
  static Tensor adopt(Shape shape, detail::Buffer values, bool requires_grad);
  explicit Tensor(std::shared_ptr<detail::Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<detail::Impl> impl_;
};

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

/// Populates gradients of every leaf reachable from `loss` (must hold one
/// value), then frees the graph.
void backward(const Tensor& loss);

// Primitive operations. Each registers its backward rule when any input
// requires a gradient. Shape errors throw ShapeMismatch naming both shapes.

Tensor matmul(const Tensor& a, const Tensor& b);     // [m,k]x[k,n] or [m,k]x[k]
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // [m,k]x[n,k]^T
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Adds `bias` ([n] or [1]) to every row of `x`.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
/// Concatenation along the last axis of 2-D tensors with equal row counts.
Tensor concat(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
/// Softmax over the last axis.
Tensor softmax(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> indices);
/// Inverted dropout; identity when `training` is false or p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);
/// Mean of a 2-D tensor along `axis` (0: over rows, 1: over columns).
Tensor mean(const Tensor& x, std::size_t axis);
Tensor sum(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

/// -sum_i log(max(p[i, target_i], clamp)).
Tensor nll_loss(const Tensor& probs, std::span<const std::size_t> targets, double clamp = 1e-12);
/// -sum_i (t_i log c_i + (1 - t_i) log(1 - c_i)), logs clamped at `clamp`.
Tensor binary_cross_entropy(const Tensor& probs, std::span<const double> targets, double clamp = 1e-12);

/// Pairwise logits L[i*n+j] = W^T [s_i + d_j ; s_i * d_j] + b with W [2d, K].
Tensor pairwise_mul_add(const Tensor& src, const Tensor& dst, const Tensor& weight, const Tensor& bias);
/// Pairwise logits L[i*n+j, k] = [s_i;1]^T U_k [d_j;1] + b_k with U [(d+1), K, (d+1)].
Tensor pairwise_biaffine(const Tensor& src, const Tensor& dst, const Tensor& u, const Tensor& bias);

/// One GRU direction over a sequence. x [n, in], w_x [in, 3h], w_h [h, 3h],
/// b_x, b_h [3h]; gate blocks ordered reset, update, candidate. Zero initial state.
Tensor gru_sequence(const Tensor& x, const Tensor& w_x, const Tensor& w_h, const Tensor& b_x, const Tensor& b_h,
                    bool reverse);

}  // namespace argmine::nn
