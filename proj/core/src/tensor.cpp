#include "argmine/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include <Eigen/Dense>

#include "argmine/error.hpp"

namespace argmine::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using CMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using CVecMap = Eigen::Map<const Eigen::VectorXd>;
using detail::Buffer;

thread_local bool g_grad_enabled = true;

CMatMap cmat(const Buffer& v, std::size_t r, std::size_t c) {
  return CMatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MatMap mat(Buffer& v, std::size_t r, std::size_t c) {
  return MatMap(v.data(), static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
CVecMap cvec(const Buffer& v) { return CVecMap(v.data(), static_cast<Eigen::Index>(v.size())); }
VecMap vec(Buffer& v) { return VecMap(v.data(), static_cast<Eigen::Index>(v.size())); }

std::size_t product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void mismatch(std::string_view op, const Tensor& a, const Tensor& b) {
  throw ShapeMismatch(std::string(op) + ": shapes " + to_string(a.shape()) + " and " + to_string(b.shape()) +
                      " are incompatible");
}

void require_2d(std::string_view op, const Tensor& a) {
  if (a.ndim() != 2) throw ShapeMismatch(std::string(op) + ": expected a 2-D tensor, got " + to_string(a.shape()));
}

void require_same(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) mismatch(op, a, b);
}

// Applies an elementwise map whose derivative is expressed through the output.
template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D dfdy) {
  Buffer out(a.numel());
  const auto in = a.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  auto* A = a.impl();
  return Tensor::make_result(a.shape(), std::move(out), {a}, [A, dfdy](const detail::Impl& o) {
    if (!A->requires_grad) return;
    auto& g = A->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * dfdy(A->value[i], o.value[i]);
  });
}

}  // namespace

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = product(shape);
  return adopt(std::move(shape), Buffer(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  return adopt(std::move(shape), Buffer(values.begin(), values.end()), requires_grad);
}

Tensor Tensor::adopt(Shape shape, Buffer values, bool requires_grad) {
  if (product(shape) != values.size()) {
    throw ShapeMismatch("shape " + to_string(shape) + " needs " + std::to_string(product(shape)) + " values, got " +
                        std::to_string(values.size()));
  }
  auto impl = std::make_shared<detail::Impl>();
  impl->shape = std::move(shape);
  impl->value = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::numel() const { return impl_->value.size(); }
std::size_t Tensor::rows() const { return ndim() >= 2 ? product(Shape(shape().begin(), shape().end() - 1)) : 1; }
std::size_t Tensor::cols() const { return ndim() == 0 ? 1 : shape().back(); }
std::span<const double> Tensor::values() const { return impl_->value; }
std::span<double> Tensor::mutable_values() { return impl_->value; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeMismatch("item() on tensor of shape " + to_string(shape()));
  return impl_->value[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
void Tensor::set_requires_grad(bool on) { impl_->requires_grad = on; }
bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }
std::span<const double> Tensor::grad() const { return impl_->grad; }
std::span<double> Tensor::mutable_grad() { return impl_->ensure_grad(); }
void Tensor::zero_grad() {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return adopt(shape(), impl_->value, false); }

Tensor Tensor::clone() const {
  Tensor t = adopt(shape(), impl_->value, impl_->requires_grad);
  t.impl_->grad = impl_->grad;
  return t;
}

Tensor Tensor::make_result(Shape shape, Buffer values, std::vector<Tensor> inputs,
                           std::function<void(const detail::Impl& out)> backward) {
  Tensor out = adopt(std::move(shape), std::move(values), false);
  if (!g_grad_enabled) return out;
  const bool tracked = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (!tracked) return out;
  auto node = std::make_shared<detail::Node>();
  node->inputs.reserve(inputs.size());
  for (Tensor& t : inputs) node->inputs.push_back(t.impl_);
  node->backward = std::move(backward);
  out.impl_->node = std::move(node);
  out.impl_->requires_grad = true;
  return out;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw NonScalarLoss("backward() needs a single-value loss, got shape " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Impl*> order;
  std::unordered_set<detail::Impl*> seen;
  std::vector<std::pair<detail::Impl*, std::size_t>> stack;
  stack.emplace_back(loss.impl(), 0);
  seen.insert(loss.impl());
  while (!stack.empty()) {
    auto& [impl, next] = stack.back();
    if (impl->node && next < impl->node->inputs.size()) {
      detail::Impl* child = impl->node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
      continue;
    }
    order.push_back(impl);
    stack.pop_back();
  }
  loss.impl()->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Impl* impl = *it;
    if (!impl->node) continue;
    if (!impl->grad.empty()) impl->node->backward(*impl);
  }
  for (detail::Impl* impl : order) {
    if (impl->node) {
      impl->node.reset();
      impl->grad.clear();
      impl->grad.shrink_to_fit();
    }
  }
}

// ---- primitives -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d("matmul", a);
  const std::size_t m = a.dim(0), k = a.dim(1);
  const bool vector_rhs = b.ndim() == 1;
  if (b.ndim() > 2 || b.dim(0) != k) mismatch("matmul", a, b);
  const std::size_t n = vector_rhs ? 1 : b.dim(1);
  auto* A = a.impl();
  auto* B = b.impl();
  Buffer out(m * n);
  mat(out, m, n).noalias() = cmat(A->value, m, k) * cmat(B->value, k, n);
  Shape shape = vector_rhs ? Shape{m} : Shape{m, n};
  return Tensor::make_result(std::move(shape), std::move(out), {a, b}, [A, B, m, k, n](const detail::Impl& o) {
    const auto G = cmat(o.grad, m, n);
    if (A->requires_grad) mat(A->ensure_grad(), m, k).noalias() += G * cmat(B->value, k, n).transpose();
    if (B->requires_grad) mat(B->ensure_grad(), k, n).noalias() += cmat(A->value, m, k).transpose() * G;
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_2d("matmul_nt", a);
  require_2d("matmul_nt", b);
  if (a.dim(1) != b.dim(1)) mismatch("matmul_nt", a, b);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  auto* A = a.impl();
  auto* B = b.impl();
  Buffer out(m * n);
  mat(out, m, n).noalias() = cmat(A->value, m, k) * cmat(B->value, n, k).transpose();
  return Tensor::make_result({m, n}, std::move(out), {a, b}, [A, B, m, k, n](const detail::Impl& o) {
    const auto G = cmat(o.grad, m, n);
    if (A->requires_grad) mat(A->ensure_grad(), m, k).noalias() += G * cmat(B->value, n, k);
    if (B->requires_grad) mat(B->ensure_grad(), n, k).noalias() += G.transpose() * cmat(A->value, m, k);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same("add", a, b);
  Buffer out(a.numel());
  vec(out) = cvec(a.impl()->value) + cvec(b.impl()->value);
  auto* A = a.impl();
  auto* B = b.impl();
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [A, B](const detail::Impl& o) {
    if (A->requires_grad) vec(A->ensure_grad()) += cvec(o.grad);
    if (B->requires_grad) vec(B->ensure_grad()) += cvec(o.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same("sub", a, b);
  Buffer out(a.numel());
  vec(out) = cvec(a.impl()->value) - cvec(b.impl()->value);
  auto* A = a.impl();
  auto* B = b.impl();
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [A, B](const detail::Impl& o) {
    if (A->requires_grad) vec(A->ensure_grad()) += cvec(o.grad);
    if (B->requires_grad) vec(B->ensure_grad()) -= cvec(o.grad);
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  const std::size_t c = x.cols();
  const std::size_t r = x.numel() / std::max<std::size_t>(c, 1);
  const bool scalar = bias.numel() == 1 && c != 1;
  if (bias.ndim() != 1 || (!scalar && bias.numel() != c)) mismatch("add_bias", x, bias);
  auto* X = x.impl();
  auto* B = bias.impl();
  Buffer out = X->value;
  if (scalar) {
    for (double& v : out) v += B->value[0];
  } else {
    mat(out, r, c).rowwise() += cvec(B->value).transpose();
  }
  return Tensor::make_result(x.shape(), std::move(out), {x, bias}, [X, B, r, c, scalar](const detail::Impl& o) {
    if (X->requires_grad) vec(X->ensure_grad()) += cvec(o.grad);
    if (!B->requires_grad) return;
    if (scalar) {
      B->ensure_grad()[0] += cvec(o.grad).sum();
    } else {
      vec(B->ensure_grad()) += cmat(o.grad, r, c).colwise().sum().transpose();
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same("mul", a, b);
  auto* A = a.impl();
  auto* B = b.impl();
  Buffer out(a.numel());
  vec(out) = cvec(A->value).cwiseProduct(cvec(B->value));
  return Tensor::make_result(a.shape(), std::move(out), {a, b}, [A, B](const detail::Impl& o) {
    if (A->requires_grad) vec(A->ensure_grad()) += cvec(o.grad).cwiseProduct(cvec(B->value));
    if (B->requires_grad) vec(B->ensure_grad()) += cvec(o.grad).cwiseProduct(cvec(A->value));
  });
}

Tensor scale(const Tensor& a, double s) {
  auto* A = a.impl();
  Buffer out(a.numel());
  vec(out) = cvec(A->value) * s;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [A, s](const detail::Impl& o) {
    if (A->requires_grad) vec(A->ensure_grad()) += cvec(o.grad) * s;
  });
}

Tensor add_scalar(const Tensor& a, double s) {
  auto* A = a.impl();
  Buffer out(a.numel());
  vec(out) = cvec(A->value).array() + s;
  return Tensor::make_result(a.shape(), std::move(out), {a}, [A](const detail::Impl& o) {
    if (A->requires_grad) vec(A->ensure_grad()) += cvec(o.grad);
  });
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat: no inputs");
  for (const Tensor& p : parts) require_2d("concat", p);
  const std::size_t r = parts.front().dim(0);
  std::size_t total = 0;
  std::vector<std::size_t> offsets;
  for (const Tensor& p : parts) {
    if (p.dim(0) != r) mismatch("concat", parts.front(), p);
    offsets.push_back(total);
    total += p.dim(1);
  }
  Buffer out(r * total);
  auto O = mat(out, r, total);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t c = parts[k].dim(1);
    O.middleCols(static_cast<Eigen::Index>(offsets[k]), static_cast<Eigen::Index>(c)) =
        cmat(parts[k].impl()->value, r, c);
  }
  std::vector<detail::Impl*> ins;
  for (const Tensor& p : parts) ins.push_back(p.impl());
  return Tensor::make_result({r, total}, std::move(out), parts, [ins, offsets, r, total](const detail::Impl& o) {
    const auto G = cmat(o.grad, r, total);
    for (std::size_t k = 0; k < ins.size(); ++k) {
      if (!ins[k]->requires_grad) continue;
      const std::size_t c = ins[k]->shape[1];
      mat(ins[k]->ensure_grad(), r, c) +=
          G.middleCols(static_cast<Eigen::Index>(offsets[k]), static_cast<Eigen::Index>(c));
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  require_2d("slice_cols", a);
  if (begin >= end || end > a.dim(1)) {
    throw ShapeMismatch("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                        ") outside " + to_string(a.shape()));
  }
  const std::size_t r = a.dim(0), c = a.dim(1), w = end - begin;
  auto* A = a.impl();
  Buffer out(r * w);
  mat(out, r, w) = cmat(A->value, r, c).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(w));
  return Tensor::make_result({r, w}, std::move(out), {a}, [A, r, c, w, begin](const detail::Impl& o) {
    if (!A->requires_grad) return;
    mat(A->ensure_grad(), r, c).middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(w)) +=
        cmat(o.grad, r, w);
  });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& a) {
  const std::size_t c = a.cols();
  const std::size_t r = a.numel() / c;
  auto* A = a.impl();
  Buffer out(a.numel());
  for (std::size_t i = 0; i < r; ++i) {
    const double* x = A->value.data() + i * c;
    double* y = out.data() + i * c;
    const double mx = *std::max_element(x, x + c);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) z += (y[k] = std::exp(x[k] - mx));
    for (std::size_t k = 0; k < c; ++k) y[k] /= z;
  }
  return Tensor::make_result(a.shape(), std::move(out), {a}, [A, r, c](const detail::Impl& o) {
    if (!A->requires_grad) return;
    auto& g = A->ensure_grad();
    for (std::size_t i = 0; i < r; ++i) {
      const double* y = o.value.data() + i * c;
      const double* gy = o.grad.data() + i * c;
      double dot = 0.0;
      for (std::size_t k = 0; k < c; ++k) dot += gy[k] * y[k];
      for (std::size_t k = 0; k < c; ++k) g[i * c + k] += y[k] * (gy[k] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t c = x.cols();
  const std::size_t r = x.numel() / c;
  if (gamma.numel() != c || beta.numel() != c) mismatch("layer_norm", x, gamma);
  auto* X = x.impl();
  auto* Gm = gamma.impl();
  auto* Bt = beta.impl();
  Buffer out(x.numel());
  auto xhat = std::make_shared<Buffer>(x.numel());
  auto inv_std = std::make_shared<Buffer>(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* xi = X->value.data() + i * c;
    double mu = 0.0;
    for (std::size_t k = 0; k < c; ++k) mu += xi[k];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t k = 0; k < c; ++k) var += (xi[k] - mu) * (xi[k] - mu);
    var /= static_cast<double>(c);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = is;
    for (std::size_t k = 0; k < c; ++k) {
      const double h = (xi[k] - mu) * is;
      (*xhat)[i * c + k] = h;
      out[i * c + k] = Gm->value[k] * h + Bt->value[k];
    }
  }
  return Tensor::make_result(x.shape(), std::move(out), {x, gamma, beta},
                             [X, Gm, Bt, xhat, inv_std, r, c](const detail::Impl& o) {
                               if (Gm->requires_grad) {
                                 auto& gg = Gm->ensure_grad();
                                 for (std::size_t i = 0; i < r; ++i)
                                   for (std::size_t k = 0; k < c; ++k) gg[k] += o.grad[i * c + k] * (*xhat)[i * c + k];
                               }
                               if (Bt->requires_grad) {
                                 auto& gb = Bt->ensure_grad();
                                 for (std::size_t i = 0; i < r; ++i)
                                   for (std::size_t k = 0; k < c; ++k) gb[k] += o.grad[i * c + k];
                               }
                               if (!X->requires_grad) return;
                               auto& gx = X->ensure_grad();
                               Buffer dh(c);
                               for (std::size_t i = 0; i < r; ++i) {
                                 double m1 = 0.0, m2 = 0.0;
                                 for (std::size_t k = 0; k < c; ++k) {
                                   dh[k] = o.grad[i * c + k] * Gm->value[k];
                                   m1 += dh[k];
                                   m2 += dh[k] * (*xhat)[i * c + k];
                                 }
                                 m1 /= static_cast<double>(c);
                                 m2 /= static_cast<double>(c);
                                 for (std::size_t k = 0; k < c; ++k) {
                                   gx[i * c + k] += (*inv_std)[i] * (dh[k] - m1 - (*xhat)[i * c + k] * m2);
                                 }
                               }
                             });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> indices) {
  require_2d("embedding_lookup", table);
  const std::size_t v = table.dim(0), d = table.dim(1);
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  for (std::size_t i : idx) {
    if (i >= v) throw IndexOutOfRange("embedding index " + std::to_string(i) + " >= " + std::to_string(v));
  }
  auto* T = table.impl();
  Buffer out(idx.size() * d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    std::copy_n(T->value.data() + idx[r] * d, d, out.data() + r * d);
  }
  return Tensor::make_result({idx.size(), d}, std::move(out), {table}, [T, idx, d](const detail::Impl& o) {
    if (!T->requires_grad) return;
    auto& g = T->ensure_grad();
    for (std::size_t r = 0; r < idx.size(); ++r) {
      for (std::size_t k = 0; k < d; ++k) g[idx[r] * d + k] += o.grad[r * d + k];
    }
  });
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) return scale(x, 0.0);
  const double keep = 1.0 / (1.0 - p);
  auto mask = std::make_shared<Buffer>(x.numel());
  for (double& m : *mask) m = rng.uniform() < p ? 0.0 : keep;
  auto* X = x.impl();
  Buffer out(x.numel());
  vec(out) = cvec(X->value).cwiseProduct(cvec(*mask));
  return Tensor::make_result(x.shape(), std::move(out), {x}, [X, mask](const detail::Impl& o) {
    if (X->requires_grad) vec(X->ensure_grad()) += cvec(o.grad).cwiseProduct(cvec(*mask));
  });
}

Tensor mean(const Tensor& x, std::size_t axis) {
  require_2d("mean", x);
  if (axis > 1) throw ShapeMismatch("mean: axis " + std::to_string(axis) + " on " + to_string(x.shape()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  auto* X = x.impl();
  const auto M = cmat(X->value, r, c);
  if (axis == 0) {
    Buffer out(c);
    vec(out) = M.colwise().mean().transpose();
    return Tensor::make_result({c}, std::move(out), {x}, [X, r, c](const detail::Impl& o) {
      if (X->requires_grad) mat(X->ensure_grad(), r, c).rowwise() += cvec(o.grad).transpose() / double(r);
    });
  }
  Buffer out(r);
  vec(out) = M.rowwise().mean();
  return Tensor::make_result({r}, std::move(out), {x}, [X, r, c](const detail::Impl& o) {
    if (X->requires_grad) mat(X->ensure_grad(), r, c).colwise() += cvec(o.grad) / double(c);
  });
}

Tensor sum(const Tensor& x) {
  auto* X = x.impl();
  return Tensor::make_result({1}, {cvec(X->value).sum()}, {x}, [X](const detail::Impl& o) {
    if (X->requires_grad) vec(X->ensure_grad()).array() += o.grad[0];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (product(shape) != x.numel()) {
    throw ShapeMismatch("reshape: " + to_string(x.shape()) + " to " + to_string(shape));
  }
  auto* X = x.impl();
  return Tensor::make_result(std::move(shape), X->value, {x}, [X](const detail::Impl& o) {
    if (X->requires_grad) vec(X->ensure_grad()) += cvec(o.grad);
  });
}

Tensor nll_loss(const Tensor& probs, std::span<const std::size_t> targets, double clamp) {
  const std::size_t c = probs.cols();
  const std::size_t r = probs.numel() / c;
  if (targets.size() != r) {
    throw ShapeMismatch("nll_loss: " + std::to_string(targets.size()) + " targets for " + to_string(probs.shape()));
  }
  std::vector<std::size_t> t(targets.begin(), targets.end());
  auto* P = probs.impl();
  double loss = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (t[i] >= c) throw IndexOutOfRange("nll_loss: target " + std::to_string(t[i]) + " >= " + std::to_string(c));
    loss -= std::log(std::max(P->value[i * c + t[i]], clamp));
  }
  return Tensor::make_result({1}, {loss}, {probs}, [P, t, c, clamp](const detail::Impl& o) {
    if (!P->requires_grad) return;
    auto& g = P->ensure_grad();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double p = P->value[i * c + t[i]];
      if (p > clamp) g[i * c + t[i]] -= o.grad[0] / p;
    }
  });
}

Tensor binary_cross_entropy(const Tensor& probs, std::span<const double> targets, double clamp) {
  if (targets.size() != probs.numel()) {
    throw ShapeMismatch("binary_cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                        to_string(probs.shape()));
  }
  Buffer t(targets.begin(), targets.end());
  auto* P = probs.impl();
  double loss = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double c = P->value[i];
    loss -= t[i] * std::log(std::max(c, clamp)) + (1.0 - t[i]) * std::log(std::max(1.0 - c, clamp));
  }
  return Tensor::make_result({1}, {loss}, {probs}, [P, t, clamp](const detail::Impl& o) {
    if (!P->requires_grad) return;
    auto& g = P->ensure_grad();
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double c = P->value[i];
      double d = 0.0;
      if (c > clamp) d -= t[i] / c;
      if (1.0 - c > clamp) d += (1.0 - t[i]) / (1.0 - c);
      g[i] += o.grad[0] * d;
    }
  });
}

// ---- fused pairwise heads -------------------------------------------------

Tensor pairwise_mul_add(const Tensor& src, const Tensor& dst, const Tensor& weight, const Tensor& bias) {
  require_2d("pairwise_mul_add", src);
  require_same("pairwise_mul_add", src, dst);
  const std::size_t n = src.dim(0), d = src.dim(1);
  if (weight.ndim() != 2 || weight.dim(0) != 2 * d) mismatch("pairwise_mul_add", src, weight);
  const std::size_t K = weight.dim(1);
  if (bias.numel() != K) mismatch("pairwise_mul_add", weight, bias);
  auto* S = src.impl();
  auto* D = dst.impl();
  auto* W = weight.impl();
  auto* B = bias.impl();
  const auto Sm = cmat(S->value, n, d);
  const auto Dm = cmat(D->value, n, d);
  const auto Wm = cmat(W->value, 2 * d, K);
  const RowMat w1 = Wm.topRows(static_cast<Eigen::Index>(d));
  const RowMat w2 = Wm.bottomRows(static_cast<Eigen::Index>(d));
  const RowMat s1 = Sm * w1;  // [n, K]
  const RowMat d1 = Dm * w1;
  Buffer out(n * n * K);
  for (std::size_t k = 0; k < K; ++k) {
    const RowMat prod = (Sm.array().rowwise() * w2.col(static_cast<Eigen::Index>(k)).transpose().array()).matrix() *
                        Dm.transpose();  // [n, n]
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        out[(i * n + j) * K + k] = prod(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +
                                   s1(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) +
                                   d1(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) + B->value[k];
      }
    }
  }
  return Tensor::make_result({n * n, K}, std::move(out), {src, dst, weight, bias},
                             [S, D, W, B, n, d, K](const detail::Impl& o) {
                               const auto Sm = cmat(S->value, n, d);
                               const auto Dm = cmat(D->value, n, d);
                               const auto Wm = cmat(W->value, 2 * d, K);
                               const auto w1 = Wm.topRows(static_cast<Eigen::Index>(d));
                               const auto w2 = Wm.bottomRows(static_cast<Eigen::Index>(d));
                               RowMat row_sum = RowMat::Zero(n, K);  // sum over j
                               RowMat col_sum = RowMat::Zero(n, K);  // sum over i
                               std::vector<RowMat> Gk(K, RowMat(n, n));
                               for (std::size_t i = 0; i < n; ++i) {
                                 for (std::size_t j = 0; j < n; ++j) {
                                   for (std::size_t k = 0; k < K; ++k) {
                                     const double g = o.grad[(i * n + j) * K + k];
                                     Gk[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g;
                                     row_sum(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) += g;
                                     col_sum(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) += g;
                                   }
                                 }
                               }
                               RowMat dS = row_sum * w1.transpose();
                               RowMat dD = col_sum * w1.transpose();
                               RowMat dW = RowMat::Zero(2 * d, K);
                               dW.topRows(static_cast<Eigen::Index>(d)) = Sm.transpose() * row_sum + Dm.transpose() * col_sum;
                               for (std::size_t k = 0; k < K; ++k) {
                                 const auto wk = w2.col(static_cast<Eigen::Index>(k)).transpose().array();
                                 const RowMat GD = Gk[k] * Dm;               // [n, d]
                                 const RowMat GtS = Gk[k].transpose() * Sm;  // [n, d]
                                 dS.array() += GD.array().rowwise() * wk;
                                 dD.array() += GtS.array().rowwise() * wk;
                                 dW.bottomRows(static_cast<Eigen::Index>(d)).col(static_cast<Eigen::Index>(k)) +=
                                     (Sm.array() * GD.array()).colwise().sum().transpose().matrix();
                               }
                               if (S->requires_grad) mat(S->ensure_grad(), n, d) += dS;
                               if (D->requires_grad) mat(D->ensure_grad(), n, d) += dD;
                               if (W->requires_grad) mat(W->ensure_grad(), 2 * d, K) += dW;
                               if (B->requires_grad) vec(B->ensure_grad()) += row_sum.colwise().sum().transpose();
                             });
}

Tensor pairwise_biaffine(const Tensor& src, const Tensor& dst, const Tensor& u, const Tensor& bias) {
  require_2d("pairwise_biaffine", src);
  require_same("pairwise_biaffine", src, dst);
  const std::size_t n = src.dim(0), d = src.dim(1), e = d + 1;
  if (u.ndim() != 3 || u.dim(0) != e || u.dim(2) != e) mismatch("pairwise_biaffine", src, u);
  const std::size_t K = u.dim(1);
  if (bias.numel() != K) mismatch("pairwise_biaffine", u, bias);
  auto* S = src.impl();
  auto* D = dst.impl();
  auto* U = u.impl();
  auto* B = bias.impl();
  auto s1 = std::make_shared<RowMat>(n, e);
  auto d1 = std::make_shared<RowMat>(n, e);
  s1->leftCols(static_cast<Eigen::Index>(d)) = cmat(S->value, n, d);
  s1->col(static_cast<Eigen::Index>(d)).setOnes();
  d1->leftCols(static_cast<Eigen::Index>(d)) = cmat(D->value, n, d);
  d1->col(static_cast<Eigen::Index>(d)).setOnes();
  // U viewed as [e, K*e]; T = [s;1] U gives, per class k, the block T_k [n, e].
  auto T = std::make_shared<RowMat>((*s1) * cmat(U->value, e, K * e));
  Buffer out(n * n * K);
  for (std::size_t k = 0; k < K; ++k) {
    const RowMat L = T->middleCols(static_cast<Eigen::Index>(k * e), static_cast<Eigen::Index>(e)) * d1->transpose();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        out[(i * n + j) * K + k] = L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) + B->value[k];
      }
    }
  }
  return Tensor::make_result(
      {n * n, K}, std::move(out), {src, dst, u, bias}, [S, D, U, B, s1, d1, T, n, d, e, K](const detail::Impl& o) {
        RowMat dT(n, K * e);
        RowMat dD1 = RowMat::Zero(n, e);
        RowMat Gk(n, n);
        Buffer db(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              const double g = o.grad[(i * n + j) * K + k];
              Gk(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = g;
              db[k] += g;
            }
          }
          dT.middleCols(static_cast<Eigen::Index>(k * e), static_cast<Eigen::Index>(e)) = Gk * (*d1);
          dD1 += Gk.transpose() * T->middleCols(static_cast<Eigen::Index>(k * e), static_cast<Eigen::Index>(e));
        }
        if (U->requires_grad) mat(U->ensure_grad(), e, K * e) += s1->transpose() * dT;
        if (S->requires_grad) {
          const RowMat dS1 = dT * cmat(U->value, e, K * e).transpose();
          mat(S->ensure_grad(), n, d) += dS1.leftCols(static_cast<Eigen::Index>(d));
        }
        if (D->requires_grad) mat(D->ensure_grad(), n, d) += dD1.leftCols(static_cast<Eigen::Index>(d));
        if (B->requires_grad) {
          auto& g = B->ensure_grad();
          for (std::size_t k = 0; k < K; ++k) g[k] += db[k];
        }
      });
}

// ---- recurrent ------------------------------------------------------------

Tensor gru_sequence(const Tensor& x, const Tensor& w_x, const Tensor& w_h, const Tensor& b_x, const Tensor& b_h,
                    bool reverse) {
  require_2d("gru_sequence", x);
  require_2d("gru_sequence", w_h);
  const std::size_t n = x.dim(0), in = x.dim(1), h = w_h.dim(0);
  if (w_h.dim(1) != 3 * h) mismatch("gru_sequence", w_h, w_x);
  if (w_x.ndim() != 2 || w_x.dim(0) != in || w_x.dim(1) != 3 * h) mismatch("gru_sequence", x, w_x);
  if (b_x.numel() != 3 * h || b_h.numel() != 3 * h) mismatch("gru_sequence", w_h, b_x);

  auto* X = x.impl();
  auto* Wx = w_x.impl();
  auto* Wh = w_h.impl();
  auto* Bx = b_x.impl();
  auto* Bh = b_h.impl();

  const auto eh = static_cast<Eigen::Index>(h);
  // Per-step caches, indexed by sequence position.
  auto gates = std::make_shared<RowMat>(n, 3 * h);  // r, z, candidate (post-activation)
  auto ghn = std::make_shared<RowMat>(n, h);        // recurrent part of the candidate pre-activation
  auto hprev = std::make_shared<RowMat>(n, h);
  RowMat gx = cmat(X->value, n, in) * cmat(Wx->value, in, 3 * h);
  gx.rowwise() += cvec(Bx->value).transpose();
  const auto WhM = cmat(Wh->value, h, 3 * h);
  const Eigen::RowVectorXd bh = cvec(Bh->value).transpose();

  Buffer out(n * h);
  auto H = mat(out, n, h);
  Eigen::RowVectorXd state = Eigen::RowVectorXd::Zero(eh);
  Eigen::RowVectorXd gh(3 * eh);
  for (std::size_t step = 0; step < n; ++step) {
    const auto t = static_cast<Eigen::Index>(reverse ? n - 1 - step : step);
    hprev->row(t) = state;
    gh.noalias() = state * WhM;
    gh += bh;
    auto g = gates->row(t);
    for (Eigen::Index k = 0; k < 2 * eh; ++k) {
      const double a = gx(t, k) + gh(k);
      g(k) = a >= 0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
    }
    for (Eigen::Index k = 0; k < eh; ++k) {
      (*ghn)(t, k) = gh(2 * eh + k);
      g(2 * eh + k) = std::tanh(gx(t, 2 * eh + k) + g(k) * gh(2 * eh + k));
      const double z = g(eh + k);
      state(k) = (1.0 - z) * g(2 * eh + k) + z * state(k);
    }
    H.row(t) = state;
  }

  return Tensor::make_result(
      {n, h}, std::move(out), {x, w_x, w_h, b_x, b_h},
      [X, Wx, Wh, Bx, Bh, gates, ghn, hprev, n, in, h, reverse](const detail::Impl& o) {
        const auto eh = static_cast<Eigen::Index>(h);
        const auto G = cmat(o.grad, n, h);
        const auto WhM = cmat(Wh->value, h, 3 * h);
        RowMat dgx(n, 3 * h);
        RowMat dgh(n, 3 * h);
        Eigen::RowVectorXd carry = Eigen::RowVectorXd::Zero(eh);
        for (std::size_t step = 0; step < n; ++step) {
          const auto t = static_cast<Eigen::Index>(reverse ? step : n - 1 - step);
          const auto g = gates->row(t);
          Eigen::RowVectorXd dh = G.row(t) + carry;
          Eigen::RowVectorXd dprev(eh);
          for (Eigen::Index k = 0; k < eh; ++k) {
            const double r = g(k), z = g(eh + k), c = g(2 * eh + k);
            const double dc = dh(k) * (1.0 - z) * (1.0 - c * c);
            const double dz = dh(k) * ((*hprev)(t, k) - c) * z * (1.0 - z);
            const double dr = dc * (*ghn)(t, k) * r * (1.0 - r);
            dgx(t, k) = dr;
            dgx(t, eh + k) = dz;
            dgx(t, 2 * eh + k) = dc;
            dgh(t, k) = dr;
            dgh(t, eh + k) = dz;
            dgh(t, 2 * eh + k) = dc * r;
            dprev(k) = dh(k) * z;
          }
          dprev.noalias() += dgh.row(t) * WhM.transpose();
          carry = dprev;
        }
        if (Wh->requires_grad) mat(Wh->ensure_grad(), h, 3 * h).noalias() += hprev->transpose() * dgh;
        if (Bh->requires_grad) vec(Bh->ensure_grad()) += dgh.colwise().sum().transpose();
        if (Wx->requires_grad) {
          mat(Wx->ensure_grad(), in, 3 * h).noalias() += cmat(X->value, n, in).transpose() * dgx;
        }
        if (Bx->requires_grad) vec(Bx->ensure_grad()) += dgx.colwise().sum().transpose();
        if (X->requires_grad) {
          mat(X->ensure_grad(), n, in).noalias() += dgx * cmat(Wx->value, in, 3 * h).transpose();
        }
      });
}

}  // namespace argmine::nn
