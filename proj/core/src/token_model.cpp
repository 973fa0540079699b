#include "argmine/token_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "argmine/checkpoint.hpp"
#include "argmine/embedding.hpp"
#include "argmine/error.hpp"

namespace argmine {

using nn::Tensor;

std::vector<std::string> augment(std::vector<std::string> tokens, double p_aug, double ratio, AugmentKind kind,
                                 Rng& rng) {
  if (tokens.empty() || p_aug <= 0.0 || !rng.bernoulli(p_aug)) return tokens;
  const std::size_t len = tokens.size();
  const auto count = std::min(len, static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(len))));
  std::vector<std::size_t> order(len);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) std::swap(order[i], order[i + rng.index(len - i)]);
  std::vector<std::size_t> picked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));

  switch (kind) {
    case AugmentKind::Mask:
      for (std::size_t i : picked) tokens[i] = std::string(kMaskToken);
      break;
    case AugmentKind::Swap:
      if (len < 2) break;
      for (std::size_t i : picked) {
        std::size_t j = rng.index(len - 1);
        if (j >= i) ++j;
        std::swap(tokens[i], tokens[j]);
      }
      break;
    case AugmentKind::Repeat:
      std::sort(picked.rbegin(), picked.rend());
      for (std::size_t i : picked) tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens[i]);
      break;
  }
  return tokens;
}

TokenModel::TokenModel(TokenModelConfig config, TokenView view, std::uint64_t seed)
    : config_(config), view_(view) {
  if (config_.d == 0 || config_.heads == 0 || config_.d % config_.heads != 0) {
    throw InvalidConfig("token model width must be a positive multiple of heads");
  }
  if (config_.buckets == 0 || config_.max_tokens == 0) throw InvalidConfig("token model needs buckets and positions");
  Rng rng(seed);
  const std::size_t d = config_.d;
  tokens_ = store_.add_normal("tok.embed", {config_.buckets + 1, d}, 0.02, rng);  // last row: mask token
  positions_ = store_.add_normal("tok.pos", {config_.max_tokens, d}, 0.02, rng);
  encoder_ = nn::TransformerLayer(store_, "tok.layer", d, config_.heads, config_.ffn_multiplier * d, rng);
  hidden_ = nn::Linear(store_, "tok.hidden", d, d, rng);
  out_ = nn::Linear(store_, "tok.out", d, kNumComponentClasses, rng);
}

std::vector<std::string> TokenModel::tokenize(std::string_view text) const {
  auto t = view_ == TokenView::Char ? char_tokens(text) : word_tokens(text);
  if (t.size() > config_.max_tokens) t.resize(config_.max_tokens);
  return t;
}

std::size_t TokenModel::token_index(std::string_view token) const {
  if (token == kMaskToken) return config_.buckets;
  return static_cast<std::size_t>(fnv1a(token) % config_.buckets);
}

Tensor TokenModel::pool(const std::vector<std::string>& tokens, const nn::Mode& mode) const {
  if (tokens.empty()) throw InvalidDocument("token model needs at least one token");
  const std::size_t n = std::min(tokens.size(), config_.max_tokens);
  std::vector<std::size_t> ids(n), pos(n);
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = token_index(tokens[i]);
    pos[i] = i;
  }
  const Tensor h0 = nn::add(nn::embedding_lookup(tokens_, ids), nn::embedding_lookup(positions_, pos));
  const Tensor h1 = encoder_(mode.drop(h0), mode);
  return nn::reshape(nn::mean(nn::scale(nn::add(h0, h1), 0.5), 0), {1, config_.d});
}

Tensor TokenModel::forward(const std::vector<std::string>& tokens, const nn::Mode& mode) const {
  const Tensor s = pool(tokens, mode);
  return nn::softmax(out_(mode.drop(nn::relu(hidden_(s)))));
}

std::array<double, kNumComponentClasses> TokenModel::predict(std::string_view text) const {
  nn::NoGradGuard guard;
  auto tokens = tokenize(text);
  if (tokens.empty()) tokens.emplace_back(kMaskToken);
  const Tensor p = forward(tokens, {});
  return {p[0], p[1], p[2]};
}

void TokenModel::zero_head() {
  for (Tensor t : {out_.weight, out_.bias}) {
    auto v = t.mutable_values();
    std::fill(v.begin(), v.end(), 0.0);
  }
}

std::array<double, kNumComponentClasses> ensemble(const std::array<double, kNumComponentClasses>& a,
                                                  const std::array<double, kNumComponentClasses>& b) {
  std::array<double, kNumComponentClasses> out{};
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = (a[k] + b[k]) / 2.0;
  return out;
}

}  // namespace argmine
