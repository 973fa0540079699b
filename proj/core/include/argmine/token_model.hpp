#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "argmine/labels.hpp"
#include "argmine/layers.hpp"

namespace argmine {

enum class TokenView { Char, Word };
enum class AugmentKind { Mask, Swap, Repeat };

inline constexpr std::string_view kMaskToken = "[MASK]";

/// With probability p_aug, applies `kind` to ceil(ratio * len) distinct
/// positions. Mask replaces the token, Swap exchanges it with a uniformly
/// chosen other position, Repeat duplicates it in place.
std::vector<std::string> augment(std::vector<std::string> tokens, double p_aug, double ratio, AugmentKind kind,
                                 Rng& rng);

struct TokenModelConfig {
  std::size_t d = 64;
  std::size_t buckets = std::size_t{1} << 13;
  std::size_t max_tokens = 128;
  std::size_t heads = 4;
  std::size_t ffn_multiplier = 4;
  double dropout = 0.1;
  double p_aug = 0.3;
  double aug_ratio = 0.15;
};

/// Per-segment classifier over a single token view: trainable hashed token
/// embeddings plus positions, one self-attention layer, First-Last-Avg
/// pooling and a two-layer perceptron. Style marks are not used.
class TokenModel {
 public:
  TokenModel(TokenModelConfig config, TokenView view, std::uint64_t seed);
  TokenModel(const TokenModel&) = delete;
  TokenModel& operator=(const TokenModel&) = delete;
  TokenModel(TokenModel&&) = default;
  TokenModel& operator=(TokenModel&&) = default;

  const TokenModelConfig& config() const { return config_; }
  TokenView view() const { return view_; }
  nn::ParameterStore& parameters() { return store_; }

  std::vector<std::string> tokenize(std::string_view text) const;
  std::size_t token_index(std::string_view token) const;

  /// First-Last-Avg sentence vector [1, d]: token mean of (h0 + h1) / 2.
  nn::Tensor pool(const std::vector<std::string>& tokens, const nn::Mode& mode) const;
  /// Class probabilities [1, 3]. Throws InvalidDocument on an empty list.
  nn::Tensor forward(const std::vector<std::string>& tokens, const nn::Mode& mode) const;
  std::array<double, kNumComponentClasses> predict(std::string_view text) const;

  /// Zeroes the output layer so every prediction is uniform.
  void zero_head();

 private:
  TokenModelConfig config_;
  TokenView view_;
  nn::ParameterStore store_;
  nn::Tensor tokens_, positions_;
  nn::TransformerLayer encoder_;
  nn::Linear hidden_, out_;
};

/// Arithmetic mean of the char and word stream probabilities.
std::array<double, kNumComponentClasses> ensemble(const std::array<double, kNumComponentClasses>& a,
                                                  const std::array<double, kNumComponentClasses>& b);

}  // namespace argmine
