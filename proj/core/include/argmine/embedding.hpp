#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace argmine {

/// Frozen stand-in for a pre-trained text encoder: every token hashes to a
/// bucket whose vector is generated from the seed on demand, never stored.
struct HashEmbedderConfig {
  std::size_t buckets = std::size_t{1} << 16;
  std::size_t width = 256;
  std::uint64_t seed = 0x6172676d696e65ULL;
};

class HashEmbedder {
 public:
  explicit HashEmbedder(HashEmbedderConfig config = {});

  const HashEmbedderConfig& config() const { return config_; }
  std::size_t bucket(std::string_view token) const;
  /// Adds the bucket's vector to `out` (length = width).
  void accumulate(std::size_t bucket, std::span<double> out) const;
  /// Mean of the token vectors; all zeros for an empty list.
  std::vector<double> mean(std::span<const std::string> tokens) const;

 private:
  HashEmbedderConfig config_;
};

/// Code points of `text`, whitespace removed.
std::vector<std::string> char_tokens(std::string_view text);

/// Whitespace-separated words. CJK runs are cut into greedy non-overlapping
/// bigrams (a trailing odd character stands alone), Latin letters and digits
/// group into one token, any other symbol is its own token.
std::vector<std::string> word_tokens(std::string_view text);

bool is_cjk(char32_t c);

}  // namespace argmine
