#include "argmine/embedding.hpp"

#include <cmath>

#include "argmine/checkpoint.hpp"
#include "argmine/error.hpp"
#include "argmine/random.hpp"
#include "argmine/utf8.hpp"

namespace argmine {

HashEmbedder::HashEmbedder(HashEmbedderConfig config) : config_(config) {
  if (config_.buckets == 0 || config_.width == 0) throw InvalidConfig("hash embedder needs buckets and width > 0");
}

std::size_t HashEmbedder::bucket(std::string_view token) const {
  return static_cast<std::size_t>(mix64(fnv1a(token) ^ config_.seed) % config_.buckets);
}

void HashEmbedder::accumulate(std::size_t bucket, std::span<double> out) const {
  // Uniform on [-sqrt 3, sqrt 3]: zero mean, unit variance per coordinate.
  static const double kScale = 2.0 * std::sqrt(3.0) / 9007199254740992.0;  // 2 sqrt3 / 2^53
  const std::uint64_t base = mix64(config_.seed + 0x9E3779B97F4A7C15ULL * (bucket + 1));
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::uint64_t r = mix64(base ^ (k * 0xD1B54A32D192ED03ULL));
    out[k] += static_cast<double>(r >> 11) * kScale - std::sqrt(3.0);
  }
}

std::vector<double> HashEmbedder::mean(std::span<const std::string> tokens) const {
  std::vector<double> out(config_.width, 0.0);
  if (tokens.empty()) return out;
  for (const std::string& t : tokens) accumulate(bucket(t), out);
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& v : out) v *= inv;
  return out;
}

bool is_cjk(char32_t c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0xF900 && c <= 0xFAFF) ||
         (c >= 0x20000 && c <= 0x2A6DF);
}

std::vector<std::string> char_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (char32_t c : utf8::decode(text)) {
    if (utf8::is_space(c)) continue;
    std::string s;
    utf8::append(s, c);
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

bool is_word_char(char32_t c) {
  return (c >= U'a' && c <= U'z') || (c >= U'A' && c <= U'Z') || (c >= U'0' && c <= U'9') || c == U'_';
}

}  // namespace

std::vector<std::string> word_tokens(std::string_view text) {
  const std::u32string cps = utf8::decode(text);
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < cps.size()) {
    const char32_t c = cps[i];
    if (utf8::is_space(c)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    if (is_cjk(c)) {
      if (j < cps.size() && is_cjk(cps[j])) ++j;
    } else if (is_word_char(c)) {
      while (j < cps.size() && is_word_char(cps[j])) ++j;
    }
    out.push_back(utf8::encode(std::u32string_view(cps).substr(i, j - i)));
    i = j;
  }
  return out;
}

}  // namespace argmine
