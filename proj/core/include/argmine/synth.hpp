#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/document.hpp"

namespace argmine {

/// Sampling priors of the synthetic corpus. Counts follow
///   claims   = 1 + Binomial(claim_trials, claim_p)       (<= 9)
///   premises = Binomial(premise_trials, premise_p) per claim (<= 4)
///   segments = 1 + Poisson(extra mean) per component
/// and noise segments ~ Poisson(noise_mean).
struct GeneratorPriors {
  int claim_trials = 8;
  double claim_p = 0.425;
  int premise_trials = 4;
  double premise_p = 0.265;
  double claim_extra_segments = 1.0;    // segments per claim ~ 2.0
  double premise_extra_segments = 2.2;  // segments per premise ~ 3.2
  double noise_segments = 6.0;
  double chars_per_segment = 22.5;
  /// Probability of each mark, in kMarkNames order.
  std::array<double, kNumMarks> style = {0.17, 0.10, 0.07, 0.01, 0.006, 0.005};
  /// Claim segments carry marks up to this many times more often.
  double claim_style_boost = 2.5;
  double interleave = 0.3;
  /// Chance that an argumentative segment carries its class and topic words.
  double signal = 0.8;
  double paragraph_break = 0.25;
  std::size_t max_segments = kDefaultMaxSegments;

  void validate() const;  // throws InvalidPriors
  nlohmann::json to_json() const;
};

/// Annotated documents with ids "synth-<seed>-<index>". Each document is
/// drawn from its own derived seed.
std::vector<Document> generate(std::size_t num_docs, const GeneratorPriors& priors, std::uint64_t seed);

/// HTML rendering whose markup reproduces each segment's marks when parsed
/// back. Blockquote and header segments become their own blocks, so
/// paragraph positions are not preserved.
std::string render_html(const Document& doc);

}  // namespace argmine
