#include "argmine/synth.hpp"

#include <algorithm>
#include <cmath>

#include "argmine/error.hpp"
#include "argmine/random.hpp"
#include "argmine/utf8.hpp"

namespace argmine {

namespace {

// Fixed pseudo-word inventory shared by every corpus, so classes carry the
// same words across seeds.
constexpr std::size_t kClaimWords = 60;
constexpr std::size_t kPremiseWords = 60;
constexpr std::size_t kMajorWords = 12;
constexpr std::size_t kTopicWords = 300;
constexpr std::size_t kFillerWords = 400;

enum WordSet : std::size_t { kClaim = 0, kPremise = kClaimWords, kMajor = kPremise + kPremiseWords,
                             kTopic = kMajor + kMajorWords, kFiller = kTopic + kTopicWords };

std::string word(std::size_t id) {
  std::string s;
  utf8::append(s, static_cast<char32_t>(0x4E00 + id));
  utf8::append(s, static_cast<char32_t>(0x6000 + (id * 37) % 4096));
  return s;
}

struct Unit {
  int component;  // -1 for noise
  std::size_t segments;
};

}  // namespace

void GeneratorPriors::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidPriors(std::string(name) + " must lie in [0, 1]");
  };
  prob(claim_p, "claim_p");
  prob(premise_p, "premise_p");
  prob(interleave, "interleave");
  prob(signal, "signal");
  prob(paragraph_break, "paragraph_break");
  for (std::size_t k = 0; k < kNumMarks; ++k) prob(style[k], "style frequency");
  if (claim_trials < 0 || claim_trials + 1 > static_cast<int>(kMaxClaims)) {
    throw InvalidPriors("claim_trials must lie in 0..8");
  }
  if (premise_trials < 0 || premise_trials > static_cast<int>(kMaxPremisesPerClaim)) {
    throw InvalidPriors("premise_trials must lie in 0..4");
  }
  if (claim_extra_segments < 0 || premise_extra_segments < 0 || noise_segments < 0) {
    throw InvalidPriors("segment means must be non-negative");
  }
  if (chars_per_segment < 3) throw InvalidPriors("chars_per_segment must be at least 3");
  if (claim_style_boost < 1) throw InvalidPriors("claim_style_boost must be >= 1");
  if (max_segments == 0) throw InvalidPriors("max_segments must be positive");
}

nlohmann::json GeneratorPriors::to_json() const {
  return {{"claim_trials", claim_trials},
          {"claim_p", claim_p},
          {"premise_trials", premise_trials},
          {"premise_p", premise_p},
          {"claim_extra_segments", claim_extra_segments},
          {"premise_extra_segments", premise_extra_segments},
          {"noise_segments", noise_segments},
          {"chars_per_segment", chars_per_segment},
          {"style", style},
          {"claim_style_boost", claim_style_boost},
          {"interleave", interleave},
          {"signal", signal},
          {"paragraph_break", paragraph_break},
          {"max_segments", max_segments}};
}

namespace {

Document generate_one(const GeneratorPriors& pr, std::uint64_t seed, std::string doc_id) {
  Rng rng(seed);
  // Forest: claims, then premises with their parent claim.
  std::vector<ComponentKind> kind;
  std::vector<int> parent;
  std::vector<std::size_t> seg_count;
  std::vector<std::size_t> topic;
  std::vector<Unit> units;
  std::size_t total = 0;
  for (int attempt = 0;; ++attempt) {
    kind.clear();
    parent.clear();
    seg_count.clear();
    units.clear();
    const int claims = 1 + rng.binomial(pr.claim_trials, pr.claim_p);
    std::vector<std::vector<int>> premises(static_cast<std::size_t>(claims));
    for (int c = 0; c < claims; ++c) {
      kind.push_back(ComponentKind::Claim);
      parent.push_back(-1);
      seg_count.push_back(1 + static_cast<std::size_t>(rng.poisson(pr.claim_extra_segments)));
    }
    for (int c = 0; c < claims; ++c) {
      const int np = rng.binomial(pr.premise_trials, pr.premise_p);
      for (int p = 0; p < np; ++p) {
        premises[static_cast<std::size_t>(c)].push_back(static_cast<int>(kind.size()));
        kind.push_back(ComponentKind::Premise);
        parent.push_back(c);
        seg_count.push_back(1 + static_cast<std::size_t>(rng.poisson(pr.premise_extra_segments)));
      }
    }
    // Each claim block is followed by its premises; noise goes between blocks.
    for (int c = 0; c < claims; ++c) {
      units.push_back({c, seg_count[static_cast<std::size_t>(c)]});
      for (int p : premises[static_cast<std::size_t>(c)]) units.push_back({p, seg_count[static_cast<std::size_t>(p)]});
    }
    const int noise = rng.poisson(pr.noise_segments);
    for (int k = 0; k < noise; ++k) {
      const std::size_t at = rng.index(units.size() + 1);
      units.insert(units.begin() + static_cast<std::ptrdiff_t>(at), Unit{-1, 1});
    }
    total = 0;
    for (const Unit& u : units) total += u.segments;
    if (total <= pr.max_segments) break;
    if (attempt > 100) throw InvalidPriors("priors cannot produce documents within max_segments");
  }

  std::vector<int> owner;
  for (const Unit& u : units) owner.insert(owner.end(), u.segments, u.component);
  if (pr.interleave > 0.0) {
    for (std::size_t i = 0; i + 1 < owner.size(); ++i) {
      if (owner[i] != owner[i + 1] && rng.bernoulli(pr.interleave)) std::swap(owner[i], owner[i + 1]);
    }
  }

  const std::size_t nc = kind.size();
  const std::size_t claims = static_cast<std::size_t>(std::count(kind.begin(), kind.end(), ComponentKind::Claim));
  const std::size_t major = rng.index(claims);
  topic.resize(nc);
  for (std::size_t c = 0; c < nc; ++c) topic[c] = rng.index(kTopicWords);

  // Per-document style rates: claim segments are boosted, the rest rescaled
  // so the expected share of marked segments equals the prior.
  const double n = static_cast<double>(total);
  double claim_segs = 0;
  for (int o : owner) claim_segs += (o >= 0 && kind[static_cast<std::size_t>(o)] == ComponentKind::Claim);
  std::array<double, kNumMarks> claim_rate{}, other_rate{};
  for (std::size_t k = 0; k < kNumMarks; ++k) {
    const double p = pr.style[k];
    if (claim_segs >= n) {
      claim_rate[k] = other_rate[k] = p;
      continue;
    }
    claim_rate[k] = std::min({pr.claim_style_boost * p, n * p / claim_segs, 1.0});
    other_rate[k] = std::clamp((n * p - claim_segs * claim_rate[k]) / (n - claim_segs), 0.0, 1.0);
  }

  const double words_mean = std::max(1.0, (pr.chars_per_segment - 1.0) / 2.0);
  std::vector<Segment> segments;
  std::vector<std::vector<std::size_t>> members(nc);
  std::size_t para = 0;
  for (std::size_t i = 0; i < owner.size(); ++i) {
    const int o = owner[i];
    const std::size_t words = 1 + static_cast<std::size_t>(rng.poisson(words_mean - 1.0));
    std::vector<std::size_t> ids;
    if (o >= 0 && rng.bernoulli(pr.signal)) {
      const auto c = static_cast<std::size_t>(o);
      const bool is_claim = kind[c] == ComponentKind::Claim;
      const std::size_t base = is_claim ? kClaim : kPremise;
      const std::size_t vocab = is_claim ? kClaimWords : kPremiseWords;
      for (int k = 0; k < 3; ++k) ids.push_back(base + rng.index(vocab));
      ids.push_back(kTopic + topic[c]);
      ids.push_back(kTopic + topic[c]);
      if (!is_claim) ids.push_back(kTopic + topic[static_cast<std::size_t>(parent[c])]);
      if (is_claim && c == major) ids.push_back(kMajor + rng.index(kMajorWords));
    }
    while (ids.size() < words) ids.push_back(kFiller + rng.index(kFillerWords));
    for (std::size_t k = ids.size(); k > 1; --k) std::swap(ids[k - 1], ids[rng.index(k)]);

    Segment s;
    for (std::size_t id : ids) s.text += word(id);
    s.text += "。";
    const bool claim_seg = o >= 0 && kind[static_cast<std::size_t>(o)] == ComponentKind::Claim;
    for (std::size_t k = 0; k < kNumMarks; ++k) {
      s.marks.set(k, rng.bernoulli(claim_seg ? claim_rate[k] : other_rate[k]));
    }
    if (i > 0 && rng.bernoulli(pr.paragraph_break)) ++para;
    s.paragraph_pos = para;
    s.segment_pos = i;
    if (o >= 0) members[static_cast<std::size_t>(o)].push_back(i);
    segments.push_back(std::move(s));
  }

  ArgumentStructure structure;
  std::vector<std::string> ids(nc);
  std::size_t ci = 0, pi = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    ids[c] = kind[c] == ComponentKind::Claim ? "c" + std::to_string(++ci) : "p" + std::to_string(++pi);
  }
  for (std::size_t c = 0; c < nc; ++c) {
    structure.components.push_back({ids[c], kind[c], members[c], kind[c] == ComponentKind::Claim && c == major});
    if (kind[c] == ComponentKind::Premise) {
      structure.supports.push_back({ids[c], ids[static_cast<std::size_t>(parent[c])]});
    }
  }
  return Document::create(std::move(doc_id), std::move(segments), std::move(structure), pr.max_segments);
}

}  // namespace

std::vector<Document> generate(std::size_t num_docs, const GeneratorPriors& priors, std::uint64_t seed) {
  priors.validate();
  std::vector<Document> docs;
  docs.reserve(num_docs);
  for (std::size_t i = 0; i < num_docs; ++i) {
    const std::uint64_t doc_seed = mix64(mix64(seed) ^ (0x9E3779B97F4A7C15ULL * (i + 1)));
    docs.push_back(generate_one(priors, doc_seed, "synth-" + std::to_string(seed) + "-" + std::to_string(i)));
  }
  return docs;
}

namespace {

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string inline_markup(const Segment& s) {
  std::string open, close;
  auto wrap = [&](const std::string& o, const std::string& c) {
    open += o;
    close = c + close;
  };
  if (s.marks.font) wrap("<font size=\"4\">", "</font>");
  if (s.marks.strong) wrap("<strong>", "</strong>");
  if (s.marks.color) wrap("<span style=\"color:#c0392b\">", "</span>");
  if (s.marks.supertalk) wrap("<span class=\"supertalk\">", "</span>");
  return open + escape(s.text) + close;
}

}  // namespace

std::string render_html(const Document& doc) {
  std::string html = "<html><body>\n";
  std::size_t i = 0;
  const auto segs = doc.segments();
  while (i < segs.size()) {
    const Segment& s = segs[i];
    if (s.marks.blockquote || s.marks.header) {
      std::string inner = inline_markup(s);
      if (s.marks.header) inner = "<h3>" + inner + "</h3>";
      if (s.marks.blockquote) inner = "<blockquote>" + inner + "</blockquote>";
      html += inner + "\n";
      ++i;
      continue;
    }
    html += "<p>";
    const std::size_t para = s.paragraph_pos;
    while (i < segs.size() && segs[i].paragraph_pos == para && !segs[i].marks.blockquote && !segs[i].marks.header) {
      html += inline_markup(segs[i]);
      ++i;
    }
    html += "</p>\n";
  }
  html += "</body></html>\n";
  return html;
}

}  // namespace argmine
