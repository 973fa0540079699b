#include "argmine/document.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>
#include <utility>

#include "argmine/error.hpp"

namespace argmine {

namespace {

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; });
}

void check_segments(const std::vector<Segment>& segments, std::size_t max_segments) {
  if (segments.empty()) throw InvalidDocument("document has no segments");
  if (segments.size() > max_segments) {
    throw InvalidDocument("document has " + std::to_string(segments.size()) + " segments, limit is " +
                          std::to_string(max_segments));
  }
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& s = segments[i];
    if (blank(s.text)) throw InvalidDocument("segment " + std::to_string(i) + " has empty text");
    if (s.paragraph_pos >= max_segments || s.segment_pos >= max_segments) {
      throw InvalidDocument("segment " + std::to_string(i) + " position out of range");
    }
    if (i > 0) {
      const Segment& prev = segments[i - 1];
      const auto a = std::pair(prev.paragraph_pos, prev.segment_pos);
      const auto b = std::pair(s.paragraph_pos, s.segment_pos);
      if (!(a < b)) {
        throw InvalidDocument("segment " + std::to_string(i) +
                              " positions are not strictly increasing (paragraph, segment)");
      }
    }
  }
}

void check_annotation_indices(const ArgumentStructure& a, std::size_t n) {
  for (const Component& c : a.components) {
    for (std::size_t s : c.segment_ids) {
      if (s >= n) {
        throw InvalidDocument("component " + c.id + " references segment " + std::to_string(s) +
                              " of a " + std::to_string(n) + "-segment document");
      }
    }
  }
}

// Removes components touching segments >= n, cascading to premises whose
// claim disappeared. Returns the kept structure, or nullopt when what remains
// is not a valid annotation.
std::optional<ArgumentStructure> truncate_annotation(const ArgumentStructure& a, std::size_t n,
                                                     std::vector<std::string>& warnings) {
  std::set<std::string> dropped;
  for (const Component& c : a.components) {
    if (std::any_of(c.segment_ids.begin(), c.segment_ids.end(), [n](std::size_t s) { return s >= n; })) {
      dropped.insert(c.id);
    }
  }
  for (const Support& s : a.supports) {
    if (dropped.count(s.claim_id)) dropped.insert(s.premise_id);
  }
  if (dropped.empty()) return a;

  ArgumentStructure kept;
  for (const Component& c : a.components) {
    if (!dropped.count(c.id)) kept.components.push_back(c);
  }
  for (const Support& s : a.supports) {
    if (!dropped.count(s.premise_id) && !dropped.count(s.claim_id)) kept.supports.push_back(s);
  }
  for (const std::string& id : dropped) {
    warnings.push_back("truncation dropped component " + id);
  }
  if (!validate_structure(kept, n).empty()) {
    warnings.push_back("truncation left an invalid annotation; annotation dropped");
    return std::nullopt;
  }
  return kept;
}

}  // namespace

void StyleMarks::set(std::size_t i, bool v) {
  switch (i) {
    case 0: font = v; break;
    case 1: strong = v; break;
    case 2: color = v; break;
    case 3: blockquote = v; break;
    case 4: supertalk = v; break;
    case 5: header = v; break;
    default: throw IndexOutOfRange("style mark index " + std::to_string(i));
  }
}

std::string_view to_string(ComponentKind kind) {
  return kind == ComponentKind::Claim ? "claim" : "premise";
}

const Component* ArgumentStructure::find(std::string_view id) const {
  for (const Component& c : components) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

std::size_t ArgumentStructure::count(ComponentKind kind) const {
  return static_cast<std::size_t>(
      std::count_if(components.begin(), components.end(), [kind](const Component& c) { return c.kind == kind; }));
}

Document Document::create(std::string doc_id, std::vector<Segment> segments,
                          std::optional<ArgumentStructure> annotation, std::size_t max_segments,
                          std::vector<std::string> warnings) {
  check_segments(segments, max_segments);
  if (annotation) check_annotation_indices(*annotation, segments.size());
  Document d;
  d.doc_id_ = std::move(doc_id);
  d.segments_ = std::move(segments);
  d.annotation_ = std::move(annotation);
  d.warnings_ = std::move(warnings);
  return d;
}

Document Document::ingest(std::string doc_id, std::vector<Segment> segments,
                          std::optional<ArgumentStructure> annotation, std::size_t max_segments,
                          std::vector<std::string> warnings) {
  if (segments.size() > max_segments) {
    warnings.push_back("truncated from " + std::to_string(segments.size()) + " to " +
                       std::to_string(max_segments) + " segments");
    segments.resize(max_segments);
    if (annotation) annotation = truncate_annotation(*annotation, max_segments, warnings);
  }
  return create(std::move(doc_id), std::move(segments), std::move(annotation), max_segments,
                std::move(warnings));
}

Document Document::with_annotation(std::optional<ArgumentStructure> annotation) const {
  if (annotation) check_annotation_indices(*annotation, segments_.size());
  Document d = *this;
  d.annotation_ = std::move(annotation);
  return d;
}

std::vector<std::string> validate_structure(const ArgumentStructure& a, std::size_t n) {
  std::vector<std::string> out;

  std::unordered_map<std::string, const Component*> by_id;
  for (const Component& c : a.components) {
    if (!by_id.emplace(c.id, &c).second) out.push_back("duplicate component id " + c.id);
  }

  const std::size_t claims = a.count(ComponentKind::Claim);
  if (claims == 0) out.push_back("claim count 0 < 1");
  if (claims > kMaxClaims) {
    out.push_back("claim count " + std::to_string(claims) + " > " + std::to_string(kMaxClaims));
  }

  std::size_t majors = 0;
  std::map<std::size_t, std::string> owner;
  for (const Component& c : a.components) {
    if (c.is_major) {
      if (c.kind == ComponentKind::Claim) {
        ++majors;
      } else {
        out.push_back("premise " + c.id + " marked major");
      }
    }
    if (c.segment_ids.empty()) out.push_back("component " + c.id + " has no segments");
    for (std::size_t k = 0; k < c.segment_ids.size(); ++k) {
      const std::size_t s = c.segment_ids[k];
      if (s >= n) {
        out.push_back("segment " + std::to_string(s) + " out of range in component " + c.id);
      }
      if (k > 0 && c.segment_ids[k - 1] >= s) {
        out.push_back("segments of component " + c.id + " not in document order");
      }
      auto [it, fresh] = owner.emplace(s, c.id);
      if (!fresh && it->second != c.id) {
        out.push_back("segment " + std::to_string(s) + " shared by components " + it->second + " and " + c.id);
      }
    }
  }
  if (claims > 0 && majors != 1) {
    out.push_back("major claim count " + std::to_string(majors) + " != 1");
  }

  std::map<std::string, std::size_t> links_per_premise;
  std::map<std::string, std::size_t> premises_per_claim;
  for (const Support& s : a.supports) {
    auto src = by_id.find(s.premise_id);
    auto dst = by_id.find(s.claim_id);
    if (src == by_id.end()) {
      out.push_back("support source " + s.premise_id + " is not a component");
      continue;
    }
    if (dst == by_id.end()) {
      out.push_back("support target " + s.claim_id + " is not a component");
      continue;
    }
    if (src->second->kind != ComponentKind::Premise) {
      out.push_back("support source " + s.premise_id + " is a claim");
      continue;
    }
    if (dst->second->kind != ComponentKind::Claim) {
      out.push_back("support target " + s.claim_id + " is not a claim");
      continue;
    }
    ++links_per_premise[s.premise_id];
    ++premises_per_claim[s.claim_id];
  }
  for (const Component& c : a.components) {
    if (c.kind != ComponentKind::Premise) continue;
    const std::size_t links = links_per_premise.count(c.id) ? links_per_premise[c.id] : 0;
    if (links != 1) {
      out.push_back("premise " + c.id + " has " + std::to_string(links) + " support links, expected 1");
    }
  }
  for (const auto& [claim, count] : premises_per_claim) {
    if (count > kMaxPremisesPerClaim) {
      out.push_back("premise count " + std::to_string(count) + " > " + std::to_string(kMaxPremisesPerClaim) +
                    " for claim " + claim);
    }
  }
  return out;
}

std::vector<std::string> validate_structure(const Document& doc) {
  if (!doc.annotation()) return {"document " + doc.id() + " has no annotation"};
  return validate_structure(*doc.annotation(), doc.size());
}

}  // namespace argmine
