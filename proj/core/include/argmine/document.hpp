#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace argmine {

/// Size of the paragraph/segment position vocabulary.
inline constexpr std::size_t kDefaultMaxSegments = 400;

inline constexpr std::size_t kMaxClaims = 9;
inline constexpr std::size_t kMaxPremisesPerClaim = 4;

inline constexpr std::size_t kNumMarks = 6;
inline constexpr std::array<std::string_view, kNumMarks> kMarkNames = {
    "font", "strong", "color", "blockquote", "supertalk", "header"};

/// Six binary style indicators of a segment. The vector form always uses
/// the order of kMarkNames.
struct StyleMarks {
  bool font = false;
  bool strong = false;
  bool color = false;
  bool blockquote = false;
  bool supertalk = false;
  bool header = false;

  std::array<std::uint8_t, kNumMarks> bits() const {
    return {font, strong, color, blockquote, supertalk, header};
  }
  static StyleMarks from_bits(const std::array<std::uint8_t, kNumMarks>& b) {
    return {b[0] != 0, b[1] != 0, b[2] != 0, b[3] != 0, b[4] != 0, b[5] != 0};
  }
  bool get(std::size_t i) const { return bits().at(i) != 0; }
  void set(std::size_t i, bool v);
  bool any() const { return font || strong || color || blockquote || supertalk || header; }

  StyleMarks& operator|=(const StyleMarks& o) {
    font |= o.font;
    strong |= o.strong;
    color |= o.color;
    blockquote |= o.blockquote;
    supertalk |= o.supertalk;
    header |= o.header;
    return *this;
  }
  friend StyleMarks operator|(StyleMarks a, const StyleMarks& b) { return a |= b; }
  friend bool operator==(const StyleMarks&, const StyleMarks&) = default;
};

struct Segment {
  std::string text;
  StyleMarks marks;
  std::size_t paragraph_pos = 0;
  std::size_t segment_pos = 0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

enum class ComponentKind : std::uint8_t { Claim, Premise };

std::string_view to_string(ComponentKind kind);

struct Component {
  std::string id;
  ComponentKind kind = ComponentKind::Claim;
  std::vector<std::size_t> segment_ids;  // document order, need not be contiguous
  bool is_major = false;

  friend bool operator==(const Component&, const Component&) = default;
};

/// premise_id supports claim_id.
struct Support {
  std::string premise_id;
  std::string claim_id;

  friend bool operator==(const Support&, const Support&) = default;
};

struct ArgumentStructure {
  std::vector<Component> components;
  std::vector<Support> supports;

  const Component* find(std::string_view id) const;
  std::size_t count(ComponentKind kind) const;

  friend bool operator==(const ArgumentStructure&, const ArgumentStructure&) = default;
};

/// An immutable, validated document. Construct through create() (strict) or
/// ingest() (truncates to the position vocabulary and records a warning).
class Document {
 public:
  static Document create(std::string doc_id, std::vector<Segment> segments,
                         std::optional<ArgumentStructure> annotation = std::nullopt,
                         std::size_t max_segments = kDefaultMaxSegments,
                         std::vector<std::string> warnings = {});

  static Document ingest(std::string doc_id, std::vector<Segment> segments,
                         std::optional<ArgumentStructure> annotation = std::nullopt,
                         std::size_t max_segments = kDefaultMaxSegments,
                         std::vector<std::string> warnings = {});

  const std::string& id() const { return doc_id_; }
  std::span<const Segment> segments() const { return segments_; }
  const Segment& segment(std::size_t i) const { return segments_.at(i); }
  std::size_t size() const { return segments_.size(); }
  const std::optional<ArgumentStructure>& annotation() const { return annotation_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Returns a copy carrying a different annotation (used by decoders).
  Document with_annotation(std::optional<ArgumentStructure> annotation) const;

  friend bool operator==(const Document& a, const Document& b) {
    return a.doc_id_ == b.doc_id_ && a.segments_ == b.segments_ && a.annotation_ == b.annotation_;
  }

 private:
  Document() = default;

  std::string doc_id_;
  std::vector<Segment> segments_;
  std::optional<ArgumentStructure> annotation_;
  std::vector<std::string> warnings_;
};

/// Checks every annotation rule. Returns an empty list iff the structure is
/// valid for a document of `num_segments` segments.
std::vector<std::string> validate_structure(const ArgumentStructure& structure,
                                            std::size_t num_segments);
std::vector<std::string> validate_structure(const Document& doc);

}  // namespace argmine
