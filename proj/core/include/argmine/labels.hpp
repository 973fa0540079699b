#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "argmine/document.hpp"

namespace argmine {

enum class ComponentLabel : std::uint8_t { NonArgument = 0, Claim = 1, Premise = 2 };
enum class RelationLabel : std::uint8_t { Other = 0, Affiliation = 1, CoOccurrence = 2, CoRelevance = 3 };

inline constexpr std::size_t kNumComponentClasses = 3;
inline constexpr std::size_t kNumRelationClasses = 4;

inline constexpr std::array<std::string_view, kNumComponentClasses> kComponentNames = {"NonArgument", "Claim",
                                                                                       "Premise"};
inline constexpr std::array<std::string_view, kNumRelationClasses> kRelationNames = {"Other", "Affiliation",
                                                                                     "CoOccurrence", "CoRelevance"};

/// n x n matrix of relation labels; entry (i, j) relates source i to target j.
class RelationMatrix {
 public:
  RelationMatrix() = default;
  explicit RelationMatrix(std::size_t n) : n_(n), labels_(n * n, RelationLabel::Other) {}

  std::size_t size() const { return n_; }
  RelationLabel operator()(std::size_t i, std::size_t j) const { return labels_[i * n_ + j]; }
  RelationLabel& operator()(std::size_t i, std::size_t j) { return labels_[i * n_ + j]; }
  std::span<const RelationLabel> flat() const { return labels_; }

  friend bool operator==(const RelationMatrix&, const RelationMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<RelationLabel> labels_;
};

/// n x n x 4 relation probabilities, row-major with the class axis last.
class RelationProbs {
 public:
  RelationProbs() = default;
  explicit RelationProbs(std::size_t n) : n_(n), p_(n * n * kNumRelationClasses, 0.0) {}
  RelationProbs(std::size_t n, std::vector<double> values);

  std::size_t size() const { return n_; }
  std::span<const double, kNumRelationClasses> operator()(std::size_t i, std::size_t j) const {
    return std::span<const double, kNumRelationClasses>(p_.data() + (i * n_ + j) * kNumRelationClasses,
                                                        kNumRelationClasses);
  }
  std::span<double, kNumRelationClasses> operator()(std::size_t i, std::size_t j) {
    return std::span<double, kNumRelationClasses>(p_.data() + (i * n_ + j) * kNumRelationClasses,
                                                  kNumRelationClasses);
  }
  double prob(std::size_t i, std::size_t j, RelationLabel k) const {
    return p_[(i * n_ + j) * kNumRelationClasses + static_cast<std::size_t>(k)];
  }
  std::span<const double> flat() const { return p_; }

  /// True when every row is non-negative and sums to 1 within `tol`.
  bool normalized(double tol = 1e-6) const;

 private:
  std::size_t n_ = 0;
  std::vector<double> p_;
};

struct SegmentLabels {
  std::vector<ComponentLabel> component;
  std::vector<std::uint8_t> major;
  RelationMatrix relations;

  std::size_t size() const { return component.size(); }
  friend bool operator==(const SegmentLabels&, const SegmentLabels&) = default;
};

/// Violations of the label invariants (major implies claim, diagonal rule).
std::vector<std::string> check_label_invariants(const SegmentLabels& labels);

/// Training targets of a structure over an n-segment document. Relations take
/// the first matching rule: co-occurrence, affiliation (premise -> claim only),
/// co-relevance (distinct claims, or distinct premises of one claim), other.
SegmentLabels derive_labels(const ArgumentStructure& structure, std::size_t n);

struct DecodeThresholds {
  double occurrence = 0.5;
  double affiliation = 0.3;
  double claim = 0.5;
};

/// Per-segment model outputs consumed by the structure decoder.
struct StructurePrediction {
  std::vector<std::array<double, kNumComponentClasses>> component;
  std::vector<double> major;
  RelationProbs relations;

  std::size_t size() const { return component.size(); }
};

struct DecodeResult {
  ArgumentStructure structure;
  bool degenerate = false;  // no segment classified Claim; fallback structure returned
  std::vector<std::string> notes;
};

DecodeResult decode_structure(const StructurePrediction& prediction, const DecodeThresholds& thresholds = {});

/// One-hot probabilities of gold labels; major confidence is the 0/1 flag.
StructurePrediction one_hot(const SegmentLabels& labels);

/// Argmax with ties broken toward the lowest index.
std::size_t argmax(std::span<const double> values);

/// Equality up to component-id renaming.
bool equivalent_structures(const ArgumentStructure& a, const ArgumentStructure& b);

}  // namespace argmine
