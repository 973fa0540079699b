#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/document.hpp"
#include "argmine/labels.hpp"

namespace argmine {

class SegmentModel;

struct ClassScore {
  std::size_t cls = 0;
  std::size_t support = 0;    // gold count
  std::size_t predicted = 0;  // predicted count
  std::size_t true_positive = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct F1Scores {
  double macro = 0.0;
  double micro = 0.0;
  double weighted = 0.0;
  std::vector<ClassScore> per_class;  // included classes only, ascending
};

/// Per-class precision/recall/F1 over classes 0..num_classes-1 minus
/// `excluded`. Macro averages classes that occur in gold or predictions;
/// micro pools TP/FP/FN over included classes; weighted uses gold support.
/// Throws EmptyGold when no gold label falls in an included class.
F1Scores f1_scores(std::span<const std::size_t> predicted, std::span<const std::size_t> gold,
                   std::size_t num_classes, std::span<const std::size_t> excluded = {});

/// Share of claim-confidence mass on gold major-claim segments. Empty when
/// the document has no gold claim segment or the claim mass is zero.
std::optional<double> major_density(std::span<const double> confidence, std::span<const ComponentLabel> component,
                                    std::span<const std::uint8_t> major);

struct EvalReport {
  std::optional<F1Scores> component;  // empty: no gold support
  std::optional<F1Scores> relation;
  std::optional<double> major_density;  // mean over documents where defined
  std::size_t documents = 0;
  std::size_t segments = 0;
  std::size_t pairs = 0;

  nlohmann::json to_json() const;
  /// Aligned text table, scores x100.
  std::string to_text() const;
};

/// Scores predictions against the annotations of `docs` (same order).
/// Documents without annotation are skipped.
EvalReport evaluate(std::span<const Document> docs, std::span<const StructurePrediction> predictions);

/// Runs the model over `docs` in evaluation mode and scores it. Throws
/// ConfigMismatch when a document does not fit the model's position range.
EvalReport evaluate(std::span<const Document> docs, const SegmentModel& model);

struct ComparisonRow {
  std::string row;
  std::string module;
  std::string relation_modeling;
  bool using_html = false;
  EvalReport report;
};

/// Table with the columns Row | Module | Relation Modeling | Using HTML? |
/// component Mac Mic Weig Major | relation Mac Mic Weig.
std::string comparison_table(std::span<const ComparisonRow> rows);

}  // namespace argmine
