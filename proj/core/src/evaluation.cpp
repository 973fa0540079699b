#include "argmine/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "argmine/error.hpp"
#include "argmine/model.hpp"

namespace argmine {

F1Scores f1_scores(std::span<const std::size_t> predicted, std::span<const std::size_t> gold, std::size_t num_classes,
                   std::span<const std::size_t> excluded) {
  if (predicted.size() != gold.size()) {
    throw ShapeMismatch("f1_scores: " + std::to_string(predicted.size()) + " predictions for " +
                        std::to_string(gold.size()) + " gold labels");
  }
  std::vector<ClassScore> cls(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) cls[k].cls = k;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= num_classes || predicted[i] >= num_classes) {
      throw IndexOutOfRange("f1_scores: label outside 0.." + std::to_string(num_classes - 1));
    }
    ++cls[gold[i]].support;
    ++cls[predicted[i]].predicted;
    if (gold[i] == predicted[i]) ++cls[gold[i]].true_positive;
  }
  auto is_excluded = [&](std::size_t k) { return std::find(excluded.begin(), excluded.end(), k) != excluded.end(); };

  F1Scores out;
  std::size_t tp = 0, pred_total = 0, gold_total = 0, macro_count = 0;
  double macro_sum = 0.0, weighted_sum = 0.0;
  for (ClassScore& c : cls) {
    if (is_excluded(c.cls)) continue;
    c.precision = c.predicted ? static_cast<double>(c.true_positive) / static_cast<double>(c.predicted) : 0.0;
    c.recall = c.support ? static_cast<double>(c.true_positive) / static_cast<double>(c.support) : 0.0;
    const std::size_t denom = c.predicted + c.support;
    c.f1 = denom ? 2.0 * static_cast<double>(c.true_positive) / static_cast<double>(denom) : 0.0;
    tp += c.true_positive;
    pred_total += c.predicted;
    gold_total += c.support;
    if (denom > 0) {
      macro_sum += c.f1;
      ++macro_count;
    }
    weighted_sum += c.f1 * static_cast<double>(c.support);
    out.per_class.push_back(c);
  }
  if (gold_total == 0) throw EmptyGold("no gold label falls in an included class");
  out.macro = macro_sum / static_cast<double>(macro_count);
  out.micro = 2.0 * static_cast<double>(tp) / static_cast<double>(pred_total + gold_total);
  out.weighted = weighted_sum / static_cast<double>(gold_total);
  return out;
}

std::optional<double> major_density(std::span<const double> confidence, std::span<const ComponentLabel> component,
                                    std::span<const std::uint8_t> major) {
  if (confidence.size() != component.size() || major.size() != component.size()) {
    throw ShapeMismatch("major_density: inputs of different lengths");
  }
  double num = 0.0, den = 0.0;
  bool any_claim = false;
  for (std::size_t i = 0; i < component.size(); ++i) {
    if (component[i] != ComponentLabel::Claim) continue;
    any_claim = true;
    den += confidence[i];
    if (major[i]) num += confidence[i];
  }
  if (!any_claim || den <= 0.0) return std::nullopt;
  return num / den;
}

EvalReport evaluate(std::span<const Document> docs, std::span<const StructurePrediction> predictions) {
  if (docs.size() != predictions.size()) {
    throw ShapeMismatch("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(docs.size()) + " documents");
  }
  std::vector<std::size_t> comp_pred, comp_gold, rel_pred, rel_gold;
  double density_sum = 0.0;
  std::size_t density_count = 0;
  EvalReport report;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    const Document& doc = docs[d];
    if (!doc.annotation()) continue;
    const StructurePrediction& p = predictions[d];
    const std::size_t n = doc.size();
    if (p.size() != n || p.relations.size() != n || p.major.size() != n) {
      throw ShapeMismatch("evaluate: prediction for " + doc.id() + " does not cover its " + std::to_string(n) +
                          " segments");
    }
    const SegmentLabels gold = derive_labels(*doc.annotation(), n);
    for (std::size_t i = 0; i < n; ++i) {
      comp_pred.push_back(argmax(p.component[i]));
      comp_gold.push_back(static_cast<std::size_t>(gold.component[i]));
      for (std::size_t j = 0; j < n; ++j) {
        rel_pred.push_back(argmax(p.relations(i, j)));
        rel_gold.push_back(static_cast<std::size_t>(gold.relations(i, j)));
      }
    }
    if (auto m = major_density(p.major, gold.component, gold.major)) {
      density_sum += *m;
      ++density_count;
    }
    ++report.documents;
    report.segments += n;
    report.pairs += n * n;
  }
  try {
    report.component = f1_scores(comp_pred, comp_gold, kNumComponentClasses);
  } catch (const EmptyGold&) {
  }
  const std::size_t other = static_cast<std::size_t>(RelationLabel::Other);
  try {
    report.relation = f1_scores(rel_pred, rel_gold, kNumRelationClasses, std::span<const std::size_t>(&other, 1));
  } catch (const EmptyGold&) {
  }
  if (density_count) report.major_density = density_sum / static_cast<double>(density_count);
  return report;
}

EvalReport evaluate(std::span<const Document> docs, const SegmentModel& model) {
  const std::size_t limit = model.config().max_positions;
  std::vector<StructurePrediction> preds;
  preds.reserve(docs.size());
  for (const Document& doc : docs) {
    for (const Segment& s : doc.segments()) {
      if (s.paragraph_pos >= limit || s.segment_pos >= limit) {
        throw ConfigMismatch("document " + doc.id() + " has positions beyond the checkpoint's vocabulary of " +
                             std::to_string(limit));
      }
    }
    preds.push_back(model.predict(doc));
  }
  return evaluate(docs, preds);
}

namespace {

nlohmann::json scores_json(const std::optional<F1Scores>& s, std::span<const std::string_view> names) {
  if (!s) return nullptr;
  nlohmann::json per = nlohmann::json::object();
  for (const ClassScore& c : s->per_class) {
    per[std::string(names[c.cls])] = {{"precision", c.precision}, {"recall", c.recall},     {"f1", c.f1},
                                      {"support", c.support},     {"predicted", c.predicted}};
  }
  return {{"macro", s->macro}, {"micro", s->micro}, {"weighted", s->weighted}, {"per_class", per}};
}

std::string pct(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

std::optional<double> pick(const std::optional<F1Scores>& s, double F1Scores::*field) {
  if (!s) return std::nullopt;
  return (*s).*field;
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

std::string render(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) line += (c ? " | " : "") + pad(r[c], width[c]);
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  return out.str();
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  std::vector<std::string_view> comp(kComponentNames.begin(), kComponentNames.end());
  std::vector<std::string_view> rel(kRelationNames.begin(), kRelationNames.end());
  nlohmann::json j = {{"component", scores_json(component, comp)},
                      {"relation", scores_json(relation, rel)},
                      {"major_density", major_density ? nlohmann::json(*major_density) : nlohmann::json(nullptr)},
                      {"documents", documents},
                      {"segments", segments},
                      {"pairs", pairs}};
  j["metadata"] = {{"relation_excluded", {"Other"}},
                   {"relation_pairs", "all ordered pairs, diagonal included"},
                   {"relation_pooling", "pooled across documents"},
                   {"argmax_ties", "lowest class index"},
                   {"undefined_scores", "null"}};
  return j;
}

std::string EvalReport::to_text() const {
  std::vector<std::vector<std::string>> rows = {{"Task", "Mac", "Mic", "Weig", "Major"}};
  rows.push_back({"Component", pct(pick(component, &F1Scores::macro)), pct(pick(component, &F1Scores::micro)),
                  pct(pick(component, &F1Scores::weighted)), pct(major_density)});
  rows.push_back({"Relation", pct(pick(relation, &F1Scores::macro)), pct(pick(relation, &F1Scores::micro)),
                  pct(pick(relation, &F1Scores::weighted)), ""});
  std::string out = render(rows);
  out += "documents " + std::to_string(documents) + ", segments " + std::to_string(segments) + ", pairs " +
         std::to_string(pairs) + '\n';
  return out;
}

std::string comparison_table(std::span<const ComparisonRow> rows) {
  std::vector<std::vector<std::string>> t = {
      {"", "", "", "", "Component", "", "", "", "Relation", "", ""},
      {"Row", "Module", "Relation Modeling", "Using HTML?", "Mac", "Mic", "Weig", "Major", "Mac", "Mic", "Weig"}};
  for (const ComparisonRow& r : rows) {
    const EvalReport& e = r.report;
    t.push_back({r.row, r.module, r.relation_modeling, r.using_html ? "Yes" : "No",
                 pct(pick(e.component, &F1Scores::macro)), pct(pick(e.component, &F1Scores::micro)),
                 pct(pick(e.component, &F1Scores::weighted)), pct(e.major_density),
                 pct(pick(e.relation, &F1Scores::macro)), pct(pick(e.relation, &F1Scores::micro)),
                 pct(pick(e.relation, &F1Scores::weighted))});
  }
  return render(t);
}

}  // namespace argmine
