#pragma once

// Confusion-matrix reference for precision / recall / F1, written without
// reusing any of the library's counting code.

#include <cstddef>
#include <optional>
#include <vector>

namespace argmine::testing {

struct OracleScores {
  std::vector<std::size_t> classes;  // included classes, ascending
  std::vector<double> f1;            // parallel to classes
  std::vector<long> support;
  double macro = 0.0, micro = 0.0, weighted = 0.0;
};

/// Empty when no gold label falls in an included class. A class that never
/// occurs in gold or predictions has no F1 and is left out of the macro mean.
inline std::optional<OracleScores> oracle_f1(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& gold,
                                             std::size_t k, const std::vector<bool>& include) {
  std::vector<std::vector<long>> cm(k, std::vector<long>(k, 0));  // cm[gold][pred]
  for (std::size_t i = 0; i < gold.size(); ++i) ++cm[gold[i]][pred[i]];

  OracleScores s;
  long tp_all = 0, fp_all = 0, fn_all = 0, gold_all = 0;
  double macro_sum = 0.0, weighted_sum = 0.0;
  std::size_t macro_n = 0;
  for (std::size_t c = 0; c < k; ++c) {
    if (!include[c]) continue;
    long row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += cm[c][j];
      col += cm[j][c];
    }
    const long tp = cm[c][c], fp = col - tp, fn = row - tp;
    const long denom = 2 * tp + fp + fn;
    const double f1 = denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
    if (denom) {
      macro_sum += f1;
      ++macro_n;
    }
    weighted_sum += f1 * static_cast<double>(row);
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
    gold_all += row;
    s.classes.push_back(c);
    s.f1.push_back(f1);
    s.support.push_back(row);
  }
  if (gold_all == 0) return std::nullopt;
  s.macro = macro_sum / static_cast<double>(macro_n);
  s.micro = 2.0 * static_cast<double>(tp_all) / static_cast<double>(2 * tp_all + fp_all + fn_all);
  s.weighted = weighted_sum / static_cast<double>(gold_all);
  return s;
}

}  // namespace argmine::testing
