#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/document.hpp"
#include "argmine/labels.hpp"
#include "argmine/layers.hpp"
#include "argmine/model.hpp"
#include "argmine/token_model.hpp"

namespace argmine {

/// Normalisation of the pairwise relation loss of one document:
/// Sum over all n*n pairs, PerSegment divides by n, Mean by n*n.
enum class Reduction { Sum, PerSegment, Mean };

std::string to_string(Reduction r);
Reduction parse_reduction(std::string_view name);  // "sum" | "segment" | "mean"

struct TrainConfig {
  double lambda_c = 1.0;
  double lambda_r = 1.0;
  double lambda_m = 0.5;
  double lr_max = 1e-4;
  std::size_t warmup_epochs = 1;
  std::size_t epochs = 15;
  std::size_t batch_size = 16;
  double weight_decay = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 5.0;  // <= 0 disables clipping
  Reduction relation_reduction = Reduction::PerSegment;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidConfig
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// -sum_i log a_i[l_i]
nn::Tensor loss_component(const nn::Tensor& probs, std::span<const ComponentLabel> labels);
/// -sum_ij log r_ij[label_ij] over all n*n pairs, normalised per `reduction`.
nn::Tensor loss_relation(const nn::Tensor& probs, const RelationMatrix& labels, Reduction reduction = Reduction::Sum);
/// Binary cross-entropy summed over segments.
nn::Tensor loss_major(const nn::Tensor& confidence, std::span<const std::uint8_t> major);
nn::Tensor total_loss(const nn::Tensor& lc, const nn::Tensor& lr, const nn::Tensor& lm, const TrainConfig& cfg);

struct LossParts {
  nn::Tensor component, relation, major, total;
};

/// Training objective of one document; the relation term uses
/// cfg.relation_reduction.
LossParts document_loss(const SegmentOutput& out, const SegmentLabels& labels, const TrainConfig& cfg);

/// Linear warmup from 0 to lr_max over warmup_steps, then cosine decay to 0
/// at total_steps.
double lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, double lr_max);

/// Decoupled weight decay Adam: theta *= 1 - lr * wd, then the Adam step.
class AdamW {
 public:
  AdamW(nn::ParameterStore& store, double beta1, double beta2, double eps, double weight_decay);
  AdamW(nn::ParameterStore& store, const TrainConfig& cfg)
      : AdamW(store, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay) {}

  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  nn::ParameterStore* store_;
  double beta1_, beta2_, eps_, wd_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Scales all gradients so their global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(nn::ParameterStore& store, double max_norm);

/// Deterministic shuffle then split; the validation part gets
/// round(fraction * size) documents.
std::pair<std::vector<Document>, std::vector<Document>> split_corpus(std::vector<Document> docs, double val_fraction,
                                                                     std::uint64_t seed);

struct FitResult {
  std::size_t best_epoch = 0;  // 1-based; 0 if no epoch completed
  double best_score = 0.0;
  bool diverged = false;
  std::vector<nlohmann::json> epochs;  // one record per epoch
};

/// Trains `model` in place and leaves it holding the selected parameters
/// (best weighted component F1 on `val`, or the last epoch when `val` is
/// empty). With an output directory, writes best/ and metrics.jsonl.
FitResult fit(SegmentModel& model, std::span<const Document> train, std::span<const Document> val,
              const TrainConfig& cfg, const std::filesystem::path& out_dir = {},
              const std::function<void(const nlohmann::json&)>& on_epoch = {});

/// Single-task training of a token-level model on segment component labels,
/// with one randomly chosen augmentation per sample. Returns per-epoch mean
/// losses.
std::vector<double> fit_token_model(TokenModel& model, std::span<const Document> train, const TrainConfig& cfg);

}  // namespace argmine
