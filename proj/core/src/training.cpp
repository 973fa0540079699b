#include "argmine/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "argmine/error.hpp"
#include "argmine/evaluation.hpp"

namespace argmine {

using nn::Tensor;

std::string to_string(Reduction r) {
  switch (r) {
    case Reduction::Sum:
      return "sum";
    case Reduction::PerSegment:
      return "segment";
    case Reduction::Mean:
      return "mean";
  }
  return "sum";
}

Reduction parse_reduction(std::string_view name) {
  if (name == "sum") return Reduction::Sum;
  if (name == "segment") return Reduction::PerSegment;
  if (name == "mean") return Reduction::Mean;
  throw InvalidConfig("unknown relation reduction '" + std::string(name) + "' (sum | segment | mean)");
}

void TrainConfig::validate() const {
  if (lambda_c < 0 || lambda_r < 0 || lambda_m < 0) throw InvalidConfig("loss weights must be non-negative");
  if (!(lr_max >= 0)) throw InvalidConfig("lr_max must be non-negative");
  if (epochs < warmup_epochs) throw InvalidConfig("epochs must be >= warmup_epochs");
  if (batch_size == 0) throw InvalidConfig("batch_size must be positive");
  if (weight_decay < 0) throw InvalidConfig("weight_decay must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw InvalidConfig("betas must lie in [0, 1)");
  if (!(eps > 0)) throw InvalidConfig("eps must be positive");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"lambda_c", lambda_c}, {"lambda_r", lambda_r},     {"lambda_m", lambda_m},
          {"lr_max", lr_max},     {"warmup_epochs", warmup_epochs}, {"epochs", epochs},
          {"batch_size", batch_size}, {"weight_decay", weight_decay}, {"beta1", beta1},
          {"beta2", beta2},       {"eps", eps},               {"clip_norm", clip_norm},
          {"seed", seed},         {"relation_reduction", to_string(relation_reduction)}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.lambda_c = j.value("lambda_c", c.lambda_c);
    c.lambda_r = j.value("lambda_r", c.lambda_r);
    c.lambda_m = j.value("lambda_m", c.lambda_m);
    c.lr_max = j.value("lr_max", c.lr_max);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.eps = j.value("eps", c.eps);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.seed = j.value("seed", c.seed);
    c.relation_reduction = parse_reduction(j.value("relation_reduction", to_string(c.relation_reduction)));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

Tensor loss_component(const Tensor& probs, std::span<const ComponentLabel> labels) {
  std::vector<std::size_t> t(labels.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<std::size_t>(labels[i]);
  return nn::nll_loss(probs, t);
}

Tensor loss_relation(const Tensor& probs, const RelationMatrix& labels, Reduction reduction) {
  const std::size_t n = labels.size();
  std::vector<std::size_t> t(n * n);
  const auto flat = labels.flat();
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<std::size_t>(flat[i]);
  Tensor loss = nn::nll_loss(probs, t);
  if (n == 0) return loss;
  if (reduction == Reduction::PerSegment) loss = nn::scale(loss, 1.0 / static_cast<double>(n));
  if (reduction == Reduction::Mean) loss = nn::scale(loss, 1.0 / static_cast<double>(n * n));
  return loss;
}

Tensor loss_major(const Tensor& confidence, std::span<const std::uint8_t> major) {
  std::vector<double> t(major.begin(), major.end());
  return nn::binary_cross_entropy(confidence, t);
}

Tensor total_loss(const Tensor& lc, const Tensor& lr, const Tensor& lm, const TrainConfig& cfg) {
  return nn::add(nn::add(nn::scale(lc, cfg.lambda_c), nn::scale(lr, cfg.lambda_r)), nn::scale(lm, cfg.lambda_m));
}

LossParts document_loss(const SegmentOutput& out, const SegmentLabels& labels, const TrainConfig& cfg) {
  LossParts p;
  p.component = loss_component(out.component, labels.component);
  p.relation = loss_relation(out.relation, labels.relations, cfg.relation_reduction);
  p.major = loss_major(out.major, labels.major);
  p.total = total_loss(p.component, p.relation, p.major, cfg);
  return p;
}

double lr_at(std::size_t step, std::size_t total_steps, std::size_t warmup_steps, double lr_max) {
  if (step < warmup_steps) return lr_max * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (total_steps <= warmup_steps) return lr_max;
  if (step >= total_steps) return 0.0;
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  return lr_max * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(nn::ParameterStore& store, double beta1, double beta2, double eps, double weight_decay)
    : store_(&store), beta1_(beta1), beta2_(beta2), eps_(eps), wd_(weight_decay) {
  for (const auto& e : store.entries()) {
    m_.emplace_back(e.second.numel(), 0.0);
    v_.emplace_back(e.second.numel(), 0.0);
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double decay = 1.0 - lr * wd_;
  auto& entries = store_->entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor t = entries[p].second;
    auto value = t.mutable_values();
    const auto grad = t.grad();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      if (wd_ != 0.0) value[i] *= decay;
      const double mh = m[i] / c1;
      const double vh = v[i] / c2;
      value[i] -= lr * mh / (std::sqrt(vh) + eps_);
    }
  }
}

double clip_grad_norm(nn::ParameterStore& store, double max_norm) {
  double sq = 0.0;
  for (const auto& e : store.entries()) {
    for (double g : e.second.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-12);
    for (auto& e : store.entries()) {
      Tensor t = e.second;
      if (!t.has_grad()) continue;
      for (double& g : t.mutable_grad()) g *= s;
    }
  }
  return norm;
}

std::pair<std::vector<Document>, std::vector<Document>> split_corpus(std::vector<Document> docs, double val_fraction,
                                                                     std::uint64_t seed) {
  Rng rng(mix64(seed ^ 0x73706c6974ULL));
  for (std::size_t i = docs.size(); i > 1; --i) std::swap(docs[i - 1], docs[rng.index(i)]);
  const auto nval = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(docs.size())));
  std::vector<Document> val(docs.end() - static_cast<std::ptrdiff_t>(std::min(nval, docs.size())), docs.end());
  docs.erase(docs.end() - static_cast<std::ptrdiff_t>(val.size()), docs.end());
  return {std::move(docs), std::move(val)};
}

namespace {

using Snapshot = std::vector<std::vector<double>>;

Snapshot snapshot(const nn::ParameterStore& store) {
  Snapshot s;
  for (const auto& e : store.entries()) s.emplace_back(e.second.values().begin(), e.second.values().end());
  return s;
}

void restore(nn::ParameterStore& store, const Snapshot& s) {
  for (std::size_t p = 0; p < s.size(); ++p) {
    Tensor t = store.entries()[p].second;
    std::copy(s[p].begin(), s[p].end(), t.mutable_values().begin());
  }
}

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

}  // namespace

FitResult fit(SegmentModel& model, std::span<const Document> train, std::span<const Document> val,
              const TrainConfig& cfg, const std::filesystem::path& out_dir,
              const std::function<void(const nlohmann::json&)>& on_epoch) {
  cfg.validate();
  struct Example {
    SegmentInputs inputs;
    SegmentLabels labels;
  };
  std::vector<Example> examples;
  for (const Document& doc : train) {
    if (!doc.annotation()) continue;
    examples.push_back({model.prepare(doc), derive_labels(*doc.annotation(), doc.size())});
  }
  if (examples.empty()) throw InvalidConfig("training corpus has no annotated document");

  std::ofstream metrics;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    metrics.open(out_dir / "metrics.jsonl", std::ios::trunc);
  }

  nn::ParameterStore& store = model.parameters();
  AdamW opt(store, cfg);
  Rng rng(mix64(cfg.seed ^ 0x747261696eULL));
  const std::size_t per_epoch = (examples.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = per_epoch * cfg.epochs;
  const std::size_t warmup = per_epoch * cfg.warmup_epochs;

  FitResult result;
  Snapshot best = snapshot(store);
  std::size_t step = 0;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !result.diverged; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0, lc_sum = 0.0, lr_sum = 0.0, lm_sum = 0.0;
    double lr = 0.0;
    for (std::size_t b = 0; b < examples.size() && !result.diverged; b += cfg.batch_size) {
      const std::size_t e = std::min(examples.size(), b + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(e - b);
      store.zero_grad();
      for (std::size_t k = b; k < e; ++k) {
        const Example& ex = examples[order[k]];
        const SegmentOutput out = model.forward(ex.inputs, model.train_mode(rng));
        const LossParts parts = document_loss(out, ex.labels, cfg);
        const double value = parts.total.item();
        if (!std::isfinite(value)) {
          result.diverged = true;
          break;
        }
        loss_sum += value;
        lc_sum += parts.component.item();
        lr_sum += parts.relation.item();
        lm_sum += parts.major.item();
        nn::backward(nn::scale(parts.total, inv));
      }
      if (result.diverged) break;
      clip_grad_norm(store, cfg.clip_norm);
      lr = lr_at(step, total, warmup, cfg.lr_max);
      opt.step(lr);
      ++step;
    }
    if (result.diverged) break;

    const double count = static_cast<double>(examples.size());
    nlohmann::json record = {{"epoch", epoch},
                             {"train_loss", loss_sum / count},
                             {"train_component", lc_sum / count},
                             {"train_relation", lr_sum / count},
                             {"train_major", lm_sum / count},
                             {"lr", lr},
                             {"steps", step}};
    double score = 0.0;
    if (!val.empty()) {
      const EvalReport report = evaluate(val, model);
      score = report.component ? report.component->weighted : 0.0;
      record["val"] = report.to_json();
      record["val"].erase("metadata");
    }
    record["selection_score"] = score;
    const bool better = val.empty() || result.best_epoch == 0 || score > result.best_score;
    if (better) {
      best = snapshot(store);
      result.best_epoch = epoch;
      result.best_score = score;
    }
    record["best_epoch"] = result.best_epoch;
    if (metrics.is_open()) metrics << record.dump() << '\n' << std::flush;
    if (on_epoch) on_epoch(record);
    result.epochs.push_back(std::move(record));
  }

  restore(store, best);
  store.zero_grad();
  if (result.diverged && metrics.is_open()) {
    metrics << nlohmann::json{{"diverged", true}, {"steps", step}, {"best_epoch", result.best_epoch}}.dump() << '\n';
  }
  if (!out_dir.empty()) {
    model.save(out_dir / "best", {{"best_epoch", result.best_epoch},
                                  {"selection_score", result.best_score},
                                  {"diverged", result.diverged},
                                  {"train_config", cfg.to_json()}});
  }
  return result;
}

std::vector<double> fit_token_model(TokenModel& model, std::span<const Document> train, const TrainConfig& cfg) {
  cfg.validate();
  struct Sample {
    std::vector<std::string> tokens;
    std::size_t label;
  };
  std::vector<Sample> samples;
  for (const Document& doc : train) {
    if (!doc.annotation()) continue;
    const SegmentLabels labels = derive_labels(*doc.annotation(), doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
      auto tokens = model.tokenize(doc.segment(i).text);
      if (tokens.empty()) continue;
      samples.push_back({std::move(tokens), static_cast<std::size_t>(labels.component[i])});
    }
  }
  if (samples.empty()) throw InvalidConfig("training corpus has no annotated segment");

  nn::ParameterStore& store = model.parameters();
  AdamW opt(store, cfg);
  Rng rng(mix64(cfg.seed ^ 0x746f6b656eULL));
  const std::size_t per_epoch = (samples.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = per_epoch * cfg.epochs;
  const std::size_t warmup = per_epoch * cfg.warmup_epochs;
  const nn::Mode mode{&rng, model.config().dropout};

  std::vector<double> losses;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double sum = 0.0;
    for (std::size_t b = 0; b < samples.size(); b += cfg.batch_size) {
      const std::size_t e = std::min(samples.size(), b + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(e - b);
      store.zero_grad();
      for (std::size_t k = b; k < e; ++k) {
        const Sample& s = samples[order[k]];
        const auto kind = static_cast<AugmentKind>(rng.index(3));
        const auto tokens = augment(s.tokens, model.config().p_aug, model.config().aug_ratio, kind, rng);
        const Tensor loss = nn::nll_loss(model.forward(tokens, mode), std::span<const std::size_t>(&s.label, 1));
        sum += loss.item();
        nn::backward(nn::scale(loss, inv));
      }
      clip_grad_norm(store, cfg.clip_norm);
      opt.step(lr_at(step++, total, warmup, cfg.lr_max));
    }
    losses.push_back(sum / static_cast<double>(samples.size()));
  }
  store.zero_grad();
  return losses;
}

}  // namespace argmine
