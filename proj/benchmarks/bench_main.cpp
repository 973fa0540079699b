// Throughput of the main pipeline stages on synthetic documents.

#include <benchmark/benchmark.h>

#include "argmine/evaluation.hpp"
#include "argmine/ingest.hpp"
#include "argmine/labels.hpp"
#include "argmine/model.hpp"
#include "argmine/synth.hpp"
#include "argmine/training.hpp"

using namespace argmine;

namespace {

const std::vector<Document>& corpus() {
  static const std::vector<Document> docs = generate(64, GeneratorPriors{}, 1);
  return docs;
}

// A document with roughly `n` segments.
const Document& doc_near(std::size_t n) {
  const auto& docs = corpus();
  const Document* best = &docs.front();
  for (const Document& d : docs) {
    if (std::abs(static_cast<long>(d.size()) - static_cast<long>(n)) <
        std::abs(static_cast<long>(best->size()) - static_cast<long>(n))) {
      best = &d;
    }
  }
  return *best;
}

void BM_Generate(benchmark::State& state) {
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate(1, GeneratorPriors{}, seed++));
}
BENCHMARK(BM_Generate);

void BM_ParseHtml(benchmark::State& state) {
  std::vector<std::string> html;
  std::size_t bytes = 0;
  for (const Document& d : corpus()) {
    html.push_back(render_html(d));
    bytes += html.back().size();
  }
  for (auto _ : state) {
    for (const auto& h : html) benchmark::DoNotOptimize(parse_html(h));
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * bytes));
}
BENCHMARK(BM_ParseHtml);

void BM_LabelRoundTrip(benchmark::State& state) {
  for (auto _ : state) {
    for (const Document& d : corpus()) {
      const SegmentLabels l = derive_labels(*d.annotation(), d.size());
      benchmark::DoNotOptimize(decode_structure(one_hot(l)));
    }
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * corpus().size()));
}
BENCHMARK(BM_LabelRoundTrip);

void BM_Forward(benchmark::State& state) {
  ModelConfig mc;
  mc.d = static_cast<std::size_t>(state.range(1));
  const SegmentModel model(mc, 0);
  const Document& d = doc_near(static_cast<std::size_t>(state.range(0)));
  const SegmentInputs in = model.prepare(d);
  nn::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(in));
  state.counters["segments"] = static_cast<double>(d.size());
}
BENCHMARK(BM_Forward)->Args({10, 64})->Args({30, 64})->Args({10, 384})->Args({30, 384})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  ModelConfig mc;
  mc.d = static_cast<std::size_t>(state.range(0));
  SegmentModel model(mc, 0);
  const Document& d = doc_near(20);
  const SegmentInputs in = model.prepare(d);
  const SegmentLabels labels = derive_labels(*d.annotation(), d.size());
  const TrainConfig cfg;
  AdamW opt(model.parameters(), cfg);
  Rng rng(0);
  for (auto _ : state) {
    model.parameters().zero_grad();
    const LossParts loss = document_loss(model.forward(in, model.train_mode(rng)), labels, cfg);
    nn::backward(loss.total);
    clip_grad_norm(model.parameters(), cfg.clip_norm);
    opt.step(cfg.lr_max);
  }
  state.counters["segments"] = static_cast<double>(d.size());
}
BENCHMARK(BM_TrainStep)->Arg(64)->Arg(384)->Unit(benchmark::kMillisecond);

void BM_F1(benchmark::State& state) {
  Rng rng(3);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::size_t> gold(n), pred(n);
  for (std::size_t i = 0; i < n; ++i) {
    gold[i] = rng.index(4);
    pred[i] = rng.index(4);
  }
  const std::vector<std::size_t> excluded{0};
  for (auto _ : state) benchmark::DoNotOptimize(f1_scores(pred, gold, 4, excluded));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_F1)->Arg(1 << 10)->Arg(1 << 16);

}  // namespace

// the packaged benchmark_main archive is LTO bytecode from another compiler build
BENCHMARK_MAIN();
