// argmine: ingest, synthesize, train, evaluate, predict and decode.

#ifdef ARGMINE_CLI11_SINGLE_HEADER
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "argmine/checkpoint.hpp"
#include "argmine/corpus_io.hpp"
#include "argmine/error.hpp"
#include "argmine/evaluation.hpp"
#include "argmine/ingest.hpp"
#include "argmine/labels.hpp"
#include "argmine/model.hpp"
#include "argmine/synth.hpp"
#include "argmine/training.hpp"

namespace fs = std::filesystem;
using namespace argmine;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void report_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw InvalidConfig("expected true or false, got '" + s + "'");
}

std::vector<Document> load(const fs::path& p, std::size_t max_segments = kDefaultMaxSegments) {
  std::vector<std::string> warnings;
  auto docs = read_corpus(p, &warnings, max_segments);
  report_warnings(warnings);
  return docs;
}

std::vector<std::pair<std::string, StructurePrediction>> load_predictions(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot read " + p.string());
  std::vector<std::pair<std::string, StructurePrediction>> out;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      std::string id;
      StructurePrediction pred = prediction_from_json(nlohmann::json::parse(line), &id);
      out.emplace_back(std::move(id), std::move(pred));
    } catch (const std::exception& e) {
      throw ParseError("line " + std::to_string(no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Argument mining over visually rich documents"};
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse HTML into a JSONL corpus");
  std::string ingest_in, ingest_out;
  std::size_t ingest_max = kDefaultMaxSegments;
  ingest->add_option("--in", ingest_in, "HTML file, or JSONL of {\"doc_id\",\"html\"} records")->required();
  ingest->add_option("--out", ingest_out, "Output corpus (JSONL)")->required();
  ingest->add_option("--max-segments", ingest_max, "Position vocabulary size");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic annotated corpus");
  std::size_t synth_docs = 1000;
  std::uint64_t synth_seed = 7;
  GeneratorPriors priors;
  std::string synth_out, synth_html;
  synth->add_option("--docs", synth_docs, "Number of documents");
  synth->add_option("--seed", synth_seed, "Random seed");
  synth->add_option("--signal", priors.signal, "Class-signal strength in [0,1]");
  synth->add_option("--interleave", priors.interleave, "Segment scattering probability");
  synth->add_option("--noise", priors.noise_segments, "Mean number of non-argument segments");
  synth->add_option("--out", synth_out, "Output corpus (JSONL)")->required();
  synth->add_option("--html", synth_html, "Also write {\"doc_id\",\"html\"} renderings here");

  // train
  auto* train = app.add_subcommand("train", "Train the segment-level model");
  std::string train_corpus, train_val, train_out, train_model_cfg;
  std::string encoder = "bigru", rel_head = "muladd", use_html = "true", rel_input = "contextual";
  std::string rel_reduction = "segment";
  double val_fraction = 0.1;
  TrainConfig tcfg;
  std::size_t dim = 384;
  train->add_option("--corpus", train_corpus, "Training corpus (JSONL)")->required();
  train->add_option("--val", train_val, "Validation corpus; default: split off --val-fraction");
  train->add_option("--val-fraction", val_fraction, "Validation share when --val is absent");
  train->add_option("--encoder", encoder, "bigru | transformer | mlp");
  train->add_option("--rel-head", rel_head, "muladd | biaffine");
  train->add_option("--use-html", use_html, "true | false");
  train->add_option("--relation-input", rel_input, "contextual | fused");
  train->add_option("--d", dim, "Hidden width");
  train->add_option("--model-config", train_model_cfg, "Model config JSON (overrides the flags above)");
  train->add_option("--epochs", tcfg.epochs, "Epochs");
  train->add_option("--lr", tcfg.lr_max, "Peak learning rate");
  train->add_option("--batch-size", tcfg.batch_size, "Documents per step");
  train->add_option("--weight-decay", tcfg.weight_decay, "Decoupled weight decay");
  train->add_option("--relation-reduction", rel_reduction, "Relation loss per document: sum | segment | mean");
  train->add_option("--seed", tcfg.seed, "Seed for initialisation, shuffling and dropout");
  train->add_option("--out", train_out, "Output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on an annotated corpus");
  std::string eval_corpus, eval_ckpt, eval_report;
  eval->add_option("--corpus", eval_corpus, "Annotated corpus (JSONL)")->required();
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint directory")->required();
  eval->add_option("--report", eval_report, "Write the JSON report here");

  // predict
  auto* predict = app.add_subcommand("predict", "Write model probabilities for every document");
  std::string pred_corpus, pred_ckpt, pred_out;
  predict->add_option("--corpus", pred_corpus, "Corpus (JSONL)")->required();
  predict->add_option("--ckpt", pred_ckpt, "Checkpoint directory")->required();
  predict->add_option("--out", pred_out, "Predictions (JSONL)")->required();

  // decode
  auto* decode = app.add_subcommand("decode", "Reconstruct argument structures from predictions");
  std::string dec_pred, dec_out;
  DecodeThresholds th;
  decode->add_option("--pred", dec_pred, "Predictions (JSONL)")->required();
  decode->add_option("--out", dec_out, "Structures (JSONL)")->required();
  decode->add_option("--tau-occ", th.occurrence, "Co-occurrence threshold");
  decode->add_option("--tau-aff", th.affiliation, "Affiliation threshold");
  decode->add_option("--tau-claim", th.claim, "Orphan-to-claim threshold");

  // compare
  auto* compare = app.add_subcommand("compare", "Tabulate several evaluation reports");
  std::vector<std::string> entries;
  compare->add_option("--entry", entries, "row,module,relation,html(yes|no),report.json")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      IngestConfig cfg;
      cfg.max_segments = ingest_max;
      std::vector<Document> docs;
      if (ends_with(ingest_in, ".jsonl")) {
        std::ifstream in(ingest_in);
        if (!in) throw Error("cannot read " + ingest_in);
        std::string line;
        for (std::size_t no = 1; std::getline(in, line); ++no) {
          if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
          nlohmann::json j;
          try {
            j = nlohmann::json::parse(line);
          } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(no) + ": " + e.what());
          }
          const std::string id = j.value("doc_id", "doc" + std::to_string(no));
          docs.push_back(parse_html(j.at("html").get<std::string>(), id, cfg));
        }
      } else {
        docs.push_back(parse_html(slurp(ingest_in), fs::path(ingest_in).stem().string(), cfg));
      }
      for (const auto& d : docs) {
        for (const auto& w : d.warnings()) std::cerr << "warning: " << d.id() << ": " << w << '\n';
      }
      write_corpus(fs::path(ingest_out), docs);
      std::cout << "wrote " << docs.size() << " documents to " << ingest_out << '\n';
    } else if (*synth) {
      const auto docs = generate(synth_docs, priors, synth_seed);
      write_corpus(fs::path(synth_out), docs);
      if (!synth_html.empty()) {
        std::ofstream out(synth_html);
        for (const auto& d : docs) out << nlohmann::json{{"doc_id", d.id()}, {"html", render_html(d)}}.dump() << '\n';
      }
      std::cout << "wrote " << docs.size() << " documents to " << synth_out << '\n';
    } else if (*train) {
      ModelConfig mcfg;
      if (!train_model_cfg.empty()) {
        mcfg = ModelConfig::from_json(read_json(train_model_cfg));
      } else {
        mcfg.d = dim;
        mcfg.encoder = parse_encoder(encoder);
        mcfg.relation_head = parse_relation_head(rel_head);
        mcfg.relation_input = parse_relation_input(rel_input);
        mcfg.use_html = parse_bool(use_html);
      }
      mcfg.validate();
      tcfg.relation_reduction = parse_reduction(rel_reduction);
      std::vector<Document> tr = load(train_corpus, mcfg.max_positions), va;
      if (!train_val.empty()) {
        va = load(train_val, mcfg.max_positions);
      } else {
        std::tie(tr, va) = split_corpus(std::move(tr), val_fraction, tcfg.seed);
      }
      SegmentModel model(mcfg, tcfg.seed);
      std::cerr << "training on " << tr.size() << " documents, validating on " << va.size() << ", "
                << model.parameters().num_values() << " parameters\n";
      const FitResult r = fit(model, tr, va, tcfg, train_out, [](const nlohmann::json& rec) {
        std::cerr << "epoch " << rec["epoch"] << " loss " << rec["train_loss"] << " val "
                  << rec["selection_score"] << '\n';
      });
      std::cout << "best epoch " << r.best_epoch << " (weighted component F1 " << r.best_score << ")"
                << (r.diverged ? ", training diverged" : "") << "; checkpoint in " << (fs::path(train_out) / "best")
                << '\n';
      return r.diverged ? 2 : 0;
    } else if (*eval) {
      const SegmentModel model = SegmentModel::load(eval_ckpt);
      const auto docs = load(eval_corpus, model.config().max_positions);
      const EvalReport report = evaluate(docs, model);
      std::cout << report.to_text();
      if (!eval_report.empty()) write_json(eval_report, report.to_json());
    } else if (*predict) {
      const SegmentModel model = SegmentModel::load(pred_ckpt);
      const auto docs = load(pred_corpus, model.config().max_positions);
      std::ofstream out(pred_out);
      if (!out) throw Error("cannot write " + pred_out);
      for (const auto& d : docs) out << prediction_to_json(d.id(), model.predict(d)).dump() << '\n';
    } else if (*decode) {
      std::ofstream out(dec_out);
      if (!out) throw Error("cannot write " + dec_out);
      std::size_t degenerate = 0;
      const auto preds = load_predictions(dec_pred);
      for (const auto& [id, p] : preds) {
        const DecodeResult r = decode_structure(p, th);
        degenerate += r.degenerate;
        out << nlohmann::json{{"doc_id", id},
                              {"structure", structure_to_json(r.structure)},
                              {"degenerate", r.degenerate},
                              {"notes", r.notes}}
                   .dump()
            << '\n';
      }
      std::cout << "decoded " << preds.size() << " documents (" << degenerate << " degenerate)\n";
    } else if (*compare) {
      std::vector<ComparisonRow> rows;
      for (const auto& e : entries) {
        std::vector<std::string> f;
        std::stringstream ss(e);
        for (std::string part; std::getline(ss, part, ',');) f.push_back(part);
        if (f.size() != 5) throw InvalidConfig("--entry needs 5 comma-separated fields: " + e);
        const nlohmann::json j = read_json(f[4]);
        EvalReport r;
        auto scores = [](const nlohmann::json& s) -> std::optional<F1Scores> {
          if (s.is_null()) return std::nullopt;
          return F1Scores{s.at("macro").get<double>(), s.at("micro").get<double>(), s.at("weighted").get<double>(), {}};
        };
        r.component = scores(j.at("component"));
        r.relation = scores(j.at("relation"));
        if (!j.at("major_density").is_null()) r.major_density = j.at("major_density").get<double>();
        rows.push_back({f[0], f[1], f[2], parse_bool(f[3]), r});
      }
      std::cout << comparison_table(rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
