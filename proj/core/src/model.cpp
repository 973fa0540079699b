#include "argmine/model.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "argmine/checkpoint.hpp"
#include "argmine/error.hpp"

namespace argmine {

using nn::Tensor;

namespace {

constexpr int kFormatVersion = 1;

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table, const char* what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw InvalidConfig(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, EncoderKind>, 3> kEncoders = {
    {{"mlp", EncoderKind::MLP}, {"bigru", EncoderKind::BiGRU}, {"transformer", EncoderKind::Transformer}}};
constexpr std::array<std::pair<std::string_view, RelationHead>, 2> kHeads = {
    {{"muladd", RelationHead::MulAdd}, {"biaffine", RelationHead::Biaffine}}};
constexpr std::array<std::pair<std::string_view, RelationInput>, 2> kInputs = {
    {{"fused", RelationInput::Fused}, {"contextual", RelationInput::Contextual}}};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::string_view to_string(EncoderKind k) { return kEncoders[static_cast<std::size_t>(k)].first; }
std::string_view to_string(RelationHead h) { return kHeads[static_cast<std::size_t>(h)].first; }
std::string_view to_string(RelationInput r) { return kInputs[static_cast<std::size_t>(r)].first; }
EncoderKind parse_encoder(std::string_view s) { return parse_enum(s, kEncoders, "encoder"); }
RelationHead parse_relation_head(std::string_view s) { return parse_enum(s, kHeads, "relation head"); }
RelationInput parse_relation_input(std::string_view s) { return parse_enum(s, kInputs, "relation input"); }

void ModelConfig::validate() const {
  if (d == 0 || d % 2 != 0) throw InvalidConfig("d must be even and positive, got " + std::to_string(d));
  if (max_positions == 0) throw InvalidConfig("position vocabulary must be non-empty");
  if (layers == 0) throw InvalidConfig("encoder needs at least one layer");
  if (predictor_layers == 0) throw InvalidConfig("predictor needs at least one layer");
  if (encoder == EncoderKind::Transformer && (heads == 0 || d % heads != 0)) {
    throw InvalidConfig("d=" + std::to_string(d) + " is not divisible by heads=" + std::to_string(heads));
  }
  if (ffn_multiplier == 0) throw InvalidConfig("ffn multiplier must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidConfig("dropout must lie in [0, 1)");
  if (embedder.buckets == 0 || embedder.width == 0) throw InvalidConfig("embedder needs buckets and width");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"d", d},
          {"max_positions", max_positions},
          {"encoder", to_string(encoder)},
          {"relation_head", to_string(relation_head)},
          {"relation_input", to_string(relation_input)},
          {"use_html", use_html},
          {"layers", layers},
          {"heads", heads},
          {"predictor_layers", predictor_layers},
          {"ffn_multiplier", ffn_multiplier},
          {"dropout", dropout},
          {"embedder", {{"buckets", embedder.buckets}, {"width", embedder.width}, {"seed", embedder.seed}}}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.d = j.value("d", c.d);
    c.max_positions = j.value("max_positions", c.max_positions);
    if (j.contains("encoder")) c.encoder = parse_encoder(j.at("encoder").get<std::string>());
    if (j.contains("relation_head")) c.relation_head = parse_relation_head(j.at("relation_head").get<std::string>());
    if (j.contains("relation_input")) {
      c.relation_input = parse_relation_input(j.at("relation_input").get<std::string>());
    }
    c.use_html = j.value("use_html", c.use_html);
    c.layers = j.value("layers", c.layers);
    c.heads = j.value("heads", c.heads);
    c.predictor_layers = j.value("predictor_layers", c.predictor_layers);
    c.ffn_multiplier = j.value("ffn_multiplier", c.ffn_multiplier);
    c.dropout = j.value("dropout", c.dropout);
    if (j.contains("embedder")) {
      const auto& e = j.at("embedder");
      c.embedder.buckets = e.value("buckets", c.embedder.buckets);
      c.embedder.width = e.value("width", c.embedder.width);
      c.embedder.seed = e.value("seed", c.embedder.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string ModelConfig::hash() const { return hex64(fnv1a(to_json().dump())); }

SegmentModel::SegmentModel(ModelConfig config, std::uint64_t seed)
    : config_(std::move(config)), embedder_(config_.embedder) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d, E = config_.embedder.width, N = config_.max_positions;

  char_view_ = nn::Linear(store_, "view.char", E, d, rng);
  word_view_ = nn::Linear(store_, "view.word", E, d, rng);
  gate_c_ = nn::Linear(store_, "cross.gate_c", d, d, rng);
  gate_w_ = nn::Linear(store_, "cross.gate_w", d, d, rng);
  fuse_ = nn::Linear(store_, "cross.out", 2 * d, d, rng);
  pos_para_ = store_.add_normal("style.pos_para", {N, d / 2}, 0.02, rng);
  pos_seg_ = store_.add_normal("style.pos_seg", {N, d / 2}, 0.02, rng);
  mark_embed_ = store_.add_normal("style.marks", {kNumMarks, d}, 0.02, rng);
  style_gate_ = nn::Linear(store_, "style.gate", 2 * d, d, rng);

  const std::size_t ffn = config_.ffn_multiplier * d;
  for (std::size_t l = 0; l < config_.layers; ++l) {
    const std::string name = "context." + std::to_string(l);
    switch (config_.encoder) {
      case EncoderKind::MLP:
        mlp_layers_.emplace_back(store_, name, d, ffn, rng);
        break;
      case EncoderKind::BiGRU:
        gru_layers_.emplace_back(store_, name, d, rng);
        break;
      case EncoderKind::Transformer:
        transformer_layers_.emplace_back(store_, name, d, config_.heads, ffn, rng);
        break;
    }
  }
  if (config_.encoder == EncoderKind::Transformer) final_norm_ = nn::LayerNorm(store_, "context.norm", d);

  for (std::size_t l = 0; l + 1 < config_.predictor_layers; ++l) {
    predictor_.hidden.emplace_back(store_, "head.hidden" + std::to_string(l), d, d, rng);
  }
  comp_out_ = nn::Linear(store_, "head.component", d, kNumComponentClasses, rng);
  major_w_ = store_.add_uniform("head.major.weight", {d}, d, rng);
  major_b_ = store_.add_uniform("head.major.bias", {1}, d, rng);

  src_.first = nn::Linear(store_, "rel.src1", d, d, rng);
  src_.second = nn::Linear(store_, "rel.src2", d, d, rng);
  dst_.first = nn::Linear(store_, "rel.dst1", d, d, rng);
  dst_.second = nn::Linear(store_, "rel.dst2", d, d, rng);
  if (config_.relation_head == RelationHead::MulAdd) {
    rel_w_ = store_.add_uniform("rel.weight", {2 * d, kNumRelationClasses}, 2 * d, rng);
    rel_b_ = store_.add_uniform("rel.bias", {kNumRelationClasses}, 2 * d, rng);
  } else {
    rel_u_ = store_.add_uniform("rel.U", {d + 1, kNumRelationClasses, d + 1}, d + 1, rng);
    rel_b_ = store_.add_uniform("rel.bias", {kNumRelationClasses}, d + 1, rng);
  }
}

SegmentInputs SegmentModel::prepare(const Document& doc) const {
  const std::size_t n = doc.size(), E = config_.embedder.width;
  SegmentInputs in;
  std::vector<double> cf(n * E), wf(n * E), marks(n * kNumMarks);
  for (std::size_t i = 0; i < n; ++i) {
    const Segment& s = doc.segment(i);
    if (s.paragraph_pos >= config_.max_positions || s.segment_pos >= config_.max_positions) {
      throw PositionOutOfRange("segment " + std::to_string(i) + " has position (" + std::to_string(s.paragraph_pos) +
                               ", " + std::to_string(s.segment_pos) + ") outside a vocabulary of " +
                               std::to_string(config_.max_positions));
    }
    const auto c = embedder_.mean(char_tokens(s.text));
    const auto w = embedder_.mean(word_tokens(s.text));
    std::copy(c.begin(), c.end(), cf.begin() + static_cast<std::ptrdiff_t>(i * E));
    std::copy(w.begin(), w.end(), wf.begin() + static_cast<std::ptrdiff_t>(i * E));
    const auto bits = s.marks.bits();
    for (std::size_t k = 0; k < kNumMarks; ++k) marks[i * kNumMarks + k] = bits[k];
    in.paragraph.push_back(s.paragraph_pos);
    in.position.push_back(s.segment_pos);
  }
  in.char_features = Tensor::from({n, E}, std::move(cf));
  in.word_features = Tensor::from({n, E}, std::move(wf));
  in.marks = Tensor::from({n, kNumMarks}, std::move(marks));
  return in;
}

std::pair<Tensor, Tensor> SegmentModel::view_features(const SegmentInputs& in) const {
  return {char_view_(in.char_features), word_view_(in.word_features)};
}

Tensor SegmentModel::cross_gate(const Tensor& fc, const Tensor& fw) const {
  if (fc.shape() != fw.shape()) {
    throw ShapeMismatch("cross_gate: shapes " + nn::to_string(fc.shape()) + " and " + nn::to_string(fw.shape()) +
                        " differ");
  }
  const Tensor gc = nn::sigmoid(gate_c_(fc));
  const Tensor gw = nn::sigmoid(gate_w_(fw));
  return fuse_(nn::concat({nn::mul(gc, fw), nn::mul(gw, fc)}));
}

std::pair<Tensor, Tensor> SegmentModel::style_position(const SegmentInputs& in) const {
  const std::size_t n = in.size(), d = config_.d;
  for (std::size_t i = 0; i < n; ++i) {
    if (in.paragraph[i] >= config_.max_positions || in.position[i] >= config_.max_positions) {
      throw PositionOutOfRange("position (" + std::to_string(in.paragraph[i]) + ", " +
                               std::to_string(in.position[i]) + ") outside a vocabulary of " +
                               std::to_string(config_.max_positions));
    }
  }
  if (!config_.use_html) return {Tensor::zeros({n, d}), Tensor::zeros({n, d})};
  Tensor v = nn::matmul(in.marks, mark_embed_);
  Tensor e = nn::concat({nn::embedding_lookup(pos_para_, in.paragraph), nn::embedding_lookup(pos_seg_, in.position)});
  return {v, e};
}

Tensor SegmentModel::style_gate(const Tensor& v, const Tensor& f) const {
  if (v.shape() != f.shape()) {
    throw ShapeMismatch("style_gate: shapes " + nn::to_string(v.shape()) + " and " + nn::to_string(f.shape()) +
                        " differ");
  }
  const Tensor g = nn::sigmoid(style_gate_(nn::concat({v, f})));
  return nn::mul(nn::add_scalar(g, 1.0), f);
}

Tensor SegmentModel::context(const Tensor& x, const nn::Mode& mode) const {
  Tensor h = x;
  for (const auto& l : mlp_layers_) h = l(h, mode);
  for (const auto& l : gru_layers_) h = l(h, mode);
  for (const auto& l : transformer_layers_) h = l(h, mode);
  if (!transformer_layers_.empty()) h = final_norm_(h);
  return h;
}

std::pair<Tensor, Tensor> SegmentModel::component_head(const Tensor& x) const {
  Tensor h = x;
  for (const auto& l : predictor_.hidden) h = nn::relu(l(h));
  Tensor a = nn::softmax(comp_out_(h));
  Tensor c = nn::sigmoid(nn::add_bias(nn::matmul(h, major_w_), major_b_));
  return {a, c};
}

std::pair<Tensor, Tensor> SegmentModel::relation_project(const Tensor& f) const {
  return {src_.second(nn::relu(src_.first(f))), dst_.second(nn::relu(dst_.first(f)))};
}

Tensor SegmentModel::relation_scores(const Tensor& fs, const Tensor& fd) const {
  if (config_.relation_head == RelationHead::MulAdd) return nn::softmax(nn::pairwise_mul_add(fs, fd, rel_w_, rel_b_));
  return nn::softmax(nn::pairwise_biaffine(fs, fd, rel_u_, rel_b_));
}

SegmentOutput SegmentModel::forward(const SegmentInputs& in, const nn::Mode& mode) const {
  const auto [fc, fw] = view_features(in);
  const Tensor f = mode.drop(cross_gate(fc, fw));
  const auto [v, e] = style_position(in);
  const Tensor fhat = style_gate(v, f);
  const Tensor ftilde = context(nn::add(fhat, e), mode);
  auto [a, c] = component_head(ftilde);
  const auto [fs, fd] = relation_project(config_.relation_input == RelationInput::Contextual ? ftilde : f);
  return {a, c, relation_scores(fs, fd)};
}

StructurePrediction SegmentModel::to_prediction(const SegmentOutput& out) {
  const std::size_t n = out.component.dim(0);
  StructurePrediction p;
  p.component.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < kNumComponentClasses; ++k) p.component[i][k] = out.component.at(i, k);
  }
  p.major.assign(out.major.values().begin(), out.major.values().end());
  p.relations = RelationProbs(n, std::vector<double>(out.relation.values().begin(), out.relation.values().end()));
  return p;
}

StructurePrediction SegmentModel::predict(const Document& doc) const {
  nn::NoGradGuard guard;
  return to_prediction(forward(prepare(doc)));
}

void SegmentModel::save(const std::filesystem::path& dir, const nlohmann::json& extra) const {
  std::filesystem::create_directories(dir);
  save_parameters(store_, dir / "params.bin");
  nlohmann::json manifest = {{"format", kFormatVersion},
                             {"config", config_.to_json()},
                             {"config_hash", config_.hash()},
                             {"parameters", store_.num_values()}};
  if (!extra.is_null()) manifest["extra"] = extra;
  write_json(dir / "manifest.json", manifest);
}

SegmentModel SegmentModel::load(const std::filesystem::path& dir) {
  const nlohmann::json manifest = read_json(dir / "manifest.json");
  if (manifest.value("format", 0) != kFormatVersion) throw CheckpointError("unsupported checkpoint format");
  ModelConfig config = ModelConfig::from_json(manifest.at("config"));
  if (manifest.value("config_hash", std::string()) != config.hash()) {
    throw ConfigMismatch("checkpoint config hash " + manifest.value("config_hash", std::string()) +
                         " does not match its config (" + config.hash() + ")");
  }
  SegmentModel model(config, 0);
  load_parameters(model.store_, dir / "params.bin");
  return model;
}

}  // namespace argmine
