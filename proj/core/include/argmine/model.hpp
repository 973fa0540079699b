#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/document.hpp"
#include "argmine/embedding.hpp"
#include "argmine/labels.hpp"
#include "argmine/layers.hpp"

namespace argmine {

enum class EncoderKind { MLP, BiGRU, Transformer };
enum class RelationHead { MulAdd, Biaffine };
/// Which features feed the relation projections: the fused pre-context
/// features or the context encoder output.
enum class RelationInput { Fused, Contextual };

std::string_view to_string(EncoderKind k);
std::string_view to_string(RelationHead h);
std::string_view to_string(RelationInput r);
EncoderKind parse_encoder(std::string_view s);
RelationHead parse_relation_head(std::string_view s);
RelationInput parse_relation_input(std::string_view s);

struct ModelConfig {
  std::size_t d = 384;
  std::size_t max_positions = kDefaultMaxSegments;  // N
  EncoderKind encoder = EncoderKind::BiGRU;
  RelationHead relation_head = RelationHead::MulAdd;
  RelationInput relation_input = RelationInput::Contextual;
  bool use_html = true;
  std::size_t layers = 3;
  std::size_t heads = 4;
  std::size_t predictor_layers = 3;
  std::size_t ffn_multiplier = 4;
  double dropout = 0.4;
  HashEmbedderConfig embedder;

  void validate() const;  // throws InvalidConfig
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
  /// FNV-1a of the canonical JSON, hex encoded.
  std::string hash() const;
};

/// Model-ready view of a document. Frozen features carry no gradient, so
/// they can be computed once and reused across epochs.
struct SegmentInputs {
  nn::Tensor char_features;  // n x E
  nn::Tensor word_features;  // n x E
  nn::Tensor marks;          // n x 6
  std::vector<std::size_t> paragraph;
  std::vector<std::size_t> position;

  std::size_t size() const { return paragraph.size(); }
};

struct SegmentOutput {
  nn::Tensor component;  // n x 3 probabilities
  nn::Tensor major;      // n confidences
  nn::Tensor relation;   // n*n x 4 probabilities, row i*n+j
};

/// Segment-level model: view projections, cross gate, style/position
/// encoding, style gate, context encoder, component head and relation head.
class SegmentModel {
 public:
  SegmentModel(ModelConfig config, std::uint64_t seed);
  SegmentModel(const SegmentModel&) = delete;
  SegmentModel& operator=(const SegmentModel&) = delete;
  SegmentModel(SegmentModel&&) = default;
  SegmentModel& operator=(SegmentModel&&) = default;

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  const HashEmbedder& embedder() const { return embedder_; }

  /// Throws PositionOutOfRange when a position is >= N.
  SegmentInputs prepare(const Document& doc) const;

  /// Full forward pass. `mode.rng` null means evaluation.
  SegmentOutput forward(const SegmentInputs& inputs, const nn::Mode& mode) const;
  SegmentOutput forward(const SegmentInputs& inputs) const { return forward(inputs, eval_mode()); }
  nn::Mode eval_mode() const { return {}; }
  nn::Mode train_mode(Rng& rng) const { return {&rng, config_.dropout}; }

  // Individual stages, exposed for testing and inspection.
  std::pair<nn::Tensor, nn::Tensor> view_features(const SegmentInputs& inputs) const;
  nn::Tensor cross_gate(const nn::Tensor& fc, const nn::Tensor& fw) const;
  /// (v, e); both zero when use_html is off.
  std::pair<nn::Tensor, nn::Tensor> style_position(const SegmentInputs& inputs) const;
  nn::Tensor style_gate(const nn::Tensor& v, const nn::Tensor& f) const;
  nn::Tensor context(const nn::Tensor& x, const nn::Mode& mode) const;
  std::pair<nn::Tensor, nn::Tensor> component_head(const nn::Tensor& h) const;
  std::pair<nn::Tensor, nn::Tensor> relation_project(const nn::Tensor& f) const;
  nn::Tensor relation_scores(const nn::Tensor& fs, const nn::Tensor& fd) const;

  StructurePrediction predict(const Document& doc) const;
  static StructurePrediction to_prediction(const SegmentOutput& out);

  void save(const std::filesystem::path& dir, const nlohmann::json& extra = {}) const;
  /// Throws CheckpointError, or ConfigMismatch when the stored hash disagrees.
  static SegmentModel load(const std::filesystem::path& dir);

 private:
  struct Mlp {
    std::vector<nn::Linear> hidden;
  };
  struct Projection {
    nn::Linear first, second;
  };

  ModelConfig config_;
  HashEmbedder embedder_;
  nn::ParameterStore store_;

  nn::Linear char_view_, word_view_;
  nn::Linear gate_c_, gate_w_, fuse_;
  nn::Tensor pos_para_, pos_seg_, mark_embed_;
  nn::Linear style_gate_;
  std::vector<nn::FeedForward> mlp_layers_;
  std::vector<nn::BiGruLayer> gru_layers_;
  std::vector<nn::TransformerLayer> transformer_layers_;
  nn::LayerNorm final_norm_;
  Mlp predictor_;
  nn::Linear comp_out_;
  nn::Tensor major_w_, major_b_;
  Projection src_, dst_;
  nn::Tensor rel_w_, rel_u_, rel_b_;
};

}  // namespace argmine
