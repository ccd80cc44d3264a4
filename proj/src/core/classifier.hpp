// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/features.hpp"
#include "core/losses.hpp"
#include "core/nn/autoint.hpp"
#include "core/nn/layers.hpp"

namespace ordino {

enum class Fusion { None, Sync, Concat, Sum, Att, Int };

std::string_view fusion_string(Fusion fusion);
Fusion parse_fusion(std::string_view text);  // none | sync | concat | sum | att | int

struct ClassifierConfig {
  RepName rep = RepName::Pitch;
  int num_classes = 9;
  HeadKind head = HeadKind::Nll;
  Fusion fusion = Fusion::None;
  // Component representations of a fused model.
  std::vector<RepName> fusion_inputs{RepName::Argnn, RepName::Virtuoso};
  nn::GruLayerConfig gru;  // input_dim is derived per branch
  nn::Index pitch_embed_dim = 32;
  int int_heads = 2;
  nn::Index int_head_dim = 0;  // 0 = hidden_dim / int_heads
  // Per-note widths of the embedding representations.
  nn::Index argnn_dim = 0;
  nn::Index virtuoso_enc_dim = 0;
  std::uint64_t seed = 0;
};

// Throws ConfigError when the rep/fusion/branch combination is not buildable.
void validate(const ClassifierConfig& config);

// One network branch: which representation (and hand, for argnn) feeds it.
struct BranchSpec {
  RepName source = RepName::Pitch;
  std::optional<Hand> hand;
  nn::Index input_dim = 0;
  bool tokens = false;  // pitch branches embed token indices first
};

std::vector<BranchSpec> branch_layout(const ClassifierConfig& config);

// Feature-major inputs, one matrix per branch (input_dim x T_b, or 1 x T of pitch
// tokens), with the canonical note index of every column.
struct ModelInput {
  std::vector<nn::Matrix> branches;
  std::vector<std::vector<std::size_t>> note_index;
};

// Builds the inputs the configured network expects from per-representation features.
// Errors: ConfigError (missing representation), LengthMismatch, ShapeMismatch.
ModelInput make_model_input(const ClassifierConfig& config,
                            const std::map<RepName, FeatureSequence>& features);

// Restricts every representation to canonical notes [start, start + length).
std::map<RepName, FeatureSequence> slice_features(const std::map<RepName, FeatureSequence>& features,
                                                  std::size_t start, std::size_t length);

// Parameter-free fusions over equal-width branch summaries. Errors: WidthMismatch.
nn::Vector fuse_sum(const std::vector<nn::Vector>& summaries);
nn::Vector fuse_concat(const std::vector<nn::Vector>& summaries);

class Classifier {
 public:
  struct Trace {
    std::vector<nn::Matrix> gru_inputs;
    std::vector<nn::GruStack::Cache> gru;
    std::vector<nn::ContextAttention::Cache> attention;
    std::vector<nn::Vector> summaries;
    std::vector<bool> empty;
    nn::ContextAttention::Cache fusion_attention;
    nn::AutoIntBlock::Cache fusion_int;
    nn::Vector fc_input;
  };

  explicit Classifier(ClassifierConfig config);

  const ClassifierConfig& config() const { return config_; }
  const std::vector<BranchSpec>& branches() const { return layout_; }
  nn::ParameterStore& params() { return store_; }
  const nn::ParameterStore& params() const { return store_; }

  void initialize(std::uint64_t seed) { store_.initialize(seed); }
  void zero_parameters() { store_.fill_zero(); }

  HeadOutput forward(const ModelInput& input, nn::Mode mode, std::uint64_t dropout_seed,
                     Trace* trace) const;
  // Accumulates parameter gradients for dL/d(head outputs) = grad.
  void backward(const ModelInput& input, const Trace& trace, const HeadOutput& grad);

  // Fuses per-branch summaries according to the configured strategy.
  nn::Vector fuse(const std::vector<nn::Vector>& summaries, Trace* trace) const;

  nn::Index summary_dim() const { return config_.gru.hidden_dim; }
  nn::Index fc_input_dim() const { return fc_in_; }

 private:
  void check_input(const ModelInput& input) const;
  std::vector<nn::Vector> fuse_backward(const Trace& trace, const nn::Vector& d_fused);

  ClassifierConfig config_;
  std::vector<BranchSpec> layout_;
  nn::ParameterStore store_;
  std::vector<std::optional<nn::Embedding>> embed_;
  std::vector<nn::GruStack> gru_;
  std::vector<nn::ContextAttention> attention_;
  std::optional<nn::ContextAttention> fusion_attention_;
  std::optional<nn::AutoIntBlock> fusion_int_;
  nn::Index fc_in_ = 0;
  nn::Linear fc_;
  std::optional<nn::Linear> fc_scalar_;
  nn::ParamId coral_bias_ = 0;
};

// Mean head loss over a batch; with_gradient zeroes the model's gradients first and
// accumulates dL/dtheta of that mean. Sample i uses dropout seed seeds[i].
struct BatchSample {
  const ModelInput* input = nullptr;
  int label = 1;
  std::uint64_t dropout_seed = 0;
};

double batch_loss(Classifier& model, const std::vector<BatchSample>& batch,
                  const std::vector<double>& class_weights, const LossOptions& options,
                  nn::Mode mode, bool with_gradient);

}  // namespace ordino
