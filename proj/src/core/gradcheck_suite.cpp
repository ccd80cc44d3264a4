// SPDX-License-Identifier: Apache-2.0
#include "core/gradcheck_suite.hpp"

#include <chrono>
#include <random>

#include "core/synth.hpp"

namespace ordino {

namespace {

constexpr nn::Index kArgnnDim = 3;
constexpr nn::Index kEncDim = 4;

std::map<RepName, FeatureSequence> random_features(std::size_t length, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> token(0, kPianoKeys - 1);
  auto random_matrix = [&](nn::Index rows, nn::Index cols) {
    nn::Matrix m(rows, cols);
    for (nn::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  std::vector<Hand> hands(length);
  for (std::size_t t = 0; t < length; ++t) hands[t] = (rng() & 1U) ? Hand::Right : Hand::Left;
  hands[0] = Hand::Right;
  hands[1] = Hand::Left;
  nn::Index right = 0;
  for (Hand h : hands) right += h == Hand::Right ? 1 : 0;
  const auto n = static_cast<nn::Index>(length);

  std::map<RepName, FeatureSequence> f;
  FeatureSequence pitch;
  pitch.rep = RepName::Pitch;
  pitch.branches.push_back(nn::Matrix(n, 1));
  for (nn::Index t = 0; t < n; ++t) pitch.branches[0](t, 0) = token(rng);
  pitch.hand_tags = hands;
  f[RepName::Pitch] = std::move(pitch);
  f[RepName::Argnn] = embedding_sequence(
      RepName::Argnn, {random_matrix(right, kArgnnDim), random_matrix(n - right, kArgnnDim)}, hands);
  f[RepName::Virtuoso] = embedding_sequence(RepName::Virtuoso, {random_matrix(n, kVirtuosoDim)});
  f[RepName::VirtuosoEnc] = embedding_sequence(RepName::VirtuosoEnc, {random_matrix(n, kEncDim)});
  return f;
}

}  // namespace

std::vector<GradCheckCase> gradcheck_cases() {
  std::vector<std::pair<RepName, Fusion>> models{
      {RepName::Pitch, Fusion::None},   {RepName::Argnn, Fusion::None},
      {RepName::Virtuoso, Fusion::None}, {RepName::VirtuosoEnc, Fusion::None},
      {RepName::Fused, Fusion::Sync},   {RepName::Fused, Fusion::Concat},
      {RepName::Fused, Fusion::Sum},    {RepName::Fused, Fusion::Att},
      {RepName::Fused, Fusion::Int}};
  std::vector<GradCheckCase> out;
  for (const auto& [rep, fusion] : models) {
    for (HeadKind head : {HeadKind::Nll, HeadKind::RegClass, HeadKind::MSmooth, HeadKind::Ordinal,
                          HeadKind::Coral}) {
      GradCheckCase c;
      c.rep = rep;
      c.fusion = fusion;
      c.head = head;
      c.name = std::string(rep_name_string(rep)) + "/" + std::string(fusion_string(fusion)) + "/" +
               std::string(head_kind_string(head));
      out.push_back(std::move(c));
    }
  }
  return out;
}

std::vector<GradCheckCase> run_gradcheck_suite(const GradCheckSuiteOptions& options) {
  std::vector<GradCheckCase> results;
  std::uint64_t index = 0;
  for (auto c : gradcheck_cases()) {
    ++index;
    if (!options.filter.empty() && c.name.find(options.filter) == std::string::npos) continue;
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(hash_combine(options.seed, index));

    ClassifierConfig cfg;
    cfg.rep = c.rep;
    cfg.fusion = c.fusion;
    cfg.head = c.head;
    cfg.num_classes = 4;
    cfg.gru.hidden_dim = options.hidden;
    cfg.gru.num_layers = options.layers;
    cfg.gru.inter_layer_dropout = 0.2;
    cfg.pitch_embed_dim = 3;
    cfg.int_heads = 2;
    cfg.int_head_dim = 2;
    cfg.argnn_dim = kArgnnDim;
    cfg.virtuoso_enc_dim = kEncDim;
    cfg.seed = hash_combine(options.seed, index + 1000);
    Classifier model(cfg);

    const std::size_t lo = std::min<std::size_t>(3, options.max_length);
    std::uniform_int_distribution<std::size_t> length(lo, std::max(lo, options.max_length));
    std::vector<ModelInput> inputs;
    for (int s = 0; s < 2; ++s) inputs.push_back(make_model_input(cfg, random_features(length(rng), rng)));
    std::vector<BatchSample> batch{{&inputs[0], 1, rng()}, {&inputs[1], 3, rng()}};
    const std::vector<double> weights{1.3, 0.7, 0.9, 1.1};
    LossOptions loss_options;
    loss_options.alpha = 0.7;

    c.report = nn::grad_check(
        model.params(),
        [&](bool with_gradient) {
          return batch_loss(model, batch, weights, loss_options, nn::Mode::Train, with_gradient);
        },
        options.check);
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(std::move(c));
  }
  return results;
}

nlohmann::json gradcheck_to_json(const std::vector<GradCheckCase>& cases, double tolerance) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& c : cases) {
    out.push_back({{"case", c.name},
                   {"max_rel_error", c.report.max_rel_error},
                   {"worst_parameter", c.report.worst_parameter},
                   {"checked_entries", c.report.checked_entries},
                   {"total_entries", c.report.total_entries},
                   {"failures", c.report.failure_count},
                   {"passed", c.report.passed() && c.report.max_rel_error <= tolerance}});
  }
  return out;
}

}  // namespace ordino
