// SPDX-License-Identifier: Apache-2.0
#include "core/classifier.hpp"

#include <algorithm>
#include <set>

#include "core/error.hpp"
#include "core/synth.hpp"

namespace ordino {

using nn::Index;
using nn::Matrix;
using nn::Vector;

std::string_view fusion_string(Fusion fusion) {
  switch (fusion) {
    case Fusion::None: return "none";
    case Fusion::Sync: return "sync";
    case Fusion::Concat: return "concat";
    case Fusion::Sum: return "sum";
    case Fusion::Att: return "att";
    case Fusion::Int: return "int";
  }
  return "?";
}

Fusion parse_fusion(std::string_view text) {
  for (Fusion f : {Fusion::None, Fusion::Sync, Fusion::Concat, Fusion::Sum, Fusion::Att,
                   Fusion::Int}) {
    if (fusion_string(f) == text) return f;
  }
  fail(ErrorCode::ConfigError, "unknown fusion '" + std::string(text) +
                                   "' (expected none|sync|concat|sum|att|int)");
}

namespace {

Index rep_width(const ClassifierConfig& c, RepName rep) {
  switch (rep) {
    case RepName::Virtuoso: return kVirtuosoDim;
    case RepName::VirtuosoEnc: return c.virtuoso_enc_dim;
    case RepName::Argnn: return c.argnn_dim;
    case RepName::Pitch: return 1;
    case RepName::Fused: {
      Index width = 0;
      for (RepName r : c.fusion_inputs) width += r == RepName::Fused ? 0 : rep_width(c, r);
      return width;
    }
  }
  return 0;
}

void single_rep_layout(const ClassifierConfig& c, RepName rep, std::vector<BranchSpec>& out) {
  switch (rep) {
    case RepName::Pitch:
      out.push_back({RepName::Pitch, std::nullopt, 1, true});
      break;
    case RepName::Argnn:
      out.push_back({RepName::Argnn, Hand::Right, c.argnn_dim, false});
      out.push_back({RepName::Argnn, Hand::Left, c.argnn_dim, false});
      break;
    case RepName::Virtuoso:
    case RepName::VirtuosoEnc:
      out.push_back({rep, std::nullopt, rep_width(c, rep), false});
      break;
    case RepName::Fused:
      fail(ErrorCode::ConfigError, "fused is not a component representation");
  }
}

const FeatureSequence& lookup(const std::map<RepName, FeatureSequence>& features, RepName rep) {
  auto it = features.find(rep);
  if (it == features.end()) {
    fail(ErrorCode::ConfigError, "missing " + std::string(rep_name_string(rep)) + " features");
  }
  return it->second;
}

void check_width(const Matrix& m, Index expected, RepName rep) {
  if (m.rows() > 0 && m.cols() != expected) {
    fail(ErrorCode::ShapeMismatch, std::string(rep_name_string(rep)) + " features have width " +
                                       std::to_string(m.cols()) + ", model expects " +
                                       std::to_string(expected));
  }
}

void append_rep_input(const ClassifierConfig& c, RepName rep, const FeatureSequence& seq,
                      ModelInput& in) {
  if (rep == RepName::Argnn) {
    if (seq.branches.size() != 2) fail(ErrorCode::ShapeMismatch, "argnn needs two hand branches");
    std::vector<std::size_t> right;
    std::vector<std::size_t> left;
    for (std::size_t t = 0; t < seq.hand_tags.size(); ++t) {
      (seq.hand_tags[t] == Hand::Right ? right : left).push_back(t);
    }
    for (int b = 0; b < 2; ++b) {
      check_width(seq.branches[static_cast<std::size_t>(b)], c.argnn_dim, rep);
      auto& idx = b == 0 ? right : left;
      if (static_cast<std::size_t>(seq.branches[static_cast<std::size_t>(b)].rows()) != idx.size()) {
        fail(ErrorCode::LengthMismatch, "argnn rows do not match hand tags");
      }
      Matrix x = seq.branches[static_cast<std::size_t>(b)].transpose();
      if (x.cols() == 0) x.resize(c.argnn_dim, 0);
      in.branches.push_back(std::move(x));
      in.note_index.push_back(std::move(idx));
    }
    return;
  }
  if (seq.branches.size() != 1) fail(ErrorCode::ShapeMismatch, "expected a single-branch sequence");
  check_width(seq.branches[0], rep_width(c, rep), rep);
  in.branches.push_back(seq.branches[0].transpose());
  std::vector<std::size_t> idx(static_cast<std::size_t>(seq.branches[0].rows()));
  for (std::size_t t = 0; t < idx.size(); ++t) idx[t] = t;
  in.note_index.push_back(std::move(idx));
}

Vector concat_vectors(const std::vector<Vector>& parts) {
  Index total = 0;
  for (const auto& p : parts) total += p.size();
  Vector out(total);
  Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

void check_equal_widths(const std::vector<Vector>& parts) {
  if (parts.empty()) fail(ErrorCode::ShapeMismatch, "no branch outputs to fuse");
  for (const auto& p : parts) {
    if (p.size() != parts.front().size()) {
      fail(ErrorCode::WidthMismatch, "branch widths differ (" + std::to_string(parts.front().size()) +
                                         " vs " + std::to_string(p.size()) + ")");
    }
  }
}

Matrix stack_columns(const std::vector<Vector>& parts) {
  Matrix m(parts.front().size(), static_cast<Index>(parts.size()));
  for (std::size_t b = 0; b < parts.size(); ++b) m.col(static_cast<Index>(b)) = parts[b];
  return m;
}

std::string branch_name(const BranchSpec& spec, std::size_t index) {
  std::string name = "b" + std::to_string(index) + "." + std::string(rep_name_string(spec.source));
  if (spec.hand) name += *spec.hand == Hand::Right ? ".rh" : ".lh";
  return name;
}

}  // namespace

void validate(const ClassifierConfig& c) {
  if (c.num_classes < 2) fail(ErrorCode::ConfigError, "K must be at least 2");
  if ((c.rep == RepName::Fused) != (c.fusion != Fusion::None)) {
    fail(ErrorCode::ConfigError, "fusion must be set exactly when rep is fused");
  }
  if (c.gru.hidden_dim < 1 || c.gru.num_layers < 1) fail(ErrorCode::ConfigError, "invalid GRU size");
  if (c.pitch_embed_dim < 1) fail(ErrorCode::ConfigError, "pitch_embed_dim must be positive");
  std::vector<RepName> reps{c.rep};
  if (c.rep == RepName::Fused) {
    reps = c.fusion_inputs;
    if (reps.size() < 2) fail(ErrorCode::ConfigError, "fusion needs at least two inputs");
    std::set<RepName> seen(reps.begin(), reps.end());
    if (seen.size() != reps.size() || seen.count(RepName::Fused)) {
      fail(ErrorCode::ConfigError, "fusion inputs must be distinct component representations");
    }
    if (c.fusion == Fusion::Sync && seen.count(RepName::Pitch)) {
      fail(ErrorCode::ConfigError, "sync fusion concatenates embeddings; pitch tokens cannot take part");
    }
    if (c.fusion == Fusion::Int && c.int_heads < 1) fail(ErrorCode::ConfigError, "int_heads must be >= 1");
  }
  for (RepName r : reps) {
    if (r != RepName::Pitch && rep_width(c, r) < 1) {
      fail(ErrorCode::ConfigError, std::string(rep_name_string(r)) + " input width is unknown");
    }
  }
}

std::vector<BranchSpec> branch_layout(const ClassifierConfig& c) {
  validate(c);
  std::vector<BranchSpec> out;
  if (c.rep != RepName::Fused) {
    single_rep_layout(c, c.rep, out);
  } else if (c.fusion == Fusion::Sync) {
    out.push_back({RepName::Fused, std::nullopt, rep_width(c, RepName::Fused), false});
  } else {
    for (RepName r : c.fusion_inputs) single_rep_layout(c, r, out);
  }
  return out;
}

ModelInput make_model_input(const ClassifierConfig& c,
                            const std::map<RepName, FeatureSequence>& features) {
  validate(c);
  ModelInput in;
  if (c.rep != RepName::Fused) {
    append_rep_input(c, c.rep, lookup(features, c.rep), in);
    return in;
  }
  if (c.fusion == Fusion::Sync) {
    FeatureSequence joined = lookup(features, c.fusion_inputs.front());
    for (std::size_t i = 0; i < c.fusion_inputs.size(); ++i) {
      const auto& seq = lookup(features, c.fusion_inputs[i]);
      check_width(flatten_branches(seq), rep_width(c, c.fusion_inputs[i]), c.fusion_inputs[i]);
      if (i > 0) joined = align(joined, seq);
    }
    append_rep_input(c, RepName::Fused, joined, in);
    return in;
  }
  std::size_t length = 0;
  for (std::size_t i = 0; i < c.fusion_inputs.size(); ++i) {
    const auto& seq = lookup(features, c.fusion_inputs[i]);
    if (i == 0) length = seq.length();
    if (seq.length() != length) {
      fail(ErrorCode::LengthMismatch, "fusion inputs cover different note counts (" +
                                          std::to_string(length) + " vs " +
                                          std::to_string(seq.length()) + ")");
    }
    append_rep_input(c, c.fusion_inputs[i], seq, in);
  }
  return in;
}

std::map<RepName, FeatureSequence> slice_features(const std::map<RepName, FeatureSequence>& features,
                                                  std::size_t start, std::size_t length) {
  std::map<RepName, FeatureSequence> out;
  for (const auto& [rep, seq] : features) out.emplace(rep, slice(seq, start, length));
  return out;
}

Vector fuse_sum(const std::vector<Vector>& summaries) {
  check_equal_widths(summaries);
  Vector out = Vector::Zero(summaries.front().size());
  for (const auto& s : summaries) out += s;
  return out;
}

Vector fuse_concat(const std::vector<Vector>& summaries) {
  if (summaries.empty()) fail(ErrorCode::ShapeMismatch, "no branch outputs to fuse");
  return concat_vectors(summaries);
}

// ---------------------------------------------------------------------------

Classifier::Classifier(ClassifierConfig config) : config_(std::move(config)) {
  layout_ = branch_layout(config_);
  const Index h = config_.gru.hidden_dim;
  for (std::size_t b = 0; b < layout_.size(); ++b) {
    const auto& spec = layout_[b];
    const std::string name = branch_name(spec, b);
    nn::GruLayerConfig gru = config_.gru;
    if (spec.tokens) {
      embed_.push_back(nn::Embedding::create(store_, name + ".embed", kPianoKeys, config_.pitch_embed_dim));
      gru.input_dim = config_.pitch_embed_dim;
    } else {
      embed_.push_back(std::nullopt);
      gru.input_dim = spec.input_dim;
    }
    gru_.push_back(nn::GruStack::create(store_, name + ".gru", gru));
    attention_.push_back(nn::ContextAttention::create(store_, name + ".att", h));
  }
  const Index branches = static_cast<Index>(layout_.size());
  switch (config_.fusion) {
    case Fusion::None:
    case Fusion::Sync:
    case Fusion::Concat:
      fc_in_ = branches * h;
      break;
    case Fusion::Sum:
      fc_in_ = h;
      break;
    case Fusion::Att:
      fusion_attention_ = nn::ContextAttention::create(store_, "fusion.att", h);
      fc_in_ = h;
      break;
    case Fusion::Int: {
      const Index head_dim = config_.int_head_dim > 0
                                 ? config_.int_head_dim
                                 : std::max<Index>(1, h / config_.int_heads);
      fusion_int_ = nn::AutoIntBlock::create(store_, "fusion.int", h, config_.int_heads, head_dim);
      fc_in_ = fusion_int_->output_dim(branches);
      break;
    }
  }
  const Index k = config_.num_classes;
  if (config_.head == HeadKind::Coral) {
    fc_ = nn::Linear::create(store_, "head.fc", fc_in_, 1, false);
    coral_bias_ = store_.add("head.coral_bias", k - 1, 1, nn::InitKind::Zero, 1, k - 1);
  } else {
    fc_ = nn::Linear::create(store_, "head.fc", fc_in_, k);
    if (config_.head == HeadKind::RegClass) {
      fc_scalar_ = nn::Linear::create(store_, "head.fc_scalar", fc_in_, 1);
    }
  }
  store_.initialize(config_.seed);
}

void Classifier::check_input(const ModelInput& input) const {
  if (input.branches.size() != layout_.size()) {
    fail(ErrorCode::ShapeMismatch, "model expects " + std::to_string(layout_.size()) +
                                       " branch input(s), got " + std::to_string(input.branches.size()));
  }
  for (std::size_t b = 0; b < layout_.size(); ++b) {
    const Index rows = input.branches[b].rows();
    if (input.branches[b].cols() > 0 && rows != layout_[b].input_dim) {
      fail(ErrorCode::ShapeMismatch, "branch " + std::to_string(b) + " expects width " +
                                         std::to_string(layout_[b].input_dim) + ", got " +
                                         std::to_string(rows));
    }
  }
}

Vector Classifier::fuse(const std::vector<Vector>& s, Trace* trace) const {
  switch (config_.fusion) {
    case Fusion::None:
    case Fusion::Sync:
    case Fusion::Concat:
      return fuse_concat(s);
    case Fusion::Sum:
      return fuse_sum(s);
    case Fusion::Att:
      check_equal_widths(s);
      if (s.front().size() != config_.gru.hidden_dim) fail(ErrorCode::WidthMismatch, "att fusion width");
      return fusion_attention_->forward(store_, stack_columns(s), trace ? &trace->fusion_attention : nullptr);
    case Fusion::Int:
      check_equal_widths(s);
      return fusion_int_->forward(store_, stack_columns(s), trace ? &trace->fusion_int : nullptr);
  }
  return {};
}

std::vector<Vector> Classifier::fuse_backward(const Trace& trace, const Vector& d) {
  const std::size_t nb = layout_.size();
  const Index h = config_.gru.hidden_dim;
  std::vector<Vector> out(nb);
  switch (config_.fusion) {
    case Fusion::None:
    case Fusion::Sync:
    case Fusion::Concat:
      for (std::size_t b = 0; b < nb; ++b) out[b] = d.segment(static_cast<Index>(b) * h, h);
      break;
    case Fusion::Sum:
      for (auto& o : out) o = d;
      break;
    case Fusion::Att: {
      const Matrix ds = fusion_attention_->backward(store_, trace.fusion_attention, d);
      for (std::size_t b = 0; b < nb; ++b) out[b] = ds.col(static_cast<Index>(b));
      break;
    }
    case Fusion::Int: {
      const Matrix ds = fusion_int_->backward(store_, trace.fusion_int, d);
      for (std::size_t b = 0; b < nb; ++b) out[b] = ds.col(static_cast<Index>(b));
      break;
    }
  }
  return out;
}

HeadOutput Classifier::forward(const ModelInput& input, nn::Mode mode, std::uint64_t dropout_seed,
                               Trace* trace) const {
  check_input(input);
  const std::size_t nb = layout_.size();
  Trace local;
  Trace& t = trace ? *trace : local;
  t.gru_inputs.assign(nb, Matrix());
  t.gru.assign(nb, {});
  t.attention.assign(nb, {});
  t.summaries.assign(nb, Vector());
  t.empty.assign(nb, false);
  for (std::size_t b = 0; b < nb; ++b) {
    const Matrix& x = input.branches[b];
    if (x.cols() == 0) {
      warn("branch " + branch_name(layout_[b], b) + " has no notes; using a zero summary");
      t.empty[b] = true;
      t.summaries[b] = Vector::Zero(config_.gru.hidden_dim);
      continue;
    }
    t.gru_inputs[b] = embed_[b] ? embed_[b]->forward(store_, x) : x;
    const Matrix states = gru_[b].forward(store_, t.gru_inputs[b], mode,
                                          hash_combine(dropout_seed, b), &t.gru[b]);
    t.summaries[b] = attention_[b].forward(store_, states, &t.attention[b]);
  }
  t.fc_input = fuse(t.summaries, &t);

  HeadOutput out;
  out.kind = config_.head;
  out.num_classes = config_.num_classes;
  if (config_.head == HeadKind::Coral) {
    const double g = fc_.forward(store_, t.fc_input)(0);
    out.logits = store_.value(coral_bias_).col(0).array() + g;
  } else {
    out.logits = fc_.forward(store_, t.fc_input);
    if (fc_scalar_) out.scalar = fc_scalar_->forward(store_, t.fc_input)(0);
  }
  return out;
}

void Classifier::backward(const ModelInput& input, const Trace& t, const HeadOutput& grad) {
  Vector d_fc;
  if (config_.head == HeadKind::Coral) {
    store_.grad(coral_bias_).col(0) += grad.logits;
    Vector dg(1);
    dg(0) = grad.logits.sum();
    d_fc = fc_.backward(store_, t.fc_input, dg);
  } else {
    d_fc = fc_.backward(store_, t.fc_input, grad.logits);
    if (fc_scalar_) {
      Vector ds(1);
      ds(0) = grad.scalar;
      d_fc += fc_scalar_->backward(store_, t.fc_input, ds);
    }
  }
  const std::vector<Vector> d_summary = fuse_backward(t, d_fc);
  for (std::size_t b = 0; b < layout_.size(); ++b) {
    if (t.empty[b]) continue;
    const Matrix d_states = attention_[b].backward(store_, t.attention[b], d_summary[b]);
    const Matrix d_x = gru_[b].backward(store_, t.gru[b], d_states);
    if (embed_[b]) embed_[b]->backward(store_, input.branches[b], d_x);
  }
}

double batch_loss(Classifier& model, const std::vector<BatchSample>& batch,
                  const std::vector<double>& class_weights, const LossOptions& options,
                  nn::Mode mode, bool with_gradient) {
  if (batch.empty()) fail(ErrorCode::InvalidArgument, "empty batch");
  if (with_gradient) model.params().zero_grad();
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  Classifier::Trace trace;
  HeadOutput grad;
  for (const auto& s : batch) {
    const HeadOutput out = model.forward(*s.input, mode, s.dropout_seed, &trace);
    const double w = class_weights.empty() ? 1.0 : class_weights.at(static_cast<std::size_t>(s.label - 1));
    total += head_sample_loss(out, s.label, w, options, with_gradient ? &grad : nullptr);
    if (with_gradient) {
      grad.logits *= scale;
      grad.scalar *= scale;
      model.backward(*s.input, trace, grad);
    }
  }
  return total * scale;
}

}  // namespace ordino
