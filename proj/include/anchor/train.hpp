// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   train.hpp
 * @brief  Losses, Adam with exponential learning-rate decay, and the
 *         teacher-forced training loop.
 */
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "anchor/augment.hpp"
#include "anchor/config.hpp"
#include "anchor/decode.hpp"
#include "anchor/eval.hpp"
#include "anchor/model.hpp"

namespace anchor {

struct TrainConfig {
  double lambda = 0.0;
  double w1 = 0.6;  // weight on frames labelled 1 (desired speaker)
  double w0 = 1.0;  // weight on frames labelled 0 (background)
  double lr = 0.0008;
  double decay = 0.85;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 5.0;  // global gradient norm; 0 disables

  void validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("train: lambda must be in [0,1]");
    if (!(w1 > 0.0 && w0 > 0.0)) throw ConfigError("train: mask weights must be positive");
    if (!(lr > 0.0)) throw ConfigError("train: learning rate must be positive");
    if (!(decay > 0.0)) throw ConfigError("train: decay must be positive");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
      throw ConfigError("train: Adam betas must be in [0,1)");
    if (!(eps > 0.0)) throw ConfigError("train: eps must be positive");
    if (!(clip >= 0.0)) throw ConfigError("train: clip must be >= 0");
  }

  static const std::set<std::string> &keys() {
    static const std::set<std::string> k{"lambda", "w1", "w0", "lr", "decay", "epochs",
                                         "batch_size", "seed", "beta1", "beta2", "eps",
                                         "clip"};
    return k;
  }

  /// Reads `train.`-section keys.
  static TrainConfig from(const KeyValues &kv) {
    kv.check_known(keys(), "train");
    TrainConfig c;
    c.lambda = kv.get_double("lambda", c.lambda);
    c.w1 = kv.get_double("w1", c.w1);
    c.w0 = kv.get_double("w0", c.w0);
    c.lr = kv.get_double("lr", c.lr);
    c.decay = kv.get_double("decay", c.decay);
    c.epochs = kv.get_size("epochs", c.epochs);
    c.batch_size = kv.get_size("batch_size", c.batch_size);
    c.seed = kv.get_u64("seed", c.seed);
    c.beta1 = kv.get_double("beta1", c.beta1);
    c.beta2 = kv.get_double("beta2", c.beta2);
    c.eps = kv.get_double("eps", c.eps);
    c.clip = kv.get_double("clip", c.clip);
    c.validate();
    return c;
  }

  KeyValues to_key_values() const {
    KeyValues kv;
    kv.set("lambda", format_double(lambda));
    kv.set("w1", format_double(w1));
    kv.set("w0", format_double(w0));
    kv.set("lr", format_double(lr));
    kv.set("decay", format_double(decay));
    kv.set("epochs", std::to_string(epochs));
    kv.set("batch_size", std::to_string(batch_size));
    kv.set("seed", std::to_string(seed));
    kv.set("beta1", format_double(beta1));
    kv.set("beta2", format_double(beta2));
    kv.set("eps", format_double(eps));
    kv.set("clip", format_double(clip));
    return kv;
  }

  std::string canonical() const { return to_key_values().canonical(); }
};

// ---------------------------------------------------------------------------
// Losses

/// Mean cross-entropy over target positions.
inline Var asr_loss(Tape &tape, std::span<const Var> logits,
                    std::span<const std::size_t> targets) {
  require(logits.size() == targets.size(),
          "asr_loss: " + std::to_string(logits.size()) + " logit rows vs " +
              std::to_string(targets.size()) + " targets");
  require(!targets.empty() && targets.back() == Vocabulary::kEos,
          "asr_loss: targets must end with end-of-sequence");
  std::vector<Var> terms;
  terms.reserve(targets.size());
  for (std::size_t n = 0; n < targets.size(); ++n)
    terms.push_back(ops::cross_entropy(tape, logits[n], targets[n]));
  return ops::scale(tape, ops::sum(tape, terms), 1.0 / static_cast<double>(targets.size()));
}

/// Plain-tensor form over logits [N, V].
inline double asr_loss(const Tensor &logits, std::span<const std::size_t> targets) {
  require(logits.rank() == 2 && logits.rows() == targets.size(),
          "asr_loss: logits rows do not match target count");
  Tape tape(false);
  std::vector<Var> rows;
  for (std::size_t n = 0; n < logits.rows(); ++n) {
    auto r = logits.row(n);
    rows.push_back(tape.constant(Tensor::vector({r.begin(), r.end()})));
  }
  return tape.value(asr_loss(tape, rows, targets))[0];
}

inline double mask_loss(const Tensor &phi, std::span<const std::uint8_t> gold, double w1,
                        double w0, const std::vector<bool> *valid = nullptr) {
  for (double p : phi.values())
    require(p >= 0.0 && p <= 1.0, "mask_loss: phi must lie in [0,1]");
  Tape tape(false);
  std::vector<int> labels(gold.begin(), gold.end());
  return tape.value(ops::weighted_bce(tape, tape.constant(phi), labels, w1, w0, valid))[0];
}

inline void check_lambda(double lambda, Variant v) {
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must be in [0,1]");
  if (lambda > 0.0 && v != Variant::kMaskBased)
    throw ConfigError("lambda > 0 needs a mask: variant " + to_string(v) + " has none");
}

inline double total_loss(double asr, double mask, double lambda, Variant v = Variant::kMaskBased) {
  check_lambda(lambda, v);
  return (1.0 - lambda) * asr + lambda * mask;
}

inline double lr_schedule(const TrainConfig &cfg, std::size_t epoch) {
  return cfg.lr * std::pow(cfg.decay, static_cast<double>(epoch));
}

/// Gold labels at encoder rate: the stored mask (all ones if absent)
/// majority-downsampled by the encoder's time stride.
inline GoldMask encoder_rate_mask(const AnchoredUtterance &u, std::size_t time_stride) {
  return downsample_mask(u.gold_mask ? *u.gold_mask : GoldMask(u.body.frames, 1), time_stride);
}

struct SampleLoss {
  Var total;
  double asr = std::numeric_limits<double>::quiet_NaN();
  double mask = std::numeric_limits<double>::quiet_NaN();
};

/// Builds the per-sample objective. With lambda = 1 the decoder is not run.
inline SampleLoss sample_loss(Tape &tape, const Model &model, const AnchoredUtterance &u,
                              const TrainConfig &cfg) {
  const auto &mc = model.config;
  check_lambda(cfg.lambda, mc.variant);
  SampleLoss out;
  const Vocabulary vocab = mc.vocabulary();
  Var mask_term, asr_term;
  EncodedVars enc;
  if (cfg.lambda < 1.0) {
    const auto targets = vocab.targets(u.transcript);
    const auto fv = build_forward(tape, model, u, targets);
    asr_term = asr_loss(tape, fv.logits, targets);
    out.asr = tape.value(asr_term)[0];
    enc = fv.enc;
  }
  if (cfg.lambda > 0.0) {
    Var phi = enc.phi;
    if (!phi.valid()) {
      Var a = tape.constant(u.anchor.to_tensor());
      Var x = tape.constant(u.body.to_tensor());
      phi = anchor_similarity(tape, mc, model.params, a, x);
    }
    const GoldMask gold = encoder_rate_mask(u, mc.time_stride());
    std::vector<int> labels(gold.begin(), gold.end());
    mask_term = ops::weighted_bce(tape, phi, labels, cfg.w1, cfg.w0);
    out.mask = tape.value(mask_term)[0];
  }
  if (cfg.lambda == 0.0) {
    out.total = asr_term;
  } else if (cfg.lambda == 1.0) {
    out.total = mask_term;
  } else {
    out.total = ops::add(tape, ops::scale(tape, asr_term, 1.0 - cfg.lambda),
                         ops::scale(tape, mask_term, cfg.lambda));
  }
  return out;
}

struct BatchResult {
  double total = 0.0;
  double asr = 0.0;
  double mask = 0.0;
  ParameterSet grads;
};

/// Mean objective over `batch` and its gradient.
inline BatchResult batch_loss(const Model &model, std::span<const AnchoredUtterance *const> batch,
                              const TrainConfig &cfg) {
  require(!batch.empty(), "empty batch");
  BatchResult r;
  r.grads = zeros_like(model.params);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto *u : batch) {
    Tape tape;
    const SampleLoss s = sample_loss(tape, model, *u, cfg);
    r.total += tape.value(s.total)[0] * inv;
    r.asr += s.asr * inv;
    r.mask += s.mask * inv;
    tape.backward(s.total);
    tape.accumulate_parameter_grads(r.grads, inv);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Optimizer

class Adam {
 public:
  Adam(const ParameterSet &params, double beta1, double beta2, double eps)
      : m_(zeros_like(params)), v_(zeros_like(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  std::size_t steps() const { return t_; }

  void step(ParameterSet &params, const ParameterSet &grads, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto &[name, p] : params) {
      const Tensor &g = grads.at(name);
      Tensor &m = m_.at(name);
      Tensor &v = v_.at(name);
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
      }
    }
  }

 private:
  ParameterSet m_, v_;
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
};

inline double global_norm(const ParameterSet &grads) {
  double s = 0.0;
  for (const auto &[_, g] : grads)
    for (double x : g.values()) s += x * x;
  return std::sqrt(s);
}

/// Scales `grads` so their global norm is at most `max_norm`; returns the
/// norm before clipping.
inline double clip_global_norm(ParameterSet &grads, double max_norm) {
  const double n = global_norm(grads);
  if (max_norm > 0.0 && n > max_norm) {
    const double k = max_norm / n;
    for (auto &[_, g] : grads)
      for (double &x : g.values()) x *= k;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Training loop

inline bool all_finite(const ParameterSet &params) {
  for (const auto &[_, t] : params)
    for (double x : t.values())
      if (!std::isfinite(x)) return false;
  return true;
}

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch)
      : Error("training diverged (non-finite loss) at epoch " + std::to_string(epoch) +
              ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}
  std::size_t epoch() const { return epoch_; }
  std::size_t batch() const { return batch_; }

 private:
  std::size_t epoch_, batch_;
};

struct EpochStats {
  std::size_t epoch = 0;
  std::optional<double> asr_loss;
  std::optional<double> mask_loss;
  double total_loss = 0.0;
  std::optional<double> dev_wer;
  std::optional<double> dev_mask_loss;
  std::optional<double> recall0;
  std::optional<double> recall1;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
};

inline std::string report_csv(const TrainReport &r) {
  auto cell = [](const std::optional<double> &v) { return v ? format_double(*v) : std::string("NA"); };
  std::string out = "epoch,asr_loss,mask_loss,total_loss,dev_wer,recall0,recall1\n";
  for (const auto &e : r.epochs)
    out += std::to_string(e.epoch) + "," + cell(e.asr_loss) + "," + cell(e.mask_loss) + "," +
           format_double(e.total_loss) + "," + cell(e.dev_wer) + "," + cell(e.recall0) + "," +
           cell(e.recall1) + "\n";
  return out;
}

/// Per-utterance phi on the inference tape (anchor variants only).
inline Tensor predict_mask(const Model &model, const AnchoredUtterance &u) {
  require(model.config.has_anchor(), "predict_mask: variant has no speaker encoder");
  Tape tape(false);
  Var a = tape.constant(u.anchor.to_tensor());
  Var x = tape.constant(u.body.to_tensor());
  Var phi = anchor_similarity(tape, model.config, model.params, a, x);
  if (model.config.variant == Variant::kMultiSource) phi = ops::sigmoid(tape, phi);
  return tape.value(phi);
}

struct MaskEval {
  MaskRecallCounts counts;
  double loss = 0.0;  // mean per-utterance weighted BCE
};

/// Recalls and weighted BCE of phi against encoder-rate gold masks; missing
/// masks count as all ones.
inline MaskEval evaluate_mask(const Model &model, const Corpus &corpus, double w1 = 0.6,
                              double w0 = 1.0) {
  require(!corpus.empty(), "mask evaluation on an empty corpus");
  MaskEval ev;
  for (const auto &u : corpus) {
    const Tensor phi = predict_mask(model, u);
    const GoldMask gold = encoder_rate_mask(u, model.config.time_stride());
    ev.counts += mask_recall_counts(phi.data(), gold);
    ev.loss += mask_loss(phi, gold, w1, w0) / static_cast<double>(corpus.size());
  }
  return ev;
}

/// Corpus-level word error counts of `hyps` against the transcripts.
inline ErrorCounts score_corpus(const Corpus &refs, std::span<const DecodedUtterance> hyps) {
  require(refs.size() == hyps.size(), "score: " + std::to_string(refs.size()) +
                                          " references vs " + std::to_string(hyps.size()) +
                                          " hypotheses");
  ErrorCounts c;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    require(refs[i].id == hyps[i].id,
            "score: id mismatch '" + refs[i].id + "' vs '" + hyps[i].id + "'");
    c += align(refs[i].transcript, hyps[i].text);
  }
  return c;
}

struct FitResult {
  Model model;  // best-dev parameters
  TrainReport report;
};

/// Mini-batch training with per-epoch shuffling. Model selection uses dev
/// WER (greedy decoding) or, when lambda = 1, dev mask loss; without a dev
/// corpus the last epoch is kept.
inline FitResult fit(Model model, const Corpus &train, const TrainConfig &cfg,
                     const Corpus *dev = nullptr) {
  cfg.validate();
  require(!train.empty(), "fit: training corpus is empty");
  check_lambda(cfg.lambda, model.config.variant);
  Adam adam(model.params, cfg.beta1, cfg.beta2, cfg.eps);
  FitResult best{model, {}};
  double best_score = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, 0x5EED0000ULL + epoch));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_int(0, i - 1)]);
    const double lr = lr_schedule(cfg, epoch);

    EpochStats st;
    st.epoch = epoch;
    double asr_sum = 0.0, mask_sum = 0.0, total_sum = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<const AnchoredUtterance *> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k)
        batch.push_back(&train[order[k]]);
      if (!all_finite(model.params)) throw DivergenceError(epoch, n_batches);
      BatchResult br = batch_loss(model, batch, cfg);
      if (!std::isfinite(br.total)) throw DivergenceError(epoch, n_batches);
      if (!std::isfinite(clip_global_norm(br.grads, cfg.clip)))
        throw DivergenceError(epoch, n_batches);
      adam.step(model.params, br.grads, lr);
      asr_sum += br.asr;
      mask_sum += br.mask;
      total_sum += br.total;
      ++n_batches;
    }
    const double nb = static_cast<double>(n_batches);
    if (cfg.lambda < 1.0) st.asr_loss = asr_sum / nb;
    if (cfg.lambda > 0.0) st.mask_loss = mask_sum / nb;
    st.total_loss = total_sum / nb;

    double score = -static_cast<double>(epoch);  // no dev: prefer the latest
    if (dev && !dev->empty()) {
      if (model.config.variant == Variant::kMaskBased) {
        const MaskEval me = evaluate_mask(model, *dev, cfg.w1, cfg.w0);
        st.recall0 = me.counts.recall0();
        st.recall1 = me.counts.recall1();
        st.dev_mask_loss = me.loss;
      }
      if (cfg.lambda < 1.0) {
        st.dev_wer = wer(score_corpus(*dev, decode_corpus(model, *dev, 1)));
        score = *st.dev_wer;
      } else {
        score = *st.dev_mask_loss;
      }
    }
    best.report.epochs.push_back(st);
    if (score < best_score) {
      best_score = score;
      best.model = model;
      best.report.best_epoch = epoch;
    }
  }
  if (cfg.epochs == 0) best.model = model;
  return best;
}

}  // namespace anchor
