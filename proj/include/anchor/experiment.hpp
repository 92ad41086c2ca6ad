// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   experiment.hpp
 * @brief  Artifact manifests and the desk-scale comparison of training
 *         conditions (device-directed-only vs augmented) across variants.
 */
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <json.hpp>

#include "anchor/augment.hpp"
#include "anchor/decode.hpp"
#include "anchor/eval.hpp"
#include "anchor/train.hpp"

namespace anchor {

// ---------------------------------------------------------------------------
// Manifests: every artifact gets "<path>.meta.json" with the seed and the
// hash of the canonical config text that produced it.

inline std::string meta_path(const std::string &artifact) { return artifact + ".meta.json"; }

inline nlohmann::ordered_json make_meta(const std::string &kind, std::uint64_t seed,
                                        const std::string &config_text) {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["seed"] = seed;
  j["config_hash"] = hex64(fnv1a64(config_text));
  j["config"] = config_text;
  return j;
}

inline void write_meta(const std::string &artifact, const nlohmann::ordered_json &meta) {
  write_file_text(meta_path(artifact), meta.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

struct ExperimentConfig {
  ToyCorpusConfig corpus;
  TrainConfig train;
  KeyValues model_overrides;  // applied to every variant
  std::size_t n_train = 300;
  std::size_t n_dev = 40;
  std::size_t n_test = 100;
  MixSpec mix = kAugmentedMix;
  Range segment_range{3, 9};  // inserted segment length, frames
  double mask_lambda = 0.1;   // supervised mask_based run
  std::size_t beam = 4;

  static const std::set<std::string> &keys() {
    static const std::set<std::string> k{"n_train", "n_dev",  "n_test",     "mix",
                                         "segment_range", "mask_lambda", "beam"};
    return k;
  }

  /// Sections: corpus.*, train.*, model.*, experiment.*.
  static ExperimentConfig from(const KeyValues &kv) {
    ExperimentConfig c;
    for (const auto &[k, _] : kv.entries()) {
      const auto dot = k.find('.');
      const std::string sec = dot == std::string::npos ? "" : k.substr(0, dot);
      if (sec != "corpus" && sec != "train" && sec != "model" && sec != "experiment")
        throw ConfigError("unknown config key '" + k + "'");
    }
    c.corpus = ToyCorpusConfig::from(kv.section("corpus."));
    c.train = TrainConfig::from(kv.section("train."));
    c.model_overrides = kv.section("model.");
    if (c.model_overrides.has("variant"))
      throw ConfigError("model.variant is fixed per run in an experiment");
    const KeyValues e = kv.section("experiment.");
    e.check_known(keys(), "experiment");
    c.n_train = e.get_size("n_train", c.n_train);
    c.n_dev = e.get_size("n_dev", c.n_dev);
    c.n_test = e.get_size("n_test", c.n_test);
    if (auto m = e.get("mix")) c.mix = MixSpec::parse(*m);
    c.segment_range = e.get_range("segment_range", c.segment_range);
    c.mask_lambda = e.get_double("mask_lambda", c.mask_lambda);
    c.beam = e.get_size("beam", c.beam);
    c.validate();
    return c;
  }

  void validate() const {
    corpus.validate();
    train.validate();
    mix.validate();
    require(n_train >= 2 && n_dev >= 2 && n_test >= 2, "experiment: each split needs >= 2 utterances");
    require(beam >= 1, "experiment: beam must be >= 1");
    require(mask_lambda > 0.0 && mask_lambda < 1.0, "experiment: mask_lambda must be in (0,1)");
    model_config(Variant::kMaskBased);
  }

  ModelConfig model_config(Variant v) const {
    KeyValues kv = model_overrides;
    kv.set("variant", to_string(v));
    if (!kv.has("feat_dim")) kv.set("feat_dim", std::to_string(corpus.feat_dim));
    if (!kv.has("graphemes")) kv.set("graphemes", "\"" + corpus.vocabulary().graphemes() + "\"");
    return ModelConfig::from(kv);
  }

  std::string canonical() const {
    KeyValues kv;
    auto merge = [&](const std::string &sec, const KeyValues &src) {
      for (const auto &[k, v] : src.entries()) kv.set(sec + "." + k, v);
    };
    KeyValues c;
    c.set("n_utts", std::to_string(corpus.n_utts));
    c.set("feat_dim", std::to_string(corpus.feat_dim));
    c.set("speakers", std::to_string(corpus.speakers));
    c.set("transcript_len_range", to_string(corpus.transcript_len_range));
    c.set("word_len_range", to_string(corpus.word_len_range));
    c.set("anchor_len_range", to_string(corpus.anchor_len_range));
    c.set("body_len_per_grapheme", std::to_string(corpus.body_len_per_grapheme));
    c.set("noise_scale", format_double(corpus.noise_scale));
    c.set("bias_scale", format_double(corpus.bias_scale));
    c.set("template_scale", format_double(corpus.template_scale));
    c.set("template_jitter", format_double(corpus.template_jitter));
    c.set("letters", corpus.letters);
    merge("corpus", c);
    merge("train", train.to_key_values());
    merge("model", model_overrides);
    KeyValues e;
    e.set("n_train", std::to_string(n_train));
    e.set("n_dev", std::to_string(n_dev));
    e.set("n_test", std::to_string(n_test));
    e.set("mix", format_double(mix.unchanged) + "," + format_double(mix.method1) + "," +
                     format_double(mix.method2));
    e.set("segment_range", to_string(segment_range));
    e.set("mask_lambda", format_double(mask_lambda));
    e.set("beam", std::to_string(beam));
    merge("experiment", e);
    return kv.canonical();
  }
};

struct ExperimentData {
  Corpus train_ddo;
  Corpus train_aug;
  Corpus dev;
  Corpus test_normal;
  Corpus test_hard;
};

/// Splits one toy corpus into train/dev/test and derives the conditions.
/// The hard set corrupts every test utterance with method 1; the dev set
/// mixes clean and corrupted halves.
inline ExperimentData make_experiment_data(const ExperimentConfig &cfg, std::uint64_t seed) {
  ToyCorpusConfig cc = cfg.corpus;
  cc.n_utts = cfg.n_train + cfg.n_dev + cfg.n_test;
  const Corpus all = gen_toy_corpus(cc, mix_seed(seed, 1));
  ExperimentData d;
  d.train_ddo.assign(all.begin(), all.begin() + cfg.n_train);
  const Corpus dev(all.begin() + cfg.n_train, all.begin() + cfg.n_train + cfg.n_dev);
  d.test_normal.assign(all.begin() + cfg.n_train + cfg.n_dev, all.end());
  d.train_aug = mix_corpus(d.train_ddo, cfg.mix, cfg.segment_range, mix_seed(seed, 2));
  d.dev = mix_corpus(dev, {0.5, 0.5, 0.0}, cfg.segment_range, mix_seed(seed, 3));
  d.test_hard = mix_corpus(d.test_normal, {0.0, 1.0, 0.0}, cfg.segment_range, mix_seed(seed, 4));
  return d;
}

struct RunSpec {
  std::string model;         // row label
  std::string training_set;  // "ddo" or "augmented"
  Variant variant;
  double lambda;
};

inline std::vector<RunSpec> experiment_runs(const ExperimentConfig &cfg) {
  return {{"baseline", "ddo", Variant::kBaseline, 0.0},
          {"baseline", "augmented", Variant::kBaseline, 0.0},
          {"multi_source", "ddo", Variant::kMultiSource, 0.0},
          {"multi_source", "augmented", Variant::kMultiSource, 0.0},
          {"mask_based_lambda0", "augmented", Variant::kMaskBased, 0.0},
          {"mask_based_lambda" + format_double(cfg.mask_lambda), "augmented",
           Variant::kMaskBased, cfg.mask_lambda}};
}

struct RunResult {
  RunSpec spec;
  ErrorCounts normal;
  ErrorCounts hard;
  TrainReport report;
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  std::vector<AbsoluteMetrics> metrics;
  NormalizedReport table;
};

/// Trains and scores every run for one seed. `progress` is called after
/// each run.
template <typename Progress = void (*)(const RunResult &)>
ExperimentResult run_experiment(const ExperimentConfig &cfg, std::uint64_t seed,
                                Progress progress = [](const RunResult &) {}) {
  cfg.validate();
  const ExperimentData data = make_experiment_data(cfg, seed);
  ExperimentResult res;
  for (const auto &spec : experiment_runs(cfg)) {
    TrainConfig tc = cfg.train;
    tc.lambda = spec.lambda;
    tc.seed = mix_seed(seed, 10);
    const Corpus &train = spec.training_set == "ddo" ? data.train_ddo : data.train_aug;
    const Model init = Model::create(cfg.model_config(spec.variant), mix_seed(seed, 11));
    FitResult fr = fit(init, train, tc, &data.dev);
    RunResult rr{spec, {}, {}, std::move(fr.report)};
    rr.normal = score_corpus(data.test_normal, decode_corpus(fr.model, data.test_normal, cfg.beam));
    rr.hard = score_corpus(data.test_hard, decode_corpus(fr.model, data.test_hard, cfg.beam));
    progress(rr);
    res.metrics.push_back(AbsoluteMetrics::from(spec.model, spec.training_set, "normal", rr.normal));
    res.metrics.push_back(AbsoluteMetrics::from(spec.model, spec.training_set, "hard", rr.hard));
    res.runs.push_back(std::move(rr));
  }
  res.table = normalize_report(res.metrics, "baseline", "ddo", "normal");
  return res;
}

/// Absolute error counts per run and test set.
inline std::string counts_csv(const ExperimentResult &r) {
  std::string out = "model,training_set,test_set,ref_words,sub,ins,del\n";
  for (const auto &run : r.runs)
    for (const auto &[name, c] : {std::pair{"normal", run.normal}, std::pair{"hard", run.hard}})
      out += run.spec.model + "," + run.spec.training_set + "," + name + "," +
             std::to_string(c.ref_len) + "," + std::to_string(c.substitutions) + "," +
             std::to_string(c.insertions) + "," + std::to_string(c.deletions) + "\n";
  return out;
}

}  // namespace anchor
