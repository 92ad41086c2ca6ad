// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   anchor_asr.cpp
 * @brief  Command-line driver: corpus generation, augmentation, training,
 *         decoding, scoring, mask evaluation, gradient checks and the full
 *         comparison experiment.
 *
 * Exit codes: 0 success, 1 other error, 2 missing file, 3 bad config or
 * flags, 4 training divergence, 5 malformed data file.
 */
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "anchor/experiment.hpp"
#include "anchor/verify.hpp"

using namespace anchor;

namespace {

enum Exit { kOk = 0, kOther = 1, kMissing = 2, kConfig = 3, kDiverged = 4, kFormat = 5 };

KeyValues load_config(const std::string &path) {
  if (path.empty()) return {};
  return KeyValues::parse(read_file_text(path));
}

/// Checks that only `sections` appear in a config file.
void check_sections(const KeyValues &kv, std::initializer_list<const char *> sections,
                    const std::string &command) {
  for (const auto &[k, _] : kv.entries()) {
    bool ok = false;
    for (const char *s : sections) ok = ok || k.rfind(std::string(s) + ".", 0) == 0;
    if (!ok) throw ConfigError("key '" + k + "' is not used by " + command);
  }
}

Range parse_range(const std::string &s) {
  KeyValues kv;
  kv.set("range", s);
  return kv.get_range("range", {});
}

void say(const std::string &line) { std::cout << line << "\n"; }

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Anchored speech recognition toolkit"};
  app.require_subcommand(1);

  std::string config, corpus_path, out, checkpoint, variant_name, mix_text, dev_path, hyp_path,
      baseline_hyp, segment_text = "3,9", system_label = "system", baseline_label = "baseline";
  std::uint64_t seed = 1;
  std::size_t beam = 4, frames = 5;
  std::optional<double> lambda;

  auto *gen = app.add_subcommand("gen-corpus", "Generate a toy anchored corpus");
  gen->add_option("--config", config, "key = value file (corpus.* keys)");
  gen->add_option("--seed", seed);
  gen->add_option("--out", out)->required();

  auto *aug = app.add_subcommand("augment", "Mix a corpus with synthetic interference");
  aug->add_option("--corpus", corpus_path)->required();
  aug->add_option("--mix", mix_text, "unchanged,method1,method2 fractions")->default_val("0.5,0.44,0.06");
  aug->add_option("--segment-range", segment_text, "inserted segment length lo,hi (frames)");
  aug->add_option("--seed", seed);
  aug->add_option("--out", out)->required();

  auto *train = app.add_subcommand("train", "Train a model; writes a checkpoint and <out>.report.csv");
  train->add_option("--config", config, "key = value file (model.* and train.* keys)");
  train->add_option("--corpus", corpus_path)->required();
  train->add_option("--dev", dev_path, "held-out corpus for model selection");
  train->add_option("--variant", variant_name, "baseline | multi-source | mask-based");
  train->add_option("--lambda", lambda, "mask loss weight");
  train->add_option("--seed", seed);
  train->add_option("--out", out)->required();

  auto *dec = app.add_subcommand("decode", "Decode a corpus to a hypothesis file");
  dec->add_option("--checkpoint", checkpoint)->required();
  dec->add_option("--corpus", corpus_path)->required();
  dec->add_option("--beam", beam)->check(CLI::PositiveNumber);
  dec->add_option("--out", out)->required();

  auto *score = app.add_subcommand("score", "Score hypotheses; WERR against a baseline hypothesis file");
  score->add_option("--corpus", corpus_path, "reference corpus")->required();
  score->add_option("--hyp", hyp_path)->required();
  score->add_option("--baseline", baseline_hyp, "baseline hypothesis file (defaults to --hyp)");
  score->add_option("--label", system_label);
  score->add_option("--baseline-label", baseline_label);
  score->add_option("--out", out);

  auto *mask = app.add_subcommand("mask-eval", "Frame mask recalls against gold masks");
  mask->add_option("--checkpoint", checkpoint)->required();
  mask->add_option("--corpus", corpus_path)->required();
  mask->add_option("--out", out);

  auto *gc = app.add_subcommand("grad-check", "Finite-difference check of a tiny model");
  gc->add_option("--variant", variant_name)->required();
  gc->add_option("--seed", seed);
  gc->add_option("--frames", frames, "body frames of the check sample")->check(CLI::Range(1, 64));
  gc->add_option("--out", out);

  auto *exp = app.add_subcommand("experiment", "Train and score the full comparison; writes the table");
  exp->add_option("--config", config, "key = value file (corpus.*, model.*, train.*, experiment.*)");
  exp->add_option("--seed", seed);
  exp->add_option("--beam", beam)->check(CLI::PositiveNumber);
  exp->add_option("--out", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const KeyValues kv = load_config(config);
      check_sections(kv, {"corpus"}, "gen-corpus");
      const ToyCorpusConfig cc = ToyCorpusConfig::from(kv.section("corpus."));
      const Corpus c = gen_toy_corpus(cc, seed);
      write_corpus(c, out);
      write_meta(out, make_meta("corpus", seed, kv.canonical()));
      say("wrote " + std::to_string(c.size()) + " utterances to " + out);
    } else if (*aug) {
      const Corpus c = read_corpus(corpus_path);
      const MixSpec mix = MixSpec::parse(mix_text);
      const Range seg = parse_range(segment_text);
      const Corpus m = mix_corpus(c, mix, seg, seed);
      write_corpus(m, out);
      write_meta(out, make_meta("augmented_corpus", seed,
                                "input = " + corpus_path + "\nmix = " + mix_text +
                                    "\nsegment_range = " + to_string(seg) + "\n"));
      const auto counts = mix_counts(c.size(), mix);
      say("wrote " + std::to_string(m.size()) + " utterances (" + std::to_string(counts[0]) +
          " unchanged, " + std::to_string(counts[1]) + " method 1, " +
          std::to_string(counts[2]) + " method 2) to " + out);
    } else if (*train) {
      KeyValues kv = load_config(config);
      check_sections(kv, {"model", "train"}, "train");
      KeyValues mkv = kv.section("model.");
      if (!variant_name.empty()) mkv.set("variant", to_string(parse_variant(variant_name)));
      KeyValues tkv = kv.section("train.");
      if (lambda) tkv.set("lambda", format_double(*lambda));
      tkv.set("seed", std::to_string(seed));
      const ModelConfig mc = ModelConfig::from(mkv);
      const TrainConfig tc = TrainConfig::from(tkv);
      const Corpus c = read_corpus(corpus_path);
      std::optional<Corpus> dev;
      if (!dev_path.empty()) dev = read_corpus(dev_path);
      const FitResult fr = fit(Model::create(mc, mix_seed(seed, 11)), c, tc, dev ? &*dev : nullptr);
      write_checkpoint(fr.model, out);
      write_file_text(out + ".report.csv", report_csv(fr.report));
      write_meta(out, make_meta("checkpoint", seed, mc.canonical() + tc.canonical()));
      say("best epoch " + std::to_string(fr.report.best_epoch) + "; wrote " + out);
    } else if (*dec) {
      const Model m = read_checkpoint(checkpoint);
      const Corpus c = read_corpus(corpus_path);
      write_file_text(out, hypotheses_to_text(decode_corpus(m, c, beam)));
      write_meta(out, make_meta("hypotheses", 0,
                                "checkpoint = " + checkpoint + "\ncorpus = " + corpus_path +
                                    "\nbeam = " + std::to_string(beam) + "\n"));
      say("decoded " + std::to_string(c.size()) + " utterances to " + out);
    } else if (*score) {
      const Corpus refs = read_corpus(corpus_path);
      const auto sys = parse_hypotheses(read_file_text(hyp_path));
      const auto base = baseline_hyp.empty() ? sys : parse_hypotheses(read_file_text(baseline_hyp));
      std::vector<AbsoluteMetrics> rows{
          AbsoluteMetrics::from(baseline_label, "-", "test", score_corpus(refs, base)),
          AbsoluteMetrics::from(system_label, "-", "test", score_corpus(refs, sys))};
      require(rows[0].wer > 0.0, "score: baseline WER is zero; WERR is undefined");
      std::string text = "system,WER,sub,ins,del,WERR\n";
      for (const auto &r : rows)
        text += r.model + "," + format_fixed(r.wer, 4) + "," + format_fixed(r.sub, 4) + "," +
                format_fixed(r.ins, 4) + "," + format_fixed(r.del, 4) + "," +
                format_fixed(werr(rows[0].wer, r.wer), 1) + "\n";
      if (out.empty()) {
        std::cout << text;
      } else {
        write_file_text(out, text);
        write_meta(out, make_meta("score", 0, "corpus = " + corpus_path + "\nhyp = " + hyp_path +
                                                  "\nbaseline = " + baseline_hyp + "\n"));
      }
    } else if (*mask) {
      const Model m = read_checkpoint(checkpoint);
      const Corpus c = read_corpus(corpus_path);
      const MaskEval me = evaluate_mask(m, c);
      auto cell = [](std::optional<double> v) { return v ? format_fixed(*v, 4) : std::string("NA"); };
      const std::string text = "recall0,recall1,frames0,frames1\n" + cell(me.counts.recall0()) + "," +
                               cell(me.counts.recall1()) + "," + std::to_string(me.counts.total0) +
                               "," + std::to_string(me.counts.total1) + "\n";
      if (out.empty()) {
        std::cout << text;
      } else {
        write_file_text(out, text);
        write_meta(out, make_meta("mask_eval", 0, "checkpoint = " + checkpoint + "\ncorpus = " + corpus_path + "\n"));
      }
    } else if (*gc) {
      const GradCheckCase c = grad_check_variant(parse_variant(variant_name), frames, seed);
      const std::string text = grad_check_text(c.report);
      if (out.empty()) std::cout << text;
      else write_file_text(out, text);
      say(std::string(c.report.passed() ? "PASS" : "FAIL") + " grad-check " +
          to_string(c.variant) + " seed " + std::to_string(c.seed) + " max_rel_error " +
          format_double(c.report.max_rel_error));
      return c.report.passed() ? kOk : kOther;
    } else if (*exp) {
      KeyValues kv = load_config(config);
      if (exp->count("--beam")) kv.set("experiment.beam", std::to_string(beam));
      const ExperimentConfig ec = ExperimentConfig::from(kv);
      const ExperimentResult r = run_experiment(ec, seed, [](const RunResult &rr) {
        std::fprintf(stderr, "done %s/%s: normal WER %.4f, hard WER %.4f\n", rr.spec.model.c_str(),
                     rr.spec.training_set.c_str(), wer(rr.normal), wer(rr.hard));
      });
      write_file_text(out, report_csv(r.table));
      write_file_text(out + ".counts.csv", counts_csv(r));
      write_meta(out, make_meta("experiment_table", seed, ec.canonical()));
      std::cout << report_csv(r.table);
    }
  } catch (const MissingFileError &e) {
    std::cerr << "error: missing file: " << e.what() << "\n";
    return kMissing;
  } catch (const ConfigError &e) {
    std::cerr << "error: bad config: " << e.what() << "\n";
    return kConfig;
  } catch (const DivergenceError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDiverged;
  } catch (const CorpusFormatError &e) {
    std::cerr << "error: malformed corpus: " << e.what() << "\n";
    return kFormat;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOk;
}
