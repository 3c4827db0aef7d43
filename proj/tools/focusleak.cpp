/* Copyright 2026 The FocusLeak Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// focusleak: command-line driver.
//
//   focusleak segment  --image in.pgm --out mask.pgm
//   focusleak patches  --mask fg.pgm --k 10 --out support.pgm
//   focusleak attack   --config run.json [overrides]
//   focusleak defend   --image adv.pgm --kind gaussian --sigma 8/255 --out d.pgm
//   focusleak evaluate --original a.pgm --adversarial b.pgm --findings "..." --adv-findings "..."
//   focusleak sweep    --config run.json --axis epsilon
//   focusleak report   --report out/report.jsonl
//
// Exit codes: 0 success, 1 stage failure, 2 startup error.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "focusleak/error.hpp"
#include "focusleak/pipeline.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace focusleak;

namespace {

constexpr int kStageFailure = 1;
constexpr int kStartupError = 2;

struct StartupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::string config;
  std::vector<std::string> images;
  std::string mask;
  std::string findings;
  std::string modality;
  std::string out_dir;
  std::string epsilon, step, lambda_attn, lambda_lm, sigma;
  std::optional<std::size_t> iters, k, n_crops;
  std::optional<std::uint64_t> seed;
  std::string mas_mode;
  std::optional<unsigned> jobs;
  bool quiet = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON configuration file");
  cmd->add_option("--image", o.images, "Input image (repeatable)");
  cmd->add_option("--mask", o.mask, "Foreground mask image (default: heuristic segmentation)");
  cmd->add_option("--findings", o.findings, "Clean findings text");
  cmd->add_option("--modality", o.modality, "Modality label for summaries");
  cmd->add_option("--out-dir", o.out_dir, "Output directory");
  cmd->add_option("--epsilon", o.epsilon, "L-inf budget, e.g. 16/255");
  cmd->add_option("--step", o.step, "Step size, e.g. 1/255");
  cmd->add_option("--iters", o.iters, "Attack iterations");
  cmd->add_option("--k", o.k, "Number of background squares");
  cmd->add_option("--n-crops", o.n_crops, "Crops per iteration");
  cmd->add_option("--lambda-attn", o.lambda_attn, "Attention-loss weight");
  cmd->add_option("--lambda-lm", o.lambda_lm, "LM-loss weight");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--mas-mode", o.mas_mode, "product or geometric");
  cmd->add_option("--sigma", o.sigma, "Gaussian defense sigma (adds a gaussian defense if none is configured)");
  cmd->add_option("--jobs", o.jobs, "Concurrent runs");
  cmd->add_flag("--quiet", o.quiet, "No progress output");
}

PipelineConfig resolve(const Overrides& o) {
  PipelineConfig c;
  try {
    if (!o.config.empty()) c = load_config(o.config);
  } catch (const std::exception& e) {
    throw StartupError(e.what());
  }
  try {
    if (!o.images.empty()) c.images.assign(o.images.begin(), o.images.end());
    if (!o.mask.empty()) c.mask = o.mask;
    if (!o.findings.empty()) c.findings = o.findings;
    if (!o.modality.empty()) c.modality = o.modality;
    if (!o.out_dir.empty()) c.output_dir = o.out_dir;
    if (!o.epsilon.empty()) c.attack.epsilon = parse_number(o.epsilon);
    if (!o.step.empty()) c.attack.step = parse_number(o.step);
    if (o.iters) c.attack.iterations = *o.iters;
    if (o.k) c.attack.k = *o.k;
    if (o.n_crops) c.attack.weights.n_crops = *o.n_crops;
    if (!o.lambda_attn.empty()) c.attack.weights.lambda_attn = parse_number(o.lambda_attn);
    if (!o.lambda_lm.empty()) c.attack.weights.lambda_lm = parse_number(o.lambda_lm);
    if (o.seed) c.attack.seed = *o.seed;
    if (!o.mas_mode.empty()) c.metrics.mas_mode = parse_mas_mode(o.mas_mode);
    if (!o.sigma.empty()) {
      const double s = parse_number(o.sigma);
      bool found = false;
      for (auto& d : c.defenses) {
        if (d.kind == DefenseKind::gaussian) {
          d.sigma = s;
          found = true;
        }
      }
      if (!found) c.defenses.push_back({DefenseKind::gaussian, s, 4, 2, c.attack.seed});
    }
    if (o.jobs) c.jobs = *o.jobs;
    c.validate();
    if (c.images.empty()) throw ContractError("no input image given (--image or config 'images')");
  } catch (const std::exception& e) {
    throw StartupError(e.what());
  }
  return c;
}

ProgressFn progress_fn(bool quiet) {
  if (quiet) return {};
  return [](const std::string& msg) { std::cerr << "[focusleak] " << msg << "\n"; };
}

nlohmann::json summary_json(const Summary& s) {
  return {{"count", s.count}, {"mtr", s.mtr}, {"avg_sim", s.avg_sim}, {"mas", s.mas}};
}

Image require_image(const std::string& path) {
  if (!fs::exists(path)) throw StartupError("input image not found: " + path);
  return load_pnm(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Background-constrained multimodal adversarial attack toolkit"};
  app.require_subcommand(1);

  // segment
  std::string seg_image, seg_out;
  double seg_threshold = 0.5, seg_min = 0.01;
  auto* seg = app.add_subcommand("segment", "Heuristic foreground mask");
  seg->add_option("--image", seg_image, "Input image")->required();
  seg->add_option("--out", seg_out, "Output mask (PGM)")->required();
  seg->add_option("--threshold", seg_threshold, "Luminance threshold");
  seg->add_option("--min-component", seg_min, "Minimum component area fraction");

  // patches
  std::string pat_mask, pat_out;
  std::size_t pat_k = 10;
  auto* pat = app.add_subcommand("patches", "Top-k background squares from a foreground mask");
  pat->add_option("--mask", pat_mask, "Foreground mask image")->required();
  pat->add_option("--k", pat_k, "Number of squares");
  pat->add_option("--out", pat_out, "Support mask output (PGM)");

  // attack
  Overrides atk_o;
  auto* atk = app.add_subcommand("attack", "Full pipeline: findings, seed, mask, attack, defenses, metrics");
  add_overrides(atk, atk_o);

  // defend
  std::string def_image, def_out, def_kind = "gaussian", def_sigma = "8/255";
  unsigned def_bits = 4;
  std::size_t def_down = 2;
  std::uint64_t def_seed = 0;
  auto* def = app.add_subcommand("defend", "Apply an input-transform defense");
  def->add_option("--image", def_image, "Input image")->required();
  def->add_option("--out", def_out, "Output image")->required();
  def->add_option("--kind", def_kind, "gaussian or compress");
  def->add_option("--sigma", def_sigma, "Noise std");
  def->add_option("--bits", def_bits, "Quantization bits");
  def->add_option("--down-factor", def_down, "Downsampling factor");
  def->add_option("--seed", def_seed, "RNG seed");

  // evaluate
  std::string ev_orig, ev_adv, ev_find, ev_adv_find, ev_mode = "product";
  auto* ev = app.add_subcommand("evaluate", "Score one clean/adversarial pair");
  ev->add_option("--original", ev_orig, "Clean image")->required();
  ev->add_option("--adversarial", ev_adv, "Adversarial image")->required();
  ev->add_option("--findings", ev_find, "Clean findings text")->required();
  ev->add_option("--adv-findings", ev_adv_find, "Adversarial findings text")->required();
  ev->add_option("--mas-mode", ev_mode, "product or geometric");

  // sweep
  Overrides sw_o;
  std::string sw_axis;
  auto* sw = app.add_subcommand("sweep", "Ablation sweep over one axis");
  add_overrides(sw, sw_o);
  sw->add_option("--axis", sw_axis, "epsilon, k, iterations, lambda_attn or alpha_weight")->required();

  // report
  std::string rep_path, rep_mode = "product";
  auto* rep = app.add_subcommand("report", "Aggregate a report.jsonl");
  rep->add_option("--report", rep_path, "report.jsonl path")->required();
  rep->add_option("--mas-mode", rep_mode, "product or geometric");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kStartupError;
  }

  try {
    if (*seg) {
      const Image img = require_image(seg_image);
      const BinaryMask m = heuristic_foreground_mask(img, seg_threshold, seg_min);
      save_mask_pnm(m, seg_out);
      std::cout << "foreground pixels: " << m.popcount() << " / " << m.bits.size() << "\n";
    } else if (*pat) {
      if (!fs::exists(pat_mask)) throw StartupError("mask not found: " + pat_mask);
      const BinaryMask fg = load_mask_pnm(pat_mask);
      std::vector<std::string> warnings;
      const PatchSet ps = top_k_squares(fg.complement(), pat_k, &warnings);
      for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
      for (const auto& s : ps.squares) std::cout << s.top << " " << s.left << " " << s.size << "\n";
      if (!pat_out.empty()) save_mask_pnm(squares_to_mask(ps, fg.height, fg.width), pat_out);
    } else if (*atk) {
      const PipelineConfig cfg = resolve(atk_o);
      PipelineSummary s;
      try {
        s = run_pipeline(cfg, progress_fn(atk_o.quiet));
      } catch (const IoError& e) {
        throw StartupError(e.what());
      }
      for (const auto& o : s.outcomes) {
        for (const auto& w : o.warnings) std::cerr << "warning: " << o.image_id << ": " << w << "\n";
        std::cout << o.image_id << ": mtr=" << o.record.mtr << " avg_sim=" << o.record.avg_sim
                  << " mas=" << o.record.mas << " audit=" << (o.attack.audit.passed(cfg.attack.epsilon) ? "ok" : "FAIL")
                  << " a_bg " << o.attack.attention_before.a_bg << " -> " << o.attack.attention_after.a_bg << "\n";
      }
      nlohmann::json j = {{"config_hash", s.config_hash},
                          {"report_checksum", s.report_checksum},
                          {"overall", summary_json(s.aggregate.overall)}};
      for (const auto& [m, sum] : s.aggregate.by_modality) j["by_modality"][m] = summary_json(sum);
      std::cout << j.dump(2) << "\n";
      for (const auto& o : s.outcomes) {
        if (!o.attack.audit.passed(cfg.attack.epsilon)) return kStageFailure;
      }
    } else if (*def) {
      const Image img = require_image(def_image);
      DefenseConfig d;
      d.kind = parse_defense_kind(def_kind);
      d.sigma = parse_number(def_sigma);
      d.bits = def_bits;
      d.down_factor = def_down;
      d.seed = def_seed;
      save_pnm(apply_defense(img, d), def_out);
    } else if (*ev) {
      const Image a = require_image(ev_orig);
      const Image b = require_image(ev_adv);
      const Vocabulary& vocab = default_vocabulary();
      const SurrogateEnsemble ens = build_ensemble(kDefaultSeeds);
      MetricConfig mc;
      mc.mas_mode = parse_mas_mode(ev_mode);
      const JudgeResult jr = mtr_rule_judge(vocab.tokenize(ev_find), vocab.tokenize(ev_adv_find), vocab);
      const Image as[] = {a};
      const Image bs[] = {b};
      const double sim = avg_sim(ens, as, bs);
      nlohmann::json j = {{"mtr", jr.score},
                          {"judge", std::string(to_string(jr.code))},
                          {"avg_sim", sim},
                          {"mas", mas(jr.score, std::max(sim, 0.0), mc)}};
      std::cout << j.dump(2) << "\n";
    } else if (*sw) {
      const PipelineConfig cfg = resolve(sw_o);
      SweepAxis axis;
      try {
        axis = parse_sweep_axis(sw_axis);
      } catch (const std::exception& e) {
        throw StartupError(e.what());
      }
      SweepResult r;
      try {
        r = run_sweep(cfg, axis, progress_fn(sw_o.quiet));
      } catch (const IoError& e) {
        throw StartupError(e.what());
      } catch (const ContractError& e) {
        throw StartupError(e.what());
      }
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "wrote " << r.csv.string() << "\n";
      for (const auto& row : r.rows) {
        if (!row.error.empty()) return kStageFailure;
      }
    } else if (*rep) {
      if (!fs::exists(rep_path)) throw StartupError("report not found: " + rep_path);
      MetricConfig mc;
      mc.mas_mode = parse_mas_mode(rep_mode);
      const AggregateReport r = summarize_report(rep_path, mc);
      nlohmann::json j = {{"overall", summary_json(r.overall)}};
      for (const auto& [m, sum] : r.by_modality) j["by_modality"][m] = summary_json(sum);
      std::cout << j.dump(2) << "\n";
    }
  } catch (const StartupError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kStartupError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kStageFailure;
  }
  return 0;
}
