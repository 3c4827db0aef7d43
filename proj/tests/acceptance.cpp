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

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "focusleak/attack.hpp"
#include "focusleak/gradcheck.hpp"
#include "focusleak/metrics.hpp"
#include "focusleak/pipeline.hpp"
#include "focusleak/region.hpp"
#include "judge_cases.hpp"
#include "support.hpp"

using namespace focusleak;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const SurrogateEnsemble& ensemble() {
  static const SurrogateEnsemble ens = build_ensemble(kDefaultSeeds);
  return ens;
}

constexpr std::size_t kInstances = 10;

const char* const kFindings[kInstances] = {
    "mri left mild mass",        "ct right severe nodule",     "xray left lung mass",
    "mri brain tumor",           "ultrasound malignant nodule", "ct mild effusion left",
    "mammogram right breast mass", "xray benign nodule",       "mri right severe tumor",
    "dermoscopy malignant lesion"};

// A synthetic scan with its background support and seed-stage target.
struct Instance {
  Image clean;
  BinaryMask support;
  Image target;
  TokenSeq seed_tokens;
};

Instance make_instance(std::size_t i) {
  const Vocabulary& vocab = default_vocabulary();
  Instance in;
  in.clean = testing::synthetic_scan(1000 + i, 64);
  const BinaryMask fg = heuristic_foreground_mask(in.clean, 0.5, 0.01);
  in.support = squares_to_mask(top_k_squares(fg.complement(), 10), 64, 64);

  AttackConfig cfg;
  cfg.seed = i;
  const TokenSeq clean_text = vocab.tokenize(kFindings[i]);
  SplitMix64 rng(derive_seed(i, 0xF1D1));
  const TokenSeq adv_text = generate_adversarial_findings(clean_text, vocab, 1, rng);
  const MultimodalSeed seed = build_multimodal_seed(adv_text, vocab, 64, 64);
  const SeedStageResult s = optimize_seed_alternating(ensemble(), seed, {in.clean, clean_text}, adv_text, cfg);
  in.target = s.image;
  in.seed_tokens = s.tokens;
  return in;
}

const std::vector<Instance>& instances() {
  static const std::vector<Instance> all = [] {
    std::vector<Instance> v;
    for (std::size_t i = 0; i < kInstances; ++i) v.push_back(make_instance(i));
    return v;
  }();
  return all;
}

AttackResult attack(std::size_t i, double epsilon, double lambda_attn) {
  const Instance& in = instances()[i];
  AttackConfig cfg;
  cfg.epsilon = epsilon;
  cfg.weights.lambda_attn = lambda_attn;
  cfg.seed = i;
  return run_focusleak_attack(ensemble(), in.clean, in.support, in.target, in.seed_tokens, cfg);
}

// Runs shared by criteria 5-8, keyed by (epsilon, lambda).
struct RunSet {
  std::vector<AttackResult> eps16_attn, eps16_plain, eps8_plain, eps4_plain;
};

const RunSet& runs() {
  static const RunSet r = [] {
    RunSet s;
    for (std::size_t i = 0; i < kInstances; ++i) {
      s.eps16_attn.push_back(attack(i, 16.0 / 255.0, 1.0));
      s.eps16_plain.push_back(attack(i, 16.0 / 255.0, 0.0));
      s.eps8_plain.push_back(attack(i, 8.0 / 255.0, 0.0));
      s.eps4_plain.push_back(attack(i, 4.0 / 255.0, 0.0));
    }
    return s;
  }();
  return r;
}

// --- criteria -------------------------------------------------------------------

Outcome table_arithmetic() {
  struct Row {
    double mtr, avg_sim, reported, tol;
  };
  // Published (MTR, AvgSim, MAS) triples; the reported MAS is rounded.
  const Row rows[] = {{0.79, 0.85, 0.67, 0.005}, {0.75, 0.85, 0.63, 0.01}, {0.68, 0.85, 0.57, 0.01},
                      {0.69, 0.75, 0.518, 0.01}, {0.54, 0.79, 0.42, 0.01}, {0.63, 0.83, 0.52, 0.01}};
  const auto t0 = Clock::now();
  std::size_t ok = 0;
  double first = 0.0;
  for (const Row& r : rows) {
    const double v = mas(r.mtr, r.avg_sim);
    if (&r == rows) first = v;
    ok += std::abs(v - r.reported) <= r.tol;
  }
  const double ms = seconds_since(t0) * 1e3;
  const bool exact = std::abs(first - 0.6715) < 1e-12 && std::abs(std::round(first * 100.0) / 100.0 - 0.67) < 1e-12;
  return {ok == 6 && exact && ms < 1.0, fmt("%zu/6 rows within tolerance, mas(0.79,0.85)=%.4f, %.3f ms", ok, first, ms)};
}

Outcome geometric_mas() {
  MetricConfig c;
  c.mas_mode = MasMode::geometric;
  const double v = mas(0.79, 0.85, c);
  const double expected = std::exp(0.5 * std::log(0.790001) + 0.5 * std::log(0.850001));
  const double z = mas(0.0, 0.85, c);
  const double approx = std::sqrt(1e-6 * 0.85);
  const double rel = std::abs(z - approx) / approx;
  return {std::abs(v - expected) < 1e-9 && rel < 1e-6,
          fmt("mas(0.79,0.85)=%.12f (err %.1e), mas(0,0.85)=%.6e (rel err %.1e)", v, std::abs(v - expected), z, rel)};
}

Outcome dp_oracle() {
  SplitMix64 rng(20240);
  const auto t0 = Clock::now();
  std::size_t agree = 0, total = 0;
  while (total < 200) {
    const BinaryMask m = testing::random_mask(rng, 24, 24, rng.uniform(0.3, 0.9));
    if (m.popcount() == 0) continue;
    ++total;
    agree += top_k_squares(m, 1).squares.at(0).size == brute_force_top_square(m).size;
  }
  const double s = seconds_since(t0);
  return {agree == 200 && s < 2.0, fmt("%zu/200 agree, %.3f s", agree, s)};
}

Outcome gradient_correctness() {
  const Instance& in = instances()[0];
  const std::size_t n = in.clean.pixels.size();
  const auto crops = [&] {
    SplitMix64 rng(77);
    return draw_crops(rng, 64, 64, 8, CropDistribution{});
  }();
  std::vector<std::size_t> on;
  for (std::size_t i = 0; i < n; ++i) {
    if (in.support.bits[i]) on.push_back(i);
  }
  ad::Tensor mask_t({1, n});
  for (std::size_t i = 0; i < n; ++i) mask_t.data[i] = in.support.bits[i];

  enum Which { loc, attn, final_ };
  auto build = [&](ad::Graph& g, ad::Var d, Which w) {
    ad::Var adv = ad::clamp01_pass_through(
        ad::add(g.constant(ad::Tensor({1, n}, in.clean.pixels)), ad::mul(g.constant(mask_t), d)));
    ad::Var gray = gray_plane(adv, 1, 64, 64);
    ad::Var l_loc = local_alignment_loss(ensemble(), gray, in.target, crops);
    if (w == loc) return l_loc;
    const AttentionMassVars m = attention_masses(ensemble(), gray, in.seed_tokens, in.support);
    ad::Var l_attn = attention_loss(m.a_fg, m.a_bg);
    return w == attn ? l_attn : ad::add(l_loc, l_attn);
  };

  SplitMix64 rng(4242);
  double worst[3] = {0.0, 0.0, 0.0};
  for (int point = 0; point < 20; ++point) {
    // Keep every perturbed pixel at least 2/255 away from the clamp.
    ad::Tensor delta({1, n});
    for (std::size_t i : on) {
      const double p = in.clean.pixels[i];
      const double lo = std::max(-16.0 / 255.0, 2.0 / 255.0 - p), hi = std::min(16.0 / 255.0, 1.0 - 2.0 / 255.0 - p);
      delta.data[i] = rng.uniform(lo, hi);
    }
    std::vector<std::size_t> coords;
    for (int c = 0; c < 5; ++c) coords.push_back(on[rng.below(on.size())]);
    for (Which w : {loc, attn, final_}) {
      ad::Graph g;
      ad::Var d = g.leaf(delta);
      g.backward(build(g, d, w));
      const ad::Tensor grad = g.grad(d);
      const auto numeric = ad::finite_difference_at(
          [&](const ad::Tensor& t) {
            ad::Graph h;
            return build(h, h.leaf(t), w).value().item();
          },
          delta, coords, 1e-5);
      for (std::size_t c = 0; c < coords.size(); ++c) {
        worst[w] = std::max(worst[w], ad::relative_error(grad.data[coords[c]], numeric[c]));
      }
    }
  }
  const double m = std::max({worst[0], worst[1], worst[2]});
  return {m < 1e-4, fmt("max rel err L_loc %.2e, L_attn %.2e, L_final %.2e", worst[0], worst[1], worst[2])};
}

Outcome constraint_audit() {
  const double eps = 16.0 / 255.0;
  std::size_t ok = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < kInstances; ++i) {
    const AttackResult& r = runs().eps16_attn[i];
    const Instance& in = instances()[i];
    bool pass = r.trace.size() == 300;
    const double m = r.delta.max_abs();
    worst = std::max(worst, m);
    pass = pass && m <= eps + 1e-12;
    for (std::size_t p = 0; p < r.delta.delta.size(); ++p) {
      if (!in.support.bits[p] && r.delta.delta[p] != 0.0) pass = false;
      if (!in.support.bits[p] && r.adversarial.pixels[p] != in.clean.pixels[p]) pass = false;
    }
    for (double v : r.adversarial.pixels) pass = pass && v >= 0.0 && v <= 1.0;
    ok += pass;
  }
  return {ok == kInstances, fmt("%zu/10 runs pass, max|delta*| = %.6f (budget %.6f)", ok, worst, eps)};
}

Outcome optimization_progress() {
  std::size_t ok = 0;
  double mean_gain = 0.0;
  for (const AttackResult& r : runs().eps16_attn) {
    bool pass = r.best_l_final <= r.trace.front().l_final;
    for (std::size_t i = 1; i < r.trace.size(); ++i) pass = pass && r.trace[i].best_l_final <= r.trace[i - 1].best_l_final;
    pass = pass && r.last_iterate.best_l_final <= r.trace.back().best_l_final;
    ok += pass;
    mean_gain += (r.trace.front().l_final - r.best_l_final) / kInstances;
  }
  return {ok == kInstances, fmt("%zu/10 runs monotone with L_final(delta*) <= L_final(0), mean decrease %.4f", ok, mean_gain)};
}

Outcome attention_shift() {
  std::size_t wins = 0;
  std::ostringstream pairs;
  for (std::size_t i = 0; i < kInstances; ++i) {
    const double with = runs().eps16_attn[i].attention_after.a_bg;
    const double without = runs().eps16_plain[i].attention_after.a_bg;
    wins += with > without;
    pairs << fmt(" %.3f/%.3f", with, without);
  }
  return {wins >= 8, fmt("%zu/10 instances with larger A_bg (lambda=1 / lambda=0:", wins) + pairs.str() + ")"};
}

Outcome budget_monotonicity() {
  std::size_t ok = 0;
  std::ostringstream vals;
  for (std::size_t i = 0; i < kInstances; ++i) {
    const double l4 = runs().eps4_plain[i].eval_l_loc;
    const double l8 = runs().eps8_plain[i].eval_l_loc;
    const double l16 = runs().eps16_plain[i].eval_l_loc;
    ok += l8 <= l4 && l16 <= l8;
    vals << fmt(" [%.4f %.4f %.4f]", l4, l8, l16);
  }
  return {ok >= 8, fmt("%zu/10 instances non-increasing in epsilon (L_loc at 4/8/16:", ok) + vals.str() + ")"};
}

Outcome greedy_oracle() {
  EnsembleDims dims;
  dims.vocab_size = 8;
  const SurrogateEnsemble toy = build_ensemble(kDefaultSeeds, dims);
  std::size_t ok = 0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    SplitMix64 rng(derive_seed(s, 0x6EED));
    auto tokens = [&](std::size_t len) {
      TokenSeq t;
      for (std::size_t i = 0; i < len; ++i) t.ids.push_back(rng.below(8));
      return t;
    };
    const ImageTextPair clean{testing::random_image(rng, 32, 32), tokens(3)};
    const Image img = testing::random_image(rng, 32, 32);
    const TokenSeq start = tokens(3), target = tokens(3);
    const double lambda = rng.uniform(0.0, 2.0);

    // Exhaustive per-position optimum, left to right.
    TokenSeq expected = start;
    for (std::size_t pos = 0; pos < 3; ++pos) {
      std::size_t best = expected.ids[pos];
      double best_loss = text_fusion_loss(toy, clean, {img, expected}, target, lambda);
      for (std::size_t v = 0; v < 8; ++v) {
        TokenSeq probe = expected;
        probe.ids[pos] = v;
        const double l = text_fusion_loss(toy, clean, {img, probe}, target, lambda);
        if (l < best_loss) {
          best_loss = l;
          best = v;
        }
      }
      expected.ids[pos] = best;
    }
    ok += greedy_token_substitution(toy, clean, img, start, target, lambda) == expected;
  }
  return {ok == 50, fmt("%zu/50 cases match the exhaustive optimum", ok)};
}

Outcome judge_bands_golden() {
  const Vocabulary& v = default_vocabulary();
  std::size_t ok = 0;
  for (const auto& c : testing::kJudgeCases) {
    const JudgeResult r = mtr_rule_judge(v.tokenize(c.original), v.tokenize(c.output), v);
    ok += r.score == c.score && r.code == c.code;
  }
  SplitMix64 rng(31);
  std::size_t in_band = 0;
  for (int i = 0; i < 5000; ++i) {
    TokenSeq a, b;
    const std::size_t n = 1 + rng.below(6);
    for (std::size_t k = 0; k < n; ++k) a.ids.push_back(rng.below(v.size()));
    b = a;
    for (std::size_t k = 0; k < n; ++k) {
      if (rng.below(3) == 0) b.ids[k] = rng.below(v.size());
    }
    in_band += in_declared_band(mtr_rule_judge(a, b, v).score);
  }
  return {ok == 12 && in_band == 5000, fmt("%zu/12 golden cases, %zu/5000 random outputs inside a band", ok, in_band)};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Outcome end_to_end_determinism() {
  const fs::path root = fs::temp_directory_path() / "focusleak_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path img = root / "scan.pgm";
  save_pnm(testing::synthetic_scan(4242, 64), img);

  double worst = 0.0;
  std::vector<PipelineSummary> summaries;
  std::vector<std::string> adv;
  for (const char* run : {"run_a", "run_b"}) {
    PipelineConfig c;
    c.images = {img};
    c.findings = "mri left mild mass";
    c.modality = "mri";
    c.output_dir = root / run;
    c.attack.iterations = 300;
    c.attack.weights.n_crops = 8;
    c.attack.seed = 11;
    const auto t0 = Clock::now();
    summaries.push_back(run_pipeline(c));
    worst = std::max(worst, seconds_since(t0));
    adv.push_back(slurp(c.output_dir / "scan_adv.pgm"));
  }
  const bool same = !adv[0].empty() && adv[0] == adv[1] &&
                    summaries[0].report_checksum == summaries[1].report_checksum;
  return {same && worst < 60.0, fmt("images %s, report checksums %s / %s, slowest run %.2f s",
                                    adv[0] == adv[1] ? "identical" : "DIFFER", summaries[0].report_checksum.c_str(),
                                    summaries[1].report_checksum.c_str(), worst)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"metric arithmetic vs reported table", table_arithmetic},
      {"geometric MAS formula", geometric_mas},
      {"maximal-square DP vs brute force", dp_oracle},
      {"gradient correctness", gradient_correctness},
      {"constraint audit", constraint_audit},
      {"optimization progress", optimization_progress},
      {"attention shift", attention_shift},
      {"budget monotonicity", budget_monotonicity},
      {"greedy text oracle", greedy_oracle},
      {"judge bands", judge_bands_golden},
      {"end-to-end determinism", end_to_end_determinism},
  };
  int failures = 0;
  int index = 0;
  for (const Criterion& c : criteria) {
    ++index;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s [%d] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", index, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", index - failures, index);
  return failures == 0 ? 0 : 1;
}
