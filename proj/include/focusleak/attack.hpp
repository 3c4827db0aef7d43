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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "focusleak/image.hpp"
#include "focusleak/losses.hpp"
#include "focusleak/rng.hpp"
#include "focusleak/surrogate.hpp"
#include "focusleak/vocabulary.hpp"

namespace focusleak {

struct AttackConfig {
  double epsilon = 16.0 / 255.0;
  double step = 1.0 / 255.0;
  std::size_t iterations = 300;
  std::size_t k = 10;
  LossWeights weights;
  CropDistribution crops;
  std::uint64_t seed = 0;
  std::size_t num_edits = 1;

  // Seed-stage alternation: rounds of (PGD on the seed image, one greedy
  // text pass), stopping early once the round's best block loss moves less
  // than seed_tolerance and the text is unchanged.
  std::size_t seed_rounds = 3;
  std::size_t seed_pgd_steps = 20;
  double seed_tolerance = 1e-6;

  void validate() const;
};

// delta has the image layout [C, H, W]; support is the spatial mask it may
// occupy (shared by all channels).
struct Perturbation {
  std::vector<double> delta;
  BinaryMask support;
  std::size_t channels = 1;

  double max_abs() const;
  // Count of nonzero delta entries where support = 0.
  std::size_t off_support_nonzero() const;
};

// Clamp each coordinate to [-epsilon, epsilon], zero outside support.
Perturbation project_delta(std::vector<double> delta, const BinaryMask& support, std::size_t channels,
                           double epsilon);

// --- Findings generation ------------------------------------------------------

// Exactly num_edits single-token swaps at distinct positions, drawn from the
// antonym/severity table; modality tokens are never touched.
TokenSeq generate_adversarial_findings(const TokenSeq& original, const Vocabulary& vocab, std::size_t num_edits,
                                       SplitMix64& rng);

struct MultimodalSeed {
  Image image;
  TokenSeq tokens;
  std::vector<std::string> warnings;
};

// White canvas with the findings rendered on it.
MultimodalSeed build_multimodal_seed(const TokenSeq& adv_findings, const Vocabulary& vocab, std::size_t canvas_h,
                                     std::size_t canvas_w);

// One left-to-right pass; at each position every vocabulary token is scored
// and the argmin kept (ties keep the incumbent, then the lowest id).
TokenSeq greedy_token_substitution(const TextFusionObjective& objective, const TokenSeq& tokens,
                                   std::size_t vocab_size);
TokenSeq greedy_token_substitution(const SurrogateEnsemble& ens, const ImageTextPair& clean, const Image& image,
                                   const TokenSeq& tokens, const TokenSeq& target, double lambda_lm);

struct SeedStageResult {
  Image image;     // multimodal target image
  TokenSeq tokens; // adversarial text after the last greedy pass
  std::vector<double> round_best_block_loss;
  std::vector<double> round_text_loss;
  std::size_t rounds_run = 0;
  bool early_stopped = false;
};

SeedStageResult optimize_seed_alternating(const SurrogateEnsemble& ens, const MultimodalSeed& seed,
                                          const ImageTextPair& clean, const TokenSeq& target,
                                          const AttackConfig& config);

// --- Masked attack ------------------------------------------------------------

struct TraceRow {
  double l_loc = 0.0;
  double l_attn = 0.0;
  double l_final = 0.0;
  double a_fg = 0.0;
  double a_bg = 0.0;
  double best_l_final = 0.0;
};

struct ConstraintAudit {
  double max_abs_delta = 0.0;
  std::size_t off_support_nonzero = 0;
  bool pixels_in_range = true;

  bool passed(double epsilon) const {
    return max_abs_delta <= epsilon + 1e-12 && off_support_nonzero == 0 && pixels_in_range;
  }
};

struct AttackResult {
  Image adversarial;
  Perturbation delta;  // best-so-far delta*
  TokenSeq adversarial_text;
  // trace[n] evaluates the n-th iterate (trace[0] is delta = 0).
  std::vector<TraceRow> trace;
  // Evaluation of the iterate produced by the last step.
  TraceRow last_iterate;
  // In [0, iterations]; == iterations means the last iterate won.
  std::size_t best_iteration = 0;
  double best_l_final = 0.0;
  ConstraintAudit audit;
  AttentionMasses attention_before;
  AttentionMasses attention_after;
  // L_loc of delta = 0 and of delta* on one fixed evaluation crop set.
  double eval_l_loc_clean = 0.0;
  double eval_l_loc = 0.0;
};

// Called after every projection with the new iterate.
using IterateObserver = std::function<void(std::size_t iteration, const Perturbation&, const Image& adversarial)>;

// Signed-gradient descent on L_loc + lambda_attn * L_attn over deltas
// supported on mask, starting from zero and keeping the best iterate.
AttackResult run_focusleak_attack(const SurrogateEnsemble& ens, const Image& clean_image, const BinaryMask& mask,
                                  const Image& target_image, const TokenSeq& seed_tokens,
                                  const AttackConfig& config, const IterateObserver& observer = {});

}  // namespace focusleak
