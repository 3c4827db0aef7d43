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

// Objective terms of the attack. Each term has a graph form (used inside
// optimization, differentiable w.r.t. the image node) and a value form.

#include <cstddef>
#include <span>
#include <vector>

#include "focusleak/autodiff.hpp"
#include "focusleak/image.hpp"
#include "focusleak/rng.hpp"
#include "focusleak/surrogate.hpp"
#include "focusleak/vocabulary.hpp"

namespace focusleak {

// as_written: L = -sum cos(F(I), F(I')), so minimizing keeps block features
// close. disrupt: the negation, so minimizing pushes them apart.
enum class SignMode { as_written, disrupt };

struct LossWeights {
  double lambda_lm = 1.0;
  double lambda_attn = 1.0;
  std::size_t n_crops = 8;
  SignMode sign_mode = SignMode::as_written;

  void validate() const;
};

struct ImageTextPair {
  Image image;
  TokenSeq tokens;
};

// --- Block loss over every member: layer-1 patch rows plus the pooled row.
ad::Var image_block_loss(const SurrogateEnsemble& ens, const Image& original, ad::Var perturbed_gray,
                         SignMode mode);
double image_block_loss(const SurrogateEnsemble& ens, const Image& original, const Image& perturbed,
                        SignMode mode);

// --- Text fusion loss: -sum_t cos(F(I,x)_t, F(I',x')_t) over the common
// prefix, plus lambda_lm * LM loss of (I',x') against the target.
double text_fusion_loss(const SurrogateEnsemble& ens, const ImageTextPair& clean, const ImageTextPair& adv,
                        const TokenSeq& target, double lambda_lm);

// Reuses the clean fusion output across many candidate texts.
class TextFusionObjective {
 public:
  TextFusionObjective(const SurrogateEnsemble& ens, const ImageTextPair& clean, const Image& adv_image,
                      const TokenSeq& target, double lambda_lm);

  double operator()(const TokenSeq& adv_tokens) const;

 private:
  const SurrogateEnsemble* ens_;
  FusionOutput clean_;
  Image adv_image_;
  TokenSeq target_;
  double lambda_lm_;
};

// --- Local alignment: mean over crops and members of
// -cos(E(tau(I_adv)), E(tau(I_target))), the same crop on both images.
ad::Var local_alignment_loss(const SurrogateEnsemble& ens, ad::Var adv_gray, const Image& target,
                             std::span<const CropSpec> crops);
double local_alignment_loss(const SurrogateEnsemble& ens, const Image& adv_image, const Image& target,
                            SplitMix64& rng, std::size_t n_crops, const CropDistribution& dist = {});

std::vector<CropSpec> draw_crops(SplitMix64& rng, std::size_t height, std::size_t width, std::size_t n,
                                 const CropDistribution& dist);

// --- Attention masses: the fusion map upsampled to image size, renormalized
// to sum 1, split by the attack mask (background = mask).
struct AttentionMassVars {
  ad::Var a_fg;
  ad::Var a_bg;
  ad::Var map;  // [H, W], sums to 1
};

struct AttentionMasses {
  double a_fg = 0.0;
  double a_bg = 0.0;
};

AttentionMassVars attention_masses(const SurrogateEnsemble& ens, ad::Var adv_gray, const TokenSeq& seed_tokens,
                                   const BinaryMask& mask);
AttentionMasses attention_masses(const SurrogateEnsemble& ens, const Image& adv_image, const TokenSeq& seed_tokens,
                                 const BinaryMask& mask);

// log(A_fg) - log(A_bg)
ad::Var attention_loss(ad::Var a_fg, ad::Var a_bg);
double attention_loss(double a_fg, double a_bg);

double final_loss(double l_loc, double l_attn, double lambda_attn);

}  // namespace focusleak
