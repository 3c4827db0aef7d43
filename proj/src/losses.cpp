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

#include "focusleak/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "focusleak/error.hpp"

namespace focusleak {

void LossWeights::validate() const {
  if (!(lambda_lm >= 0.0) || !(lambda_attn >= 0.0)) throw ContractError("loss weights must be >= 0");
  if (n_crops == 0) throw ContractError("n_crops must be >= 1");
}

// ---------------------------------------------------------------------------

ad::Var image_block_loss(const SurrogateEnsemble& ens, const Image& original, ad::Var perturbed_gray,
                         SignMode mode) {
  ad::Graph& g = *perturbed_gray.graph;
  if (perturbed_gray.shape() != ad::Shape{original.height, original.width}) {
    throw ContractError("image_block_loss: original " + ad::shape_str({original.height, original.width}) +
                        " vs perturbed " + ad::shape_str(perturbed_gray.shape()));
  }
  ad::Var orig_gray = gray_constant(g, original);
  ad::Var total;
  bool first = true;
  for (const auto& member : ens.members) {
    const FeatureVars fo = member_forward(ens, member, orig_gray);
    const FeatureVars fp = member_forward(ens, member, perturbed_gray);
    ad::Var s = ad::add(ad::sum_all(ad::cosine_similarity(fo.patches, fp.patches)),
                        ad::sum_all(ad::cosine_similarity(fo.pooled, fp.pooled)));
    total = first ? s : ad::add(total, s);
    first = false;
  }
  return ad::scalar_mul(total, mode == SignMode::as_written ? -1.0 : 1.0);
}

double image_block_loss(const SurrogateEnsemble& ens, const Image& original, const Image& perturbed,
                        SignMode mode) {
  if (original.height != perturbed.height || original.width != perturbed.width) {
    throw ContractError("image_block_loss: images differ in spatial size");
  }
  ad::Graph g;
  return image_block_loss(ens, original, gray_constant(g, perturbed), mode).value().item();
}

// ---------------------------------------------------------------------------

namespace {

double fusion_cos_sum(const ad::Tensor& a, const ad::Tensor& b, std::size_t rows) {
  const std::size_t d = a.shape[1];
  double total = 0.0;
  for (std::size_t t = 0; t < rows; ++t) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double x = a.data[t * d + i], y = b.data[t * d + i];
      dot += x * y;
      na += x * x;
      nb += y * y;
    }
    total += dot / std::sqrt(std::max(na * nb, 1e-24));
  }
  return total;
}

}  // namespace

TextFusionObjective::TextFusionObjective(const SurrogateEnsemble& ens, const ImageTextPair& clean,
                                         const Image& adv_image, const TokenSeq& target, double lambda_lm)
    : ens_(&ens), clean_(fuse(ens, clean.image, clean.tokens)), adv_image_(adv_image), target_(target),
      lambda_lm_(lambda_lm) {
  if (!(lambda_lm >= 0.0)) throw ContractError("lambda_lm must be >= 0");
}

double TextFusionObjective::operator()(const TokenSeq& adv_tokens) const {
  const std::size_t common = std::min(clean_.fused.shape[0], adv_tokens.size());
  if (common == 0) throw ContractError("text_fusion_loss: no overlapping token positions");
  const FusionOutput adv = fuse(*ens_, adv_image_, adv_tokens);
  double loss = -fusion_cos_sum(clean_.fused, adv.fused, common);
  if (lambda_lm_ != 0.0) loss += lambda_lm_ * lm_loss(*ens_, adv, target_);
  return loss;
}

double text_fusion_loss(const SurrogateEnsemble& ens, const ImageTextPair& clean, const ImageTextPair& adv,
                        const TokenSeq& target, double lambda_lm) {
  return TextFusionObjective(ens, clean, adv.image, target, lambda_lm)(adv.tokens);
}

// ---------------------------------------------------------------------------

std::vector<CropSpec> draw_crops(SplitMix64& rng, std::size_t height, std::size_t width, std::size_t n,
                                 const CropDistribution& dist) {
  std::vector<CropSpec> crops;
  crops.reserve(n);
  for (std::size_t i = 0; i < n; ++i) crops.push_back(sample_crop(rng, height, width, dist));
  return crops;
}

ad::Var local_alignment_loss(const SurrogateEnsemble& ens, ad::Var adv_gray, const Image& target,
                             std::span<const CropSpec> crops) {
  if (crops.empty()) throw ContractError("local_alignment_loss: n_crops must be >= 1");
  ad::Graph& g = *adv_gray.graph;
  const std::size_t h = target.height, w = target.width;
  if (adv_gray.shape() != ad::Shape{h, w}) {
    throw ContractError("local_alignment_loss: adversarial " + ad::shape_str(adv_gray.shape()) + " vs target " +
                        ad::shape_str({h, w}));
  }
  ad::Graph target_graph;
  ad::Var target_gray = gray_constant(target_graph, target);

  ad::Var total;
  bool first = true;
  for (const CropSpec& crop : crops) {
    const ResampleWindow win = crop.window(h, w);
    ad::Var adv_crop = ad::bilinear_resample(adv_gray, win);
    ad::Var tgt_crop = ad::bilinear_resample(target_gray, win);
    for (const auto& member : ens.members) {
      const ad::Tensor& tgt_emb = member_forward(ens, member, tgt_crop).embedding.value();
      ad::Var adv_emb = member_forward(ens, member, adv_crop).embedding;
      ad::Var c = ad::cosine_similarity(adv_emb, g.constant(tgt_emb));
      total = first ? c : ad::add(total, c);
      first = false;
    }
  }
  const double n = static_cast<double>(crops.size() * ens.members.size());
  return ad::scalar_mul(ad::sum_all(total), -1.0 / n);
}

double local_alignment_loss(const SurrogateEnsemble& ens, const Image& adv_image, const Image& target,
                            SplitMix64& rng, std::size_t n_crops, const CropDistribution& dist) {
  if (n_crops == 0) throw ContractError("local_alignment_loss: n_crops must be >= 1");
  if (adv_image.height != target.height || adv_image.width != target.width) {
    throw ContractError("local_alignment_loss: images differ in spatial size");
  }
  const auto crops = draw_crops(rng, target.height, target.width, n_crops, dist);
  ad::Graph g;
  return local_alignment_loss(ens, gray_constant(g, adv_image), target, crops).value().item();
}

// ---------------------------------------------------------------------------

AttentionMassVars attention_masses(const SurrogateEnsemble& ens, ad::Var adv_gray, const TokenSeq& seed_tokens,
                                   const BinaryMask& mask) {
  ad::Graph& g = *adv_gray.graph;
  const std::size_t h = mask.height, w = mask.width;
  if (adv_gray.shape() != ad::Shape{h, w}) {
    throw ContractError("attention_masses: mask " + ad::shape_str({h, w}) + " vs image " +
                        ad::shape_str(adv_gray.shape()));
  }
  const std::size_t on = mask.popcount();
  if (on == 0 || on == h * w) {
    throw ContractError("attention_masses: mask must be neither empty nor full");
  }
  const FusionVars f = fuse_forward(ens, adv_gray, seed_tokens);
  const std::size_t grid = ens.dims.grid();
  ad::Var up = ad::bilinear_resample(f.spatial_map, ResampleWindow::full(grid, grid, h, w));
  ad::Var map = ad::div_scalar(up, ad::sum_all(up));
  ad::Tensor bg({h, w}), fg({h, w});
  for (std::size_t i = 0; i < h * w; ++i) {
    bg.data[i] = mask.bits[i] ? 1.0 : 0.0;
    fg.data[i] = 1.0 - bg.data[i];
  }
  return {ad::sum_all(ad::mul(map, g.constant(std::move(fg)))), ad::sum_all(ad::mul(map, g.constant(std::move(bg)))),
          map};
}

AttentionMasses attention_masses(const SurrogateEnsemble& ens, const Image& adv_image, const TokenSeq& seed_tokens,
                                 const BinaryMask& mask) {
  ad::Graph g;
  const auto m = attention_masses(ens, gray_constant(g, adv_image), seed_tokens, mask);
  return {m.a_fg.value().item(), m.a_bg.value().item()};
}

ad::Var attention_loss(ad::Var a_fg, ad::Var a_bg) {
  for (double v : {a_fg.value().item(), a_bg.value().item()}) {
    if (!(v > 0.0)) throw NumericError("attention_loss: non-positive attention mass " + std::to_string(v));
  }
  return ad::sub(ad::log(a_fg), ad::log(a_bg));
}

double attention_loss(double a_fg, double a_bg) {
  for (double v : {a_fg, a_bg}) {
    if (!(v > 0.0)) throw NumericError("attention_loss: non-positive attention mass " + std::to_string(v));
  }
  return std::log(a_fg) - std::log(a_bg);
}

double final_loss(double l_loc, double l_attn, double lambda_attn) { return l_loc + lambda_attn * l_attn; }

}  // namespace focusleak
