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

#include "focusleak/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "focusleak/error.hpp"

namespace focusleak {

namespace {

constexpr std::uint64_t kCropSalt = 0xC0F5;
constexpr std::uint64_t kEvalSalt = 0xE7A1;

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

ad::Tensor as_node_tensor(const Image& img) {
  return ad::Tensor({img.channels, img.plane_size()}, img.pixels);
}

ad::Tensor mask_tensor(const BinaryMask& mask, std::size_t channels) {
  ad::Tensor t({channels, mask.height * mask.width});
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t i = 0; i < mask.bits.size(); ++i) t.data[c * mask.bits.size() + i] = mask.bits[i];
  return t;
}

// Builds clamp01(base + mask * delta) as a graph node and its gray plane.
struct AdvNodes {
  ad::Var delta;
  ad::Var gray;
};

AdvNodes adversarial_nodes(ad::Graph& g, const Image& base, const ad::Tensor& mask_t, const std::vector<double>& delta) {
  ad::Var d = g.leaf(ad::Tensor({base.channels, base.plane_size()}, delta));
  ad::Var adv = ad::clamp01_pass_through(ad::add(g.constant(as_node_tensor(base)), ad::mul(g.constant(mask_t), d)));
  return {d, gray_plane(adv, base.channels, base.height, base.width)};
}

}  // namespace

void AttackConfig::validate() const {
  if (!(step > 0.0 && step <= epsilon && epsilon <= 1.0)) {
    throw ContractError("attack config: need 0 < step <= epsilon <= 1");
  }
  if (iterations == 0) throw ContractError("attack config: iterations must be >= 1");
  if (k == 0) throw ContractError("attack config: k must be >= 1");
  if (num_edits == 0) throw ContractError("attack config: num_edits must be >= 1");
  weights.validate();
}

double Perturbation::max_abs() const {
  double m = 0.0;
  for (double v : delta) m = std::max(m, std::abs(v));
  return m;
}

std::size_t Perturbation::off_support_nonzero() const {
  const std::size_t plane = support.bits.size();
  std::size_t count = 0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    if (support.bits[i % plane] == 0 && delta[i] != 0.0) ++count;
  }
  return count;
}

Perturbation project_delta(std::vector<double> delta, const BinaryMask& support, std::size_t channels,
                           double epsilon) {
  const std::size_t plane = support.bits.size();
  if (delta.size() != plane * channels) {
    throw ContractError("project_delta: delta has " + std::to_string(delta.size()) + " values, support " +
                        std::to_string(plane) + " x " + std::to_string(channels) + " channels");
  }
  for (std::size_t i = 0; i < delta.size(); ++i) {
    delta[i] = support.bits[i % plane] ? std::clamp(delta[i], -epsilon, epsilon) : 0.0;
  }
  return {std::move(delta), support, channels};
}

// ---------------------------------------------------------------------------

TokenSeq generate_adversarial_findings(const TokenSeq& original, const Vocabulary& vocab, std::size_t num_edits,
                                       SplitMix64& rng) {
  if (num_edits == 0) throw ContractError("generate_adversarial_findings: num_edits must be >= 1");
  original.validate(vocab.size());
  std::vector<std::size_t> editable;
  for (std::size_t i = 0; i < original.size(); ++i) {
    const auto partner = swap_partner(vocab.word(original.ids[i]));
    if (partner && vocab.find(*partner)) editable.push_back(i);
  }
  if (editable.size() < num_edits) {
    std::string where;
    for (std::size_t p : editable) where += (where.empty() ? "" : ",") + std::to_string(p);
    throw ContractError("generate_adversarial_findings: " + std::to_string(num_edits) + " edits requested but only " +
                        std::to_string(editable.size()) + " editable positions [" + where + "]");
  }
  // Partial Fisher-Yates: the first num_edits entries become the chosen positions.
  for (std::size_t i = 0; i < num_edits; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(editable.size() - i));
    std::swap(editable[i], editable[j]);
  }
  TokenSeq out = original;
  for (std::size_t i = 0; i < num_edits; ++i) {
    const std::size_t pos = editable[i];
    out.ids[pos] = *vocab.find(*swap_partner(vocab.word(original.ids[pos])));
  }
  return out;
}

MultimodalSeed build_multimodal_seed(const TokenSeq& adv_findings, const Vocabulary& vocab, std::size_t canvas_h,
                                     std::size_t canvas_w) {
  adv_findings.validate(vocab.size());
  TextRaster r = rasterize_text(vocab.detokenize(adv_findings), canvas_h, canvas_w);
  return {std::move(r.image), adv_findings, std::move(r.warnings)};
}

TokenSeq greedy_token_substitution(const TextFusionObjective& objective, const TokenSeq& tokens,
                                   std::size_t vocab_size) {
  tokens.validate(vocab_size);
  TokenSeq cur = tokens;
  double cur_loss = objective(cur);
  for (std::size_t pos = 0; pos < cur.size(); ++pos) {
    const std::size_t incumbent = cur.ids[pos];
    std::size_t best = incumbent;
    double best_loss = cur_loss;
    TokenSeq probe = cur;
    for (std::size_t v = 0; v < vocab_size; ++v) {
      if (v == incumbent) continue;
      probe.ids[pos] = v;
      const double l = objective(probe);
      if (l < best_loss) {
        best_loss = l;
        best = v;
      }
    }
    cur.ids[pos] = best;
    cur_loss = best_loss;
  }
  return cur;
}

TokenSeq greedy_token_substitution(const SurrogateEnsemble& ens, const ImageTextPair& clean, const Image& image,
                                   const TokenSeq& tokens, const TokenSeq& target, double lambda_lm) {
  const TextFusionObjective objective(ens, clean, image, target, lambda_lm);
  return greedy_token_substitution(objective, tokens, ens.dims.vocab_size);
}

// ---------------------------------------------------------------------------

SeedStageResult optimize_seed_alternating(const SurrogateEnsemble& ens, const MultimodalSeed& seed,
                                          const ImageTextPair& clean, const TokenSeq& target,
                                          const AttackConfig& config) {
  config.validate();
  const Image& base = seed.image;
  const BinaryMask full(base.height, base.width, 1);
  const ad::Tensor mask_t = mask_tensor(full, base.channels);

  SeedStageResult out;
  out.image = base;
  out.tokens = seed.tokens;
  std::vector<double> delta(base.pixels.size(), 0.0);
  std::vector<double> best_delta = delta;
  double best_loss = std::numeric_limits<double>::infinity();

  for (std::size_t round = 0; round < config.seed_rounds; ++round) {
    for (std::size_t step = 0; step < config.seed_pgd_steps; ++step) {
      ad::Graph g;
      const AdvNodes nodes = adversarial_nodes(g, base, mask_t, delta);
      ad::Var loss = image_block_loss(ens, clean.image, nodes.gray, config.weights.sign_mode);
      const double value = loss.value().item();
      if (value < best_loss) {
        best_loss = value;
        best_delta = delta;
      }
      g.backward(loss);
      const ad::Tensor grad = g.grad(nodes.delta);
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= config.step * sign(grad.data[i]);
      delta = project_delta(std::move(delta), full, base.channels, config.epsilon).delta;
    }
    // The final step's iterate is a candidate too.
    {
      const Image probe = apply_masked_delta(base, full, delta);
      const double value = image_block_loss(ens, clean.image, probe, config.weights.sign_mode);
      if (value < best_loss) {
        best_loss = value;
        best_delta = delta;
      }
    }
    out.image = apply_masked_delta(base, full, best_delta);

    const TextFusionObjective objective(ens, clean, out.image, target, config.weights.lambda_lm);
    const TokenSeq next = greedy_token_substitution(objective, out.tokens, ens.dims.vocab_size);
    const bool text_stable = next == out.tokens;
    out.tokens = next;
    out.round_text_loss.push_back(objective(out.tokens));

    const bool image_stable =
        !out.round_best_block_loss.empty() && std::abs(out.round_best_block_loss.back() - best_loss) < config.seed_tolerance;
    out.round_best_block_loss.push_back(best_loss);
    out.rounds_run = round + 1;
    if (image_stable && text_stable) {
      out.early_stopped = true;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

AttackResult run_focusleak_attack(const SurrogateEnsemble& ens, const Image& clean_image, const BinaryMask& mask,
                                  const Image& target_image, const TokenSeq& seed_tokens,
                                  const AttackConfig& config, const IterateObserver& observer) {
  config.validate();
  clean_image.validate();
  if (mask.height != clean_image.height || mask.width != clean_image.width) {
    throw ContractError("run_focusleak_attack: mask size differs from image size");
  }
  const std::size_t on = mask.popcount();
  if (on == 0 || on == mask.bits.size()) {
    throw ContractError("run_focusleak_attack: mask must be neither empty nor full");
  }
  if (target_image.height != clean_image.height || target_image.width != clean_image.width) {
    throw ContractError("run_focusleak_attack: target image size differs from clean image size");
  }

  const ad::Tensor mask_t = mask_tensor(mask, clean_image.channels);
  const double lambda = config.weights.lambda_attn;
  SplitMix64 crop_rng(derive_seed(config.seed, kCropSalt));

  struct Eval {
    TraceRow row;
    std::vector<double> grad;
  };
  auto evaluate = [&](const std::vector<double>& delta, bool with_grad) {
    ad::Graph g;
    const AdvNodes nodes = adversarial_nodes(g, clean_image, mask_t, delta);
    const auto crops = draw_crops(crop_rng, clean_image.height, clean_image.width, config.weights.n_crops, config.crops);
    ad::Var l_loc = local_alignment_loss(ens, nodes.gray, target_image, crops);
    const AttentionMassVars masses = attention_masses(ens, nodes.gray, seed_tokens, mask);
    ad::Var l_attn = attention_loss(masses.a_fg, masses.a_bg);
    ad::Var l_final = lambda == 0.0 ? l_loc : ad::add(l_loc, ad::scalar_mul(l_attn, lambda));
    Eval e;
    e.row.l_loc = l_loc.value().item();
    e.row.l_attn = l_attn.value().item();
    e.row.l_final = l_final.value().item();
    e.row.a_fg = masses.a_fg.value().item();
    e.row.a_bg = masses.a_bg.value().item();
    if (with_grad) {
      g.backward(l_final);
      e.grad = g.grad(nodes.delta).data;
    }
    return e;
  };

  AttackResult result;
  result.adversarial_text = seed_tokens;
  result.trace.reserve(config.iterations);

  std::vector<double> delta(clean_image.pixels.size(), 0.0);
  std::vector<double> best_delta = delta;
  double best = std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < config.iterations; ++it) {
    Eval e;
    try {
      e = evaluate(delta, true);
    } catch (const NumericError& err) {
      throw NumericError("iteration " + std::to_string(it) + ": " + err.what());
    }
    if (e.row.l_final < best) {
      best = e.row.l_final;
      best_delta = delta;
      result.best_iteration = it;
    }
    e.row.best_l_final = best;
    result.trace.push_back(e.row);

    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= config.step * sign(e.grad[i]);
    Perturbation p = project_delta(std::move(delta), mask, clean_image.channels, config.epsilon);
    if (observer) observer(it, p, apply_masked_delta(clean_image, mask, p.delta));
    delta = std::move(p.delta);
  }
  {
    Eval e = evaluate(delta, false);
    if (e.row.l_final < best) {
      best = e.row.l_final;
      best_delta = delta;
      result.best_iteration = config.iterations;
    }
    e.row.best_l_final = best;
    result.last_iterate = e.row;
  }

  result.best_l_final = best;
  result.delta = project_delta(std::move(best_delta), mask, clean_image.channels, config.epsilon);
  result.adversarial = apply_masked_delta(clean_image, mask, result.delta.delta);

  result.audit.max_abs_delta = result.delta.max_abs();
  result.audit.off_support_nonzero = result.delta.off_support_nonzero();
  result.audit.pixels_in_range =
      std::all_of(result.adversarial.pixels.begin(), result.adversarial.pixels.end(),
                  [](double v) { return v >= 0.0 && v <= 1.0; });

  result.attention_before = attention_masses(ens, clean_image, seed_tokens, mask);
  result.attention_after = attention_masses(ens, result.adversarial, seed_tokens, mask);

  SplitMix64 eval_rng(derive_seed(config.seed, kEvalSalt));
  const auto eval_crops = draw_crops(eval_rng, clean_image.height, clean_image.width, config.weights.n_crops, config.crops);
  {
    ad::Graph g;
    result.eval_l_loc_clean =
        local_alignment_loss(ens, gray_constant(g, clean_image), target_image, eval_crops).value().item();
    result.eval_l_loc =
        local_alignment_loss(ens, gray_constant(g, result.adversarial), target_image, eval_crops).value().item();
  }
  return result;
}

}  // namespace focusleak
