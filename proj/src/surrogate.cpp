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

#include "focusleak/surrogate.hpp"

#include <cmath>
#include <cstring>
#include <string>

#include "focusleak/error.hpp"
#include "focusleak/rng.hpp"

namespace focusleak {

namespace {

ad::Tensor random_matrix(SplitMix64& rng, std::size_t rows, std::size_t cols, double scale) {
  ad::Tensor t({rows, cols});
  for (double& v : t.data) v = rng.normal() * scale;
  return t;
}

ad::Tensor random_vector(SplitMix64& rng, std::size_t n, double scale) {
  ad::Tensor t({n});
  for (double& v : t.data) v = rng.normal() * scale;
  return t;
}

void fnv_mix(std::uint64_t& h, const ad::Tensor& t) {
  for (double v : t.data) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001B3ULL;
    }
  }
}

void check_plane(ad::Var gray) {
  if (gray.shape().size() != 2) {
    throw ContractError("surrogate input must be a 2-D plane, got " + ad::shape_str(gray.shape()));
  }
}

}  // namespace

std::uint64_t SurrogateEnsemble::checksum() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const auto& m : members) {
    fnv_mix(h, m.w1);
    fnv_mix(h, m.b1);
    fnv_mix(h, m.w2);
    fnv_mix(h, m.b2);
  }
  fnv_mix(h, fusion.token_table);
  fnv_mix(h, fusion.wq);
  fnv_mix(h, fusion.wk);
  fnv_mix(h, fusion.wv);
  fnv_mix(h, fusion.lm_w);
  fnv_mix(h, fusion.lm_b);
  return h;
}

SurrogateEnsemble build_ensemble(std::span<const std::uint64_t> seeds, const EnsembleDims& dims) {
  if (seeds.empty()) throw ContractError("build_ensemble: at least one seed required");
  if (dims.patch_side == 0 || dims.input_side % dims.patch_side != 0) {
    throw ContractError("build_ensemble: input_side must be a multiple of patch_side");
  }
  if (dims.embed_dim == 0 || dims.vocab_size == 0) throw ContractError("build_ensemble: zero dimension");
  if (dims.fusion_member >= seeds.size()) throw ContractError("build_ensemble: fusion_member out of range");

  SurrogateEnsemble ens;
  ens.dims = dims;
  const std::size_t d = dims.embed_dim;
  const std::size_t pp = dims.patch_pixels();
  for (std::uint64_t seed : seeds) {
    SplitMix64 rng(seed);
    EmbedderParams m;
    m.seed = seed;
    m.w1 = random_matrix(rng, pp, d, 1.0 / std::sqrt(static_cast<double>(pp)));
    m.b1 = random_vector(rng, d, 0.1);
    m.w2 = random_matrix(rng, d, d, 1.0 / std::sqrt(static_cast<double>(d)));
    m.b2 = random_vector(rng, d, 0.1);
    ens.members.push_back(std::move(m));
  }

  std::uint64_t text_seed = 0x7E47;
  for (std::uint64_t s : seeds) text_seed = derive_seed(text_seed, s);
  SplitMix64 rng(text_seed);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  ens.fusion.token_table = random_matrix(rng, dims.vocab_size, d, 1.0);
  ens.fusion.wq = random_matrix(rng, d, d, inv_sqrt_d);
  ens.fusion.wk = random_matrix(rng, d, d, inv_sqrt_d);
  ens.fusion.wv = random_matrix(rng, d, d, inv_sqrt_d);
  ens.fusion.lm_w = random_matrix(rng, d, dims.vocab_size, inv_sqrt_d);
  ens.fusion.lm_b = random_vector(rng, dims.vocab_size, 0.1);

  const auto& table = ens.fusion.token_table.data;
  for (std::size_t a = 0; a < dims.vocab_size; ++a) {
    for (std::size_t b = a + 1; b < dims.vocab_size; ++b) {
      if (std::memcmp(&table[a * d], &table[b * d], d * sizeof(double)) == 0) {
        throw ContractError("build_ensemble: token table rows " + std::to_string(a) + " and " +
                            std::to_string(b) + " coincide");
      }
    }
  }

  const std::size_t g = dims.grid(), s = dims.input_side, ps = dims.patch_side;
  ens.patch_index.reserve(s * s);
  for (std::size_t pi = 0; pi < g; ++pi)
    for (std::size_t pj = 0; pj < g; ++pj)
      for (std::size_t y = 0; y < ps; ++y)
        for (std::size_t x = 0; x < ps; ++x) ens.patch_index.push_back((pi * ps + y) * s + pj * ps + x);
  return ens;
}

// ---------------------------------------------------------------------------

ad::Var gray_plane(ad::Var image, std::size_t channels, std::size_t height, std::size_t width) {
  if (image.shape() != ad::Shape{channels, height * width}) {
    throw ContractError("gray_plane: expected image node " + ad::shape_str({channels, height * width}) +
                        ", got " + ad::shape_str(image.shape()));
  }
  ad::Var flat = channels == 1 ? image : ad::mean_rows(image);
  return ad::reshape(flat, {height, width});
}

ad::Var gray_constant(ad::Graph& g, const Image& image) {
  return g.constant(ad::Tensor({image.height, image.width}, channel_mean(image)));
}

FeatureVars member_forward(const SurrogateEnsemble& ens, const EmbedderParams& member, ad::Var gray) {
  check_plane(gray);
  ad::Graph& g = *gray.graph;
  const auto& dims = ens.dims;
  const std::size_t s = dims.input_side;
  ad::Var plane = gray;
  if (gray.shape() != ad::Shape{s, s}) {
    plane = ad::bilinear_resample(gray, ResampleWindow::full(gray.shape()[0], gray.shape()[1], s, s));
  }
  ad::Var patches = ad::gather(plane, ens.patch_index, {dims.num_patches(), dims.patch_pixels()});
  ad::Var h1 = ad::tanh(ad::add_row_broadcast(ad::matmul(patches, g.constant(member.w1)), g.constant(member.b1)));
  ad::Var pooled_in = ad::mean_rows(h1);
  ad::Var h2 = ad::tanh(ad::add_row_broadcast(ad::matmul(pooled_in, g.constant(member.w2)), g.constant(member.b2)));
  return {h1, h2, ad::l2_normalize_lastdim(h2)};
}

ad::Tensor embed_tokens(const SurrogateEnsemble& ens, const TokenSeq& tokens) {
  tokens.validate(ens.dims.vocab_size);
  const std::size_t d = ens.dims.embed_dim;
  ad::Tensor out({tokens.size(), d});
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const double* row = &ens.fusion.token_table.data[tokens.ids[t] * d];
    for (std::size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double angle = static_cast<double>(t) * freq;
      out.data[t * d + i] = row[i] + (i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return out;
}

FusionVars fuse_forward(const SurrogateEnsemble& ens, ad::Var gray, const TokenSeq& tokens) {
  ad::Graph& g = *gray.graph;
  const std::size_t d = ens.dims.embed_dim;
  ad::Var tok = g.constant(embed_tokens(ens, tokens));
  const FeatureVars feats = member_forward(ens, ens.fusion_embedder(), gray);
  ad::Var q = ad::matmul(tok, g.constant(ens.fusion.wq));
  ad::Var k = ad::matmul(feats.patches, g.constant(ens.fusion.wk));
  ad::Var v = ad::matmul(feats.patches, g.constant(ens.fusion.wv));
  ad::Var scores = ad::scalar_mul(ad::matmul(q, ad::transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
  ad::Var attn = ad::softmax_lastdim(scores);
  ad::Var fused = ad::add(ad::matmul(attn, v), tok);
  const std::size_t grid = ens.dims.grid();
  ad::Var map = ad::reshape(ad::mean_rows(attn), {grid, grid});
  return {fused, attn, map};
}

ad::Var lm_loss_forward(const SurrogateEnsemble& ens, ad::Var fused, ad::Var lm_w, ad::Var lm_b,
                        const TokenSeq& target) {
  const std::size_t vocab = ens.dims.vocab_size;
  target.validate(vocab);
  const std::size_t fused_len = fused.shape().at(0);
  if (target.size() > fused_len) {
    throw ContractError("lm_loss: target length " + std::to_string(target.size()) + " exceeds fused length " +
                        std::to_string(fused_len));
  }
  std::vector<std::size_t> rows(target.size());
  for (std::size_t t = 0; t < rows.size(); ++t) rows[t] = t;
  ad::Var logits = ad::add_row_broadcast(ad::matmul(ad::gather_rows(fused, rows), lm_w), lm_b);
  ad::Var probs = ad::softmax_lastdim(logits);
  std::vector<std::size_t> picks(target.size());
  for (std::size_t t = 0; t < picks.size(); ++t) picks[t] = t * vocab + target.ids[t];
  ad::Var p = ad::gather(probs, picks, {target.size()});
  return ad::scalar_mul(ad::mean_all(ad::log(p)), -1.0);
}

// ---------------------------------------------------------------------------

std::vector<double> embed_image(const SurrogateEnsemble& ens, const EmbedderParams& member, const Image& image) {
  ad::Graph g;
  const FeatureVars f = member_forward(ens, member, gray_constant(g, image));
  return f.embedding.value().data;
}

BlockFeatures block_features(const SurrogateEnsemble& ens, const EmbedderParams& member, const Image& image) {
  ad::Graph g;
  const FeatureVars f = member_forward(ens, member, gray_constant(g, image));
  return {f.patches.value(), f.pooled.value()};
}

FusionOutput fuse(const SurrogateEnsemble& ens, const Image& image, const TokenSeq& tokens) {
  ad::Graph g;
  const FusionVars f = fuse_forward(ens, gray_constant(g, image), tokens);
  return {f.fused.value(), f.attention.value(), f.spatial_map.value()};
}

double lm_loss(const SurrogateEnsemble& ens, const FusionOutput& fusion, const TokenSeq& target) {
  ad::Graph g;
  ad::Var fused = g.constant(fusion.fused);
  return lm_loss_forward(ens, fused, g.constant(ens.fusion.lm_w), g.constant(ens.fusion.lm_b), target)
      .value()
      .item();
}

}  // namespace focusleak
