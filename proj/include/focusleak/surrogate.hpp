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

// Deterministic stand-ins for a CLIP-style surrogate ensemble: each member is
// a two-layer patch embedder (per-patch linear+tanh, mean pool, linear+tanh,
// L2 normalize). A shared text embedder and one cross-attention fusion block
// with an LM head provide the multimodal side.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "focusleak/autodiff.hpp"
#include "focusleak/image.hpp"
#include "focusleak/vocabulary.hpp"

namespace focusleak {

struct EnsembleDims {
  std::size_t input_side = 32;
  std::size_t patch_side = 8;
  std::size_t embed_dim = 16;
  std::size_t vocab_size = 64;
  // Member whose layer-1 features feed the fusion block.
  std::size_t fusion_member = 0;

  std::size_t grid() const { return input_side / patch_side; }
  std::size_t num_patches() const { return grid() * grid(); }
  std::size_t patch_pixels() const { return patch_side * patch_side; }
};

struct EmbedderParams {
  std::uint64_t seed = 0;
  ad::Tensor w1;  // patch_pixels x embed_dim
  ad::Tensor b1;  // embed_dim
  ad::Tensor w2;  // embed_dim x embed_dim
  ad::Tensor b2;  // embed_dim
};

struct FusionParams {
  ad::Tensor token_table;  // vocab_size x embed_dim
  ad::Tensor wq, wk, wv;   // embed_dim x embed_dim
  ad::Tensor lm_w;         // embed_dim x vocab_size
  ad::Tensor lm_b;         // vocab_size
};

struct SurrogateEnsemble {
  EnsembleDims dims;
  std::vector<EmbedderParams> members;
  FusionParams fusion;
  // Gather indices that cut an input_side^2 plane into patch rows.
  std::vector<std::size_t> patch_index;

  const EmbedderParams& fusion_embedder() const { return members.at(dims.fusion_member); }
  // FNV-1a over every parameter byte.
  std::uint64_t checksum() const;
};

inline constexpr std::uint64_t kDefaultSeeds[] = {1, 2, 3, 4};

// Weights ~ N(0,1)/sqrt(fan_in), biases ~ 0.1 N(0,1), drawn from SplitMix64.
// Member i uses seeds[i]; the text/fusion side uses a stream derived from all
// seeds. Throws ContractError on empty seeds or inconsistent dims.
SurrogateEnsemble build_ensemble(std::span<const std::uint64_t> seeds, const EnsembleDims& dims = {});

// --- Graph-level building blocks ---------------------------------------------

// One gray plane [H,W] from an image node [C, H*W] by channel averaging.
ad::Var gray_plane(ad::Var image, std::size_t channels, std::size_t height, std::size_t width);
ad::Var gray_constant(ad::Graph& g, const Image& image);

struct FeatureVars {
  ad::Var patches;    // [num_patches, embed_dim] layer-1 activations
  ad::Var pooled;     // [1, embed_dim] layer-2 activation
  ad::Var embedding;  // [1, embed_dim] unit-norm
};

// Resizes the plane to input_side when needed, then runs the member.
FeatureVars member_forward(const SurrogateEnsemble& ens, const EmbedderParams& member, ad::Var gray);

struct FusionVars {
  ad::Var fused;        // [T, embed_dim]
  ad::Var attention;    // [T, num_patches], rows on the simplex
  ad::Var spatial_map;  // [grid, grid], mean of attention rows
};

FusionVars fuse_forward(const SurrogateEnsemble& ens, ad::Var gray, const TokenSeq& tokens);

// Mean cross-entropy of the LM head at positions 0..|target|-1.
ad::Var lm_loss_forward(const SurrogateEnsemble& ens, ad::Var fused, ad::Var lm_w, ad::Var lm_b,
                        const TokenSeq& target);

// --- Value-level API ----------------------------------------------------------

std::vector<double> embed_image(const SurrogateEnsemble& ens, const EmbedderParams& member, const Image& image);

struct BlockFeatures {
  ad::Tensor layer1;  // [num_patches, embed_dim]
  ad::Tensor layer2;  // [1, embed_dim]
};

BlockFeatures block_features(const SurrogateEnsemble& ens, const EmbedderParams& member, const Image& image);

// Lookup row plus sinusoidal position code, [T, embed_dim].
ad::Tensor embed_tokens(const SurrogateEnsemble& ens, const TokenSeq& tokens);

struct FusionOutput {
  ad::Tensor fused;
  ad::Tensor attention;
  ad::Tensor spatial_map;
};

FusionOutput fuse(const SurrogateEnsemble& ens, const Image& image, const TokenSeq& tokens);

double lm_loss(const SurrogateEnsemble& ens, const FusionOutput& fusion, const TokenSeq& target);

}  // namespace focusleak
