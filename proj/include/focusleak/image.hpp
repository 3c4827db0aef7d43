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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "focusleak/resample.hpp"
#include "focusleak/rng.hpp"

namespace focusleak {

// Channel-major image, pixels in [0,1]: index = (c * height + y) * width + x.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0);
  Image(std::size_t h, std::size_t w, std::size_t c, std::vector<double> values);

  std::size_t plane_size() const { return height * width; }
  double& at(std::size_t c, std::size_t y, std::size_t x) { return pixels[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return pixels[(c * height + y) * width + x];
  }
  std::span<const double> plane(std::size_t c) const {
    return {pixels.data() + c * plane_size(), plane_size()};
  }

  // Throws ContractError unless channels is 1 or 3 and every pixel is in [0,1].
  void validate() const;

  bool operator==(const Image&) const = default;
};

// 0/1 grid, row-major.
struct BinaryMask {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), bits(h * w, fill) {}

  std::uint8_t at(std::size_t y, std::size_t x) const { return bits[y * width + x]; }
  std::uint8_t& at(std::size_t y, std::size_t x) { return bits[y * width + x]; }
  std::size_t popcount() const;
  BinaryMask complement() const;

  bool operator==(const BinaryMask&) const = default;
};

// Per-pixel luminance: the pixel itself for gray, 0.299r + 0.587g + 0.114b for color.
std::vector<double> luminance(const Image& image);

// Mean over channels, one plane.
std::vector<double> channel_mean(const Image& image);

// --- Netpbm I/O -----------------------------------------------------------

// Accepts P2/P5 (gray) and P3/P6 (color) with maxval 255.
Image decode_pnm(std::span<const std::uint8_t> bytes);
Image load_pnm(const std::filesystem::path& path);

// Binary P5/P6 with header "P5\n<w> <h>\n255\n"; pixel = round(v * 255).
std::vector<std::uint8_t> encode_pnm(const Image& image);
void save_pnm(const Image& image, const std::filesystem::path& path);

// Foreground mask file: any PGM/PPM, luminance byte > 127 means set.
BinaryMask load_mask_pnm(const std::filesystem::path& path);
void save_mask_pnm(const BinaryMask& mask, const std::filesystem::path& path);

// --- Masked perturbation ----------------------------------------------------

// clamp01(base + mask * delta). delta has the image's layout; the mask
// applies to every channel. Pixels with mask = 0 are copied bit-for-bit.
Image apply_masked_delta(const Image& base, const BinaryMask& mask, std::span<const double> delta);

// --- Crop-and-resize --------------------------------------------------------

struct CropSpec {
  std::size_t top = 0;
  std::size_t left = 0;
  std::size_t side = 0;
  std::size_t out_side = 0;

  void validate(std::size_t height, std::size_t width) const;
  ResampleWindow window(std::size_t height, std::size_t width) const;

  bool operator==(const CropSpec&) const = default;
};

// Parameters of the random crop-and-resize distribution.
struct CropDistribution {
  double scale_lo = 0.5;
  double scale_hi = 1.0;
  std::size_t out_side = 32;
};

// side = round(u * min(h, w)), u ~ U[scale_lo, scale_hi], at least 2; top and
// left uniform over the valid placements.
CropSpec sample_crop(SplitMix64& rng, std::size_t image_h, std::size_t image_w, std::size_t out_side,
                     double scale_lo, double scale_hi);

inline CropSpec sample_crop(SplitMix64& rng, std::size_t image_h, std::size_t image_w,
                            const CropDistribution& dist) {
  return sample_crop(rng, image_h, image_w, dist.out_side, dist.scale_lo, dist.scale_hi);
}

Image crop_resize(const Image& image, const CropSpec& crop);

// Resizes every channel bilinearly to out_h x out_w.
Image resize(const Image& image, std::size_t out_h, std::size_t out_w);

// --- Text overlay -----------------------------------------------------------

struct TextRaster {
  Image image;
  std::vector<std::string> warnings;
};

// White canvas, black glyphs from the built-in 5x7 font; 1px margin, 6px
// advance, 8px line pitch, wrap at the right margin. Characters without a
// glyph render as a solid 5x7 block and add a warning.
TextRaster rasterize_text(const std::string& text, std::size_t canvas_h, std::size_t canvas_w);

// Column bytes (bit 0 = top row) of a glyph, or nullptr if the font lacks it.
const std::uint8_t* glyph_columns(char c);

}  // namespace focusleak
