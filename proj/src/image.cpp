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

#include "focusleak/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "focusleak/error.hpp"

namespace focusleak {

Image::Image(std::size_t h, std::size_t w, std::size_t c, double fill)
    : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

Image::Image(std::size_t h, std::size_t w, std::size_t c, std::vector<double> values)
    : height(h), width(w), channels(c), pixels(std::move(values)) {
  if (pixels.size() != h * w * c) {
    throw ContractError("image " + std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c) +
                        " given " + std::to_string(pixels.size()) + " values");
  }
}

void Image::validate() const {
  if (channels != 1 && channels != 3) {
    throw ContractError("image must have 1 or 3 channels, got " + std::to_string(channels));
  }
  if (pixels.size() != height * width * channels) throw ContractError("image pixel count mismatch");
  for (double v : pixels) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("image pixel outside [0,1]: " + std::to_string(v));
  }
}

std::size_t BinaryMask::popcount() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::complement() const {
  BinaryMask out = *this;
  for (auto& b : out.bits) b = b ? 0 : 1;
  return out;
}

std::vector<double> luminance(const Image& image) {
  if (image.channels == 1) return image.pixels;
  std::vector<double> out(image.plane_size());
  const auto r = image.plane(0), g = image.plane(1), b = image.plane(2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return out;
}

std::vector<double> channel_mean(const Image& image) {
  if (image.channels == 1) return image.pixels;
  std::vector<double> out(image.plane_size(), 0.0);
  for (std::size_t c = 0; c < image.channels; ++c) {
    const auto p = image.plane(c);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p[i];
  }
  const double inv = 1.0 / static_cast<double>(image.channels);
  for (double& v : out) v *= inv;
  return out;
}

// ---------------------------------------------------------------------------
// Netpbm

namespace {

class PnmReader {
 public:
  PnmReader(std::span<const std::uint8_t> bytes, std::size_t start) : bytes_(bytes), pos_(start) {}

  std::size_t pos() const { return pos_; }
  // Offset of the first digit of the last number read.
  std::size_t last_start() const { return last_start_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  unsigned long number(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    last_start_ = start;
    unsigned long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000UL) throw ParseError(std::string("pnm: ") + what + " too large", start);
      ++pos_;
    }
    if (pos_ == start) {
      throw ParseError(std::string("pnm: expected ") + what, pos_);
    }
    return v;
  }

  std::uint8_t byte() {
    if (pos_ >= bytes_.size()) throw ParseError("pnm: truncated payload", pos_);
    return bytes_[pos_++];
  }

  void single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw ParseError("pnm: expected whitespace after maxval", pos_);
    }
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::size_t last_start_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

Image decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P') throw ParseError("pnm: missing magic number", 0);
  const char kind = static_cast<char>(bytes[1]);
  if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
    throw ParseError(std::string("pnm: unsupported format P") + kind, 1);
  }
  const bool ascii = kind == '2' || kind == '3';
  const std::size_t channels = (kind == '3' || kind == '6') ? 3 : 1;

  PnmReader rd(bytes, 2);
  const auto width = rd.number("width");
  const std::size_t width_at = rd.last_start();
  const auto height = rd.number("height");
  const std::size_t height_at = rd.last_start();
  const auto maxval = rd.number("maxval");
  if (maxval != 255) throw ParseError("pnm: maxval must be 255, got " + std::to_string(maxval), rd.last_start());
  if (width == 0) throw ParseError("pnm: zero image width", width_at);
  if (height == 0) throw ParseError("pnm: zero image height", height_at);

  Image img(height, width, channels);
  if (!ascii) rd.single_whitespace();
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < channels; ++c) {
        unsigned long v;
        if (ascii) {
          const std::size_t at = rd.pos();
          try {
            v = rd.number("sample");
          } catch (const ParseError&) {
            throw ParseError("pnm: truncated payload", at);
          }
          if (v > 255) throw ParseError("pnm: sample exceeds maxval", at);
        } else {
          v = rd.byte();
        }
        img.at(c, y, x) = static_cast<double>(v) / 255.0;
      }
    }
  }
  return img;
}

Image load_pnm(const std::filesystem::path& path) { return decode_pnm(read_file(path)); }

std::vector<std::uint8_t> encode_pnm(const Image& image) {
  image.validate();
  const std::string header = std::string(image.channels == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + image.pixels.size());
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x)
      for (std::size_t c = 0; c < image.channels; ++c) out.push_back(to_byte(image.at(c, y, x)));
  return out;
}

void save_pnm(const Image& image, const std::filesystem::path& path) { write_file(path, encode_pnm(image)); }

BinaryMask load_mask_pnm(const std::filesystem::path& path) {
  const Image img = load_pnm(path);
  const auto lum = luminance(img);
  BinaryMask mask(img.height, img.width);
  for (std::size_t i = 0; i < lum.size(); ++i) mask.bits[i] = std::lround(lum[i] * 255.0) > 127 ? 1 : 0;
  return mask;
}

void save_mask_pnm(const BinaryMask& mask, const std::filesystem::path& path) {
  Image img(mask.height, mask.width, 1);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) img.pixels[i] = mask.bits[i] ? 1.0 : 0.0;
  save_pnm(img, path);
}

// ---------------------------------------------------------------------------

Image apply_masked_delta(const Image& base, const BinaryMask& mask, std::span<const double> delta) {
  if (mask.height != base.height || mask.width != base.width) {
    throw ContractError("apply_masked_delta: mask " + std::to_string(mask.height) + "x" +
                        std::to_string(mask.width) + " vs image " + std::to_string(base.height) + "x" +
                        std::to_string(base.width));
  }
  if (delta.size() != base.pixels.size()) {
    throw ContractError("apply_masked_delta: delta has " + std::to_string(delta.size()) + " values, image " +
                        std::to_string(base.pixels.size()));
  }
  Image out = base;
  const std::size_t plane = base.plane_size();
  for (std::size_t c = 0; c < base.channels; ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      if (mask.bits[i] == 0) continue;
      const std::size_t k = c * plane + i;
      out.pixels[k] = std::clamp(base.pixels[k] + delta[k], 0.0, 1.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

void CropSpec::validate(std::size_t height, std::size_t width) const {
  if (side < 2 || out_side < 2 || top + side > height || left + side > width) {
    throw ContractError("crop (top " + std::to_string(top) + ", left " + std::to_string(left) + ", side " +
                        std::to_string(side) + ") invalid for " + std::to_string(height) + "x" +
                        std::to_string(width));
  }
}

ResampleWindow CropSpec::window(std::size_t height, std::size_t width) const {
  validate(height, width);
  return {height, width, top, left, side, side, out_side, out_side};
}

CropSpec sample_crop(SplitMix64& rng, std::size_t image_h, std::size_t image_w, std::size_t out_side,
                     double scale_lo, double scale_hi) {
  if (image_h < 2 || image_w < 2) throw ContractError("sample_crop: image smaller than 2x2");
  if (!(scale_lo > 0.0 && scale_lo <= scale_hi && scale_hi <= 1.0)) {
    throw ContractError("sample_crop: need 0 < scale_lo <= scale_hi <= 1");
  }
  if (out_side < 2) throw ContractError("sample_crop: out_side must be >= 2");
  const std::size_t short_side = std::min(image_h, image_w);
  const double u = rng.uniform(scale_lo, scale_hi);
  auto side = static_cast<std::size_t>(std::lround(u * static_cast<double>(short_side)));
  side = std::clamp<std::size_t>(side, 2, short_side);
  CropSpec crop;
  crop.side = side;
  crop.out_side = out_side;
  crop.top = static_cast<std::size_t>(rng.below(image_h - side + 1));
  crop.left = static_cast<std::size_t>(rng.below(image_w - side + 1));
  return crop;
}

Image crop_resize(const Image& image, const CropSpec& crop) {
  const ResampleWindow w = crop.window(image.height, image.width);
  Image out(crop.out_side, crop.out_side, image.channels);
  for (std::size_t c = 0; c < image.channels; ++c) {
    const auto plane = resample_plane(image.plane(c), w);
    std::copy(plane.begin(), plane.end(), out.pixels.begin() + c * out.plane_size());
  }
  return out;
}

Image resize(const Image& image, std::size_t out_h, std::size_t out_w) {
  const auto w = ResampleWindow::full(image.height, image.width, out_h, out_w);
  Image out(out_h, out_w, image.channels);
  for (std::size_t c = 0; c < image.channels; ++c) {
    const auto plane = resample_plane(image.plane(c), w);
    std::copy(plane.begin(), plane.end(), out.pixels.begin() + c * out.plane_size());
  }
  return out;
}

}  // namespace focusleak
