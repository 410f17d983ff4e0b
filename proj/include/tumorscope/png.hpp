#ifndef TUMORSCOPE_PNG_HPP
#define TUMORSCOPE_PNG_HPP

// 8-bit grayscale PNG encode/decode through libpng's simplified API.

#include <tumorscope/error.hpp>
#include <tumorscope/mask.hpp>

#include <png.h>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tumorscope::png {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

inline std::vector<std::uint8_t> encode_gray(const GrayImage& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::IoFailure, "png sizing failed: " + msg);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::IoFailure, "png encode failed: " + msg);
  }
  out.resize(size);
  return out;
}

/// Any PNG is accepted and converted to 8-bit gray.
inline GrayImage decode_gray(std::span<const std::uint8_t> bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::MaskDecode, "not a readable PNG: " + msg);
  }
  image.format = PNG_FORMAT_GRAY;
  GrayImage img;
  img.width = static_cast<int>(image.width);
  img.height = static_cast<int>(image.height);
  img.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::MaskDecode, "png decode failed: " + msg);
  }
  return img;
}

/// 0 outside, 255 inside.
inline std::vector<std::uint8_t> encode_mask(const BinaryMask& mask) {
  GrayImage img{mask.width, mask.height, std::vector<std::uint8_t>(mask.bits.size())};
  for (std::size_t i = 0; i < mask.bits.size(); ++i) img.pixels[i] = mask.bits[i] ? 255 : 0;
  return encode_gray(img);
}

/// Rejects any value other than 0 and 255.
inline BinaryMask decode_mask(std::span<const std::uint8_t> bytes) {
  const GrayImage img = decode_gray(bytes);
  BinaryMask mask(img.width, img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const auto v = img.pixels[i];
    if (v != 0 && v != 255) {
      throw Error(Errc::MaskDecode, "mask pixel " + std::to_string(i) + " has value " + std::to_string(v));
    }
    mask.bits[i] = v == 255 ? 1 : 0;
  }
  return mask;
}

/// Quantizes [0, 1] intensities to 0..255 by rounding.
inline std::uint8_t quantize_unit(double v) {
  const double clamped = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  return static_cast<std::uint8_t>(std::lround(clamped * 255.0));
}

}  // namespace tumorscope::png

#endif  // TUMORSCOPE_PNG_HPP
