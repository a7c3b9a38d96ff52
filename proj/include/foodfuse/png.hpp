#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace foodfuse::png {

enum class ColorType { kGray, kGrayAlpha, kRgb, kRgba, kPalette };

/// Decoded image exactly as stored: no palette expansion, samples of
/// `bit_depth` bits widened to bytes (16-bit samples are big-endian pairs).
struct RawImage {
  int width = 0;
  int height = 0;
  int bit_depth = 8;
  ColorType color = ColorType::kGray;
  std::vector<std::uint8_t> samples;

  int channels() const;
};

RawImage decode(std::span<const std::uint8_t> bytes);
RawImage read(const std::string& path);

/// Decodes to 8-bit RGB regardless of the stored layout.
RawImage decode_rgb8(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_gray8(int width, int height,
                                       std::span<const std::uint8_t> pixels);
std::vector<std::uint8_t> encode_gray16(int width, int height,
                                        std::span<const std::uint16_t> pixels);
std::vector<std::uint8_t> encode_rgb8(int width, int height,
                                      std::span<const std::uint8_t> rgb);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace foodfuse::png
