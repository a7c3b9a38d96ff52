#include "foodfuse/png.hpp"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "foodfuse/error.hpp"

namespace foodfuse::png {
namespace {

struct DecodeContext {
  std::span<const std::uint8_t> input;
  std::size_t offset = 0;
  RawImage image;
  std::vector<png_bytep> rows;
  std::string message;
};

struct EncodeContext {
  std::vector<std::uint8_t> output;
  std::vector<png_bytep> rows;
  std::string message;
};

void on_error(png_structp png, png_const_charp msg) {
  if (auto* msg_out = static_cast<std::string*>(png_get_error_ptr(png))) *msg_out = msg;
  png_longjmp(png, 1);
}

void on_warning(png_structp, png_const_charp) {}

void read_bytes(png_structp png, png_bytep out, png_size_t length) {
  auto* ctx = static_cast<DecodeContext*>(png_get_io_ptr(png));
  if (ctx->offset + length > ctx->input.size()) png_error(png, "truncated PNG stream");
  std::memcpy(out, ctx->input.data() + ctx->offset, length);
  ctx->offset += length;
}

void write_bytes(png_structp png, png_bytep data, png_size_t length) {
  auto* ctx = static_cast<EncodeContext*>(png_get_io_ptr(png));
  ctx->output.insert(ctx->output.end(), data, data + length);
}

void flush_noop(png_structp) {}

ColorType color_of(int png_color) {
  switch (png_color) {
    case PNG_COLOR_TYPE_GRAY: return ColorType::kGray;
    case PNG_COLOR_TYPE_GRAY_ALPHA: return ColorType::kGrayAlpha;
    case PNG_COLOR_TYPE_RGB: return ColorType::kRgb;
    case PNG_COLOR_TYPE_RGB_ALPHA: return ColorType::kRgba;
    default: return ColorType::kPalette;
  }
}

// Reads with optional conversion to 8-bit RGB. Locals touched after setjmp
// live inside the heap context so longjmp cannot leave them indeterminate.
RawImage decode_impl(std::span<const std::uint8_t> bytes, bool to_rgb8) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw Error(ErrorCode::kFormatError, "not a PNG stream");
  }
  auto ctx = std::make_unique<DecodeContext>();
  ctx->input = bytes;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &ctx->message, on_error, on_warning);
  if (!png) throw Error(ErrorCode::kIoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error(ErrorCode::kIoError, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::kFormatError, "PNG decode failed: " + ctx->message);
  }
  png_set_read_fn(png, ctx.get(), read_bytes);
  png_read_info(png, info);

  const int png_color = png_get_color_type(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  if (to_rgb8) {
    if (bit_depth == 16) png_set_strip_16(png);
    if (png_color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (png_color == PNG_COLOR_TYPE_GRAY || png_color == PNG_COLOR_TYPE_GRAY_ALPHA) {
      if (bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
      png_set_gray_to_rgb(png);
    }
    png_set_strip_alpha(png);
  } else if (bit_depth < 8) {
    // Widen packed samples to one byte each; gray values keep their raw
    // level (no scaling), palette indices stay indices.
    png_set_packing(png);
  }
  png_read_update_info(png, info);

  auto& img = ctx->image;
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.bit_depth = to_rgb8 ? 8 : (bit_depth < 8 ? 8 : bit_depth);
  img.color = to_rgb8 ? ColorType::kRgb : color_of(png_color);
  const std::size_t stride = png_get_rowbytes(png, info);
  img.samples.resize(stride * img.height);
  ctx->rows.resize(img.height);
  for (int y = 0; y < img.height; ++y) ctx->rows[y] = img.samples.data() + stride * y;
  png_read_image(png, ctx->rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return std::move(ctx->image);
}

std::vector<std::uint8_t> encode_impl(int width, int height, int bit_depth, int png_color,
                                      const std::uint8_t* data, std::size_t stride) {
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "cannot encode an empty image");
  }
  auto ctx = std::make_unique<EncodeContext>();
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &ctx->message, on_error, on_warning);
  if (!png) throw Error(ErrorCode::kIoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::kIoError, "png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoError, "PNG encode failed: " + ctx->message);
  }
  png_set_write_fn(png, ctx.get(), write_bytes, flush_noop);
  // Fixed settings and no timestamp chunk: identical input gives identical bytes.
  png_set_compression_level(png, 6);
  png_set_filter(png, 0, PNG_FILTER_NONE);
  png_set_IHDR(png, info, width, height, bit_depth, png_color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  ctx->rows.resize(height);
  for (int y = 0; y < height; ++y) {
    ctx->rows[y] = const_cast<png_bytep>(data + stride * y);
  }
  png_write_info(png, info);
  png_write_image(png, ctx->rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(ctx->output);
}

}  // namespace

int RawImage::channels() const {
  switch (color) {
    case ColorType::kGray:
    case ColorType::kPalette: return 1;
    case ColorType::kGrayAlpha: return 2;
    case ColorType::kRgb: return 3;
    case ColorType::kRgba: return 4;
  }
  return 1;
}

RawImage decode(std::span<const std::uint8_t> bytes) { return decode_impl(bytes, false); }

RawImage decode_rgb8(std::span<const std::uint8_t> bytes) { return decode_impl(bytes, true); }

RawImage read(const std::string& path) { return decode(read_file(path)); }

std::vector<std::uint8_t> encode_gray8(int width, int height, std::span<const std::uint8_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::kDimMismatch, "gray8 buffer size mismatch");
  }
  return encode_impl(width, height, 8, PNG_COLOR_TYPE_GRAY, pixels.data(), width);
}

std::vector<std::uint8_t> encode_gray16(int width, int height, std::span<const std::uint16_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::kDimMismatch, "gray16 buffer size mismatch");
  }
  std::vector<std::uint8_t> be(pixels.size() * 2);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    be[2 * i] = static_cast<std::uint8_t>(pixels[i] >> 8);
    be[2 * i + 1] = static_cast<std::uint8_t>(pixels[i] & 0xff);
  }
  return encode_impl(width, height, 16, PNG_COLOR_TYPE_GRAY, be.data(), 2 * static_cast<std::size_t>(width));
}

std::vector<std::uint8_t> encode_rgb8(int width, int height, std::span<const std::uint8_t> rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw Error(ErrorCode::kDimMismatch, "rgb8 buffer size mismatch");
  }
  return encode_impl(width, height, 8, PNG_COLOR_TYPE_RGB, rgb.data(), 3 * static_cast<std::size_t>(width));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::kIoError, "short write to " + path);
}

}  // namespace foodfuse::png
