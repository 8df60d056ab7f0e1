#include <csetjmp>
#include <cstring>

#include <png.h>

#include "common/binary_io.hpp"
#include "tacsim/error.hpp"
#include "tacsim/render.hpp"

namespace tacsim::render {
namespace {

struct ReadCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& image) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    fail(ErrorKind::Validation, "image pixel buffer does not match its size");
  }
  std::string message;
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::Io, "libpng initialisation failed");
  }
  std::vector<std::uint8_t> out;
  std::vector<png_bytep> rows(image.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::Io, "PNG encode failed: " + message);
  }
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t n) {
        auto* buf = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(p));
        buf->insert(buf->end(), data, data + n);
      },
      nullptr);
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  for (std::uint32_t y = 0; y < image.height; ++y) {
    rows[y] = const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3);
  }
  png_set_rows(png, info, rows.data());
  png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Image decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    fail(ErrorKind::Io, "not a PNG file");
  }
  std::string message;
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_fn, png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Io, "libpng initialisation failed");
  }
  ReadCursor cursor{bytes, 0};
  Image image;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::Io, "PNG decode failed: " + message);
  }
  png_set_read_fn(png, &cursor, [](png_structp p, png_bytep data, png_size_t n) {
    auto* c = static_cast<ReadCursor*>(png_get_io_ptr(p));
    if (c->pos + n > c->bytes.size()) png_error(p, "unexpected end of data");
    std::memcpy(data, c->bytes.data() + c->pos, n);
    c->pos += n;
  });
  // Normalize every input to 8-bit RGB.
  png_read_png(png, info,
               PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_PACKING | PNG_TRANSFORM_EXPAND |
                   PNG_TRANSFORM_STRIP_ALPHA | PNG_TRANSFORM_GRAY_TO_RGB,
               nullptr);
  const auto w = png_get_image_width(png, info);
  const auto h = png_get_image_height(png, info);
  const auto channels = png_get_channels(png, info);
  png_bytepp rows = png_get_rows(png, info);
  image = Image(w, h);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) image.at(x, y, c) = rows[y][x * channels + c];
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void save_png(const std::filesystem::path& path, const Image& image) {
  detail::write_file(path, encode_png(image));
}

Image load_png(const std::filesystem::path& path) { return decode_png(detail::read_file(path)); }

}  // namespace tacsim::render
