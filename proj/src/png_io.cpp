#include "demandmap/png_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>

#include "demandmap/common.hpp"

namespace demandmap {

namespace {

struct MemReader {
  const std::vector<uint8_t>* bytes;
  size_t pos;
};

void mem_read(png_structp png, png_bytep out, png_size_t n) {
  auto* r = static_cast<MemReader*>(png_get_io_ptr(png));
  if (r->pos + n > r->bytes->size()) {
    png_error(png, "read past end of PNG buffer");
  }
  std::memcpy(out, r->bytes->data() + r->pos, n);
  r->pos += n;
}

void mem_write(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + n);
}

void mem_flush(png_structp) {}

}  // namespace

ImageBuf decode_png(const std::vector<uint8_t>& bytes) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw IntegrityError("payload is not a PNG");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  MemReader reader{&bytes, 0};
  ImageBuf img;
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IntegrityError("corrupt PNG payload");
  }
  png_set_read_fn(png, &reader, mem_read);
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color_type = png_get_color_type(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_read_update_info(png, info);

  int channels = png_get_channels(png, info);
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.channels = channels;
  img.pixels.resize(static_cast<size_t>(w) * h * channels);
  row_ptrs.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) {
    row_ptrs[y] = img.pixels.data() + static_cast<size_t>(y) * w * channels;
  }
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

std::vector<uint8_t> encode_png(const ImageBuf& img) {
  if (img.channels != 1 && img.channels != 3) {
    throw ArgumentError(strf("PNG encode supports 1 or 3 channels, got %d", img.channels));
  }
  if (img.pixels.size() != static_cast<size_t>(img.width) * img.height * img.channels) {
    throw ArgumentError("image buffer size does not match its dimensions");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  std::vector<uint8_t> out;
  std::vector<png_bytep> row_ptrs(img.height);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG encode failed");
  }
  png_set_write_fn(png, &out, mem_write, mem_flush);
  int color = img.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
  png_set_IHDR(png, info, img.width, img.height, 8, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    row_ptrs[y] = const_cast<png_bytep>(img.pixels.data() +
                                        static_cast<size_t>(y) * img.width * img.channels);
  }
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

ImageBuf read_png(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

void write_png(const std::string& path, const ImageBuf& img) {
  auto bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write: " + path);
}

}  // namespace demandmap
