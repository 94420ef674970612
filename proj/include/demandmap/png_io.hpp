#ifndef DEMANDMAP_PNG_IO_HPP_
#define DEMANDMAP_PNG_IO_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace demandmap {

// Interleaved 8-bit image, row-major, top row first. channels is 1 (gray)
// or 3 (RGB); decode reports whatever the file carries after 8-bit/paletted
// expansion so shape checks can reject unexpected payloads.
struct ImageBuf {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<uint8_t> pixels;

  size_t byte_count() const { return pixels.size(); }
  uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
};

ImageBuf decode_png(const std::vector<uint8_t>& bytes);
std::vector<uint8_t> encode_png(const ImageBuf& img);
ImageBuf read_png(const std::string& path);
void write_png(const std::string& path, const ImageBuf& img);

}  // namespace demandmap

#endif  // DEMANDMAP_PNG_IO_HPP_
