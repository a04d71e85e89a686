#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace voxcond {

template <class T>
struct Image {
  int width = 0, height = 0;
  std::vector<T> px;

  Image() = default;
  Image(int w, int h, T fill = T{}) : width(w), height(h), px(size_t(w) * h, fill) {}

  T& at(int x, int y) { return px[size_t(y) * width + x]; }
  const T& at(int x, int y) const { return px[size_t(y) * width + x]; }

  bool operator==(const Image& o) const {
    return width == o.width && height == o.height && px == o.px;
  }
};

using Rgb8 = std::array<uint8_t, 3>;
using ImageRgb8 = Image<Rgb8>;       // semantic / MPI plane renders
using ImageF = Image<float>;         // depth in [0,1]
using ImageVec3f = Image<std::array<float, 3>>;  // normalized coordinates
using ImageLabel = Image<uint8_t>;   // label ids / binary mask

/* Binary netpbm encoders. 16-bit samples are big-endian per the format. */
std::vector<uint8_t> encode_ppm8(const ImageRgb8& img);
std::vector<uint8_t> encode_ppm16(const ImageVec3f& img);   // [0,1] -> 0..65535
std::vector<uint8_t> encode_pgm8(const ImageLabel& img);    // values as-is
std::vector<uint8_t> encode_pgm16(const ImageF& img);       // see notes in .cpp

ImageRgb8 decode_ppm8(const std::vector<uint8_t>& bytes);
ImageVec3f decode_ppm16(const std::vector<uint8_t>& bytes);
ImageLabel decode_pgm8(const std::vector<uint8_t>& bytes);
ImageF decode_pgm16(const std::vector<uint8_t>& bytes);

void write_ppm8(const std::string& path, const ImageRgb8& img);
void write_ppm16(const std::string& path, const ImageVec3f& img);
void write_pgm8(const std::string& path, const ImageLabel& img);
void write_pgm16(const std::string& path, const ImageF& img);

}  // namespace voxcond
