#include "core/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "core/bytes.hpp"
#include "core/error.hpp"

namespace voxcond {

namespace {

void append_header(std::vector<uint8_t>& out, const char* magic, int w, int h,
                   int maxval) {
  std::string head = std::string(magic) + "\n" + std::to_string(w) + " " +
                     std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
  out.insert(out.end(), head.begin(), head.end());
}

struct PnmHeader {
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  size_t data_pos = 0;
};

PnmHeader parse_header(const std::vector<uint8_t>& bytes) {
  size_t pos = 0;
  auto peek = [&]() -> int { return pos < bytes.size() ? bytes[pos] : -1; };
  auto skip_space = [&]() {
    while (pos < bytes.size()) {
      if (std::isspace(peek())) {
        ++pos;
      } else if (peek() == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&]() -> int {
    skip_space();
    require(pos < bytes.size() && std::isdigit(peek()), ErrorCode::ParseError,
            "malformed pnm header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(peek())) {
      v = v * 10 + (bytes[pos++] - '0');
      require(v <= 1 << 30, ErrorCode::ParseError, "pnm header value overflow");
    }
    return int(v);
  };

  PnmHeader h;
  require(bytes.size() >= 2 && bytes[0] == 'P', ErrorCode::BadMagic,
          "not a pnm file");
  h.magic = {char(bytes[0]), char(bytes[1])};
  require(h.magic == "P5" || h.magic == "P6", ErrorCode::BadMagic,
          "unsupported pnm magic");
  pos = 2;
  h.width = read_int();
  h.height = read_int();
  h.maxval = read_int();
  require(pos < bytes.size() && std::isspace(peek()), ErrorCode::ParseError,
          "malformed pnm header");
  ++pos;  // single whitespace byte before raster
  h.data_pos = pos;
  require(h.width > 0 && h.height > 0 && h.maxval > 0 && h.maxval < 65536,
          ErrorCode::ParseError, "bad pnm dimensions");
  return h;
}

void need_raster(const PnmHeader& h, const std::vector<uint8_t>& bytes,
                 size_t bytes_per_px) {
  size_t need = size_t(h.width) * h.height * bytes_per_px;
  require(bytes.size() - h.data_pos == need, ErrorCode::TruncatedPayload,
          "pnm raster size mismatch");
}

uint16_t q16(float v) { return uint16_t(std::lround(double(v) * 65535.0)); }

}  // namespace

std::vector<uint8_t> encode_ppm8(const ImageRgb8& img) {
  std::vector<uint8_t> out;
  append_header(out, "P6", img.width, img.height, 255);
  for (const auto& p : img.px) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<uint8_t> encode_ppm16(const ImageVec3f& img) {
  std::vector<uint8_t> out;
  append_header(out, "P6", img.width, img.height, 65535);
  for (const auto& p : img.px) {
    for (float c : p) {
      require(c >= 0.0f && c <= 1.0f, ErrorCode::InvalidArgument,
              "16-bit ppm expects values in [0,1]");
      uint16_t q = q16(c);
      out.push_back(uint8_t(q >> 8));
      out.push_back(uint8_t(q & 0xff));
    }
  }
  return out;
}

std::vector<uint8_t> encode_pgm8(const ImageLabel& img) {
  std::vector<uint8_t> out;
  append_header(out, "P5", img.width, img.height, 255);
  out.insert(out.end(), img.px.begin(), img.px.end());
  return out;
}

/* Depth raster. Misses are exactly 1.0 and must stay distinguishable after
 * quantization, so hit values are capped at 65534 and only a true miss
 * writes 65535; the cap stays inside the 1/65535 quantization tolerance. */
std::vector<uint8_t> encode_pgm16(const ImageF& img) {
  std::vector<uint8_t> out;
  append_header(out, "P5", img.width, img.height, 65535);
  for (float v : img.px) {
    require(v >= 0.0f && v <= 1.0f, ErrorCode::InvalidArgument,
            "depth values must be in [0,1]");
    uint16_t q = v >= 1.0f ? 65535 : std::min<uint16_t>(q16(v), 65534);
    out.push_back(uint8_t(q >> 8));
    out.push_back(uint8_t(q & 0xff));
  }
  return out;
}

ImageRgb8 decode_ppm8(const std::vector<uint8_t>& bytes) {
  PnmHeader h = parse_header(bytes);
  require(h.magic == "P6" && h.maxval == 255, ErrorCode::ParseError,
          "expected 8-bit ppm");
  need_raster(h, bytes, 3);
  ImageRgb8 img(h.width, h.height);
  size_t pos = h.data_pos;
  for (auto& p : img.px) {
    p = {bytes[pos], bytes[pos + 1], bytes[pos + 2]};
    pos += 3;
  }
  return img;
}

ImageVec3f decode_ppm16(const std::vector<uint8_t>& bytes) {
  PnmHeader h = parse_header(bytes);
  require(h.magic == "P6" && h.maxval == 65535, ErrorCode::ParseError,
          "expected 16-bit ppm");
  need_raster(h, bytes, 6);
  ImageVec3f img(h.width, h.height);
  size_t pos = h.data_pos;
  for (auto& p : img.px) {
    for (int c = 0; c < 3; ++c) {
      uint16_t q = uint16_t(bytes[pos] << 8 | bytes[pos + 1]);
      p[c] = float(q / 65535.0);
      pos += 2;
    }
  }
  return img;
}

ImageLabel decode_pgm8(const std::vector<uint8_t>& bytes) {
  PnmHeader h = parse_header(bytes);
  require(h.magic == "P5" && h.maxval == 255, ErrorCode::ParseError,
          "expected 8-bit pgm");
  need_raster(h, bytes, 1);
  ImageLabel img(h.width, h.height);
  std::copy(bytes.begin() + h.data_pos, bytes.end(), img.px.begin());
  return img;
}

ImageF decode_pgm16(const std::vector<uint8_t>& bytes) {
  PnmHeader h = parse_header(bytes);
  require(h.magic == "P5" && h.maxval == 65535, ErrorCode::ParseError,
          "expected 16-bit pgm");
  need_raster(h, bytes, 2);
  ImageF img(h.width, h.height);
  size_t pos = h.data_pos;
  for (auto& v : img.px) {
    uint16_t q = uint16_t(bytes[pos] << 8 | bytes[pos + 1]);
    v = float(q / 65535.0);
    pos += 2;
  }
  return img;
}

void write_ppm8(const std::string& path, const ImageRgb8& img) {
  write_file_bytes(path, encode_ppm8(img));
}
void write_ppm16(const std::string& path, const ImageVec3f& img) {
  write_file_bytes(path, encode_ppm16(img));
}
void write_pgm8(const std::string& path, const ImageLabel& img) {
  write_file_bytes(path, encode_pgm8(img));
}
void write_pgm16(const std::string& path, const ImageF& img) {
  write_file_bytes(path, encode_pgm16(img));
}

}  // namespace voxcond
