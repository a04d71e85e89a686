#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace voxcond {

/* FNV-1a 64-bit, used for content fingerprints in manifests and sidecars. */
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x00000100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(const std::vector<uint8_t>& bytes) {
  return fnv1a64(bytes.data(), bytes.size());
}

inline uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

inline std::string hash_hex(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace voxcond
