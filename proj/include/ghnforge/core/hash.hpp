#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

namespace ghnforge {

// FNV-1a, 64-bit. Used for artifact checksums and dedupe keys; nothing here
// needs cryptographic strength.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

std::string hex64(uint64_t v);

// Hash of a file's raw bytes; throws IoError if unreadable.
uint64_t hash_file(const std::string& path);

}  // namespace ghnforge
