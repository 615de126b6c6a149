#pragma once

#include <cstdint>
#include <string>

namespace gcwave {

/// Locale-independent shortest round-trip double formatting ("%.17g").
/// All serialized numbers go through this so payloads are byte-stable.
std::string fmt_double(double v);

/// FNV-1a 64-bit hash, hex-encoded; used for config fingerprints.
std::string fnv1a_hex(const std::string& data);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace gcwave
