#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace edag {

// CRC-32 (IEEE 802.3 polynomial), used for checkpoint payload checksums
// and input-file digests in run manifests.
uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

uint32_t crc32_str(const std::string& s);

// CRC-32 of a whole file; throws IoError if unreadable.
uint32_t crc32_file(const std::string& path);

std::string crc32_hex(uint32_t v);

}  // namespace edag
