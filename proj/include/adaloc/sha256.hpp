#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace adaloc {

using Hash32 = std::array<uint8_t, 32>;

class Sha256 {
  public:
    Sha256();
    void update(const void* data, size_t len);
    Hash32 finish();

  private:
    void process_block(const uint8_t* block);

    std::array<uint32_t, 8> state_;
    std::array<uint8_t, 64> buffer_;
    uint64_t total_len_ = 0;
    size_t buffer_len_ = 0;
};

Hash32 sha256(const void* data, size_t len);
Hash32 sha256(const std::string& s);
Hash32 sha256(const std::vector<uint8_t>& v);

std::string hash_to_hex(const Hash32& h);
Hash32 hash_from_hex(const std::string& hex);

}  // namespace adaloc
