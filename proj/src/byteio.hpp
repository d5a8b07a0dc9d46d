#pragma once

// Little-endian byte helpers shared by the binary container formats.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lrdet/errors.hpp"
#include "lrdet/tensor.hpp"

namespace lrdet::detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

// rank, dims[rank], data
inline void put_tensor(std::vector<unsigned char>& out, const Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(v));
}

class Reader {
 public:
  Reader(const std::vector<unsigned char>& buf, std::string format) : buf_(buf), format_(std::move(format)) {}

  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{buf_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string bytes(std::size_t n) {
    need(n, "string");
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Tensor tensor(const std::string& what);

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }
  bool done() const { return pos_ == buf_.size(); }
  const std::string& format() const { return format_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n)
      throw IoError(format_ + " truncated reading " + what + " at byte offset " + std::to_string(pos_));
  }
  const std::vector<unsigned char>& buf_;
  std::string format_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

}  // namespace lrdet::detail
