#include "byteio.hpp"

#include <fstream>
#include <iterator>

namespace lrdet::detail {

Tensor Reader::tensor(const std::string& what) {
  const std::uint32_t rank = u32();
  if (rank == 0 || rank > 8) throw IoError(format_ + " " + what + " has invalid rank " + std::to_string(rank));
  Shape shape(rank);
  std::size_t numel = 1;
  for (auto& d : shape) {
    d = u32();
    if (d == 0) throw IoError(format_ + " " + what + " has a zero extent");
    numel *= d;
  }
  if (numel > remaining() / 4)
    throw IoError(format_ + " truncated in " + what + " at byte offset " + std::to_string(pos_));
  std::vector<float> data(numel);
  for (auto& v : data) v = f32();
  return Tensor(std::move(shape), std::move(data));
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace lrdet::detail
