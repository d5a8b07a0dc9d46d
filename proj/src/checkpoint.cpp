#include "lrdet/checkpoint.hpp"

#include <cstring>
#include <iterator>

#include "byteio.hpp"

namespace lrdet {
namespace {

using detail::put_u32;
using detail::Reader;

constexpr char kMagic[8] = {'L', 'R', 'C', 'K', 'P', 'T', '1', '\0'};

}  // namespace

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw ConfigError("checkpoint has no tensor named '" + name + "'");
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    detail::put_tensor(out, t);
  }
  put_u32(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  out.insert(out.end(), ckpt.metadata.begin(), ckpt.metadata.end());
  return out;
}

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw IoError("not an LRCKPT1 checkpoint: magic mismatch at byte offset 0");
  Reader r(bytes, "checkpoint");
  r.bytes(sizeof kMagic);
  Checkpoint ckpt;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.bytes(r.u32());
    Tensor t = r.tensor("tensor '" + name + "'");
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  ckpt.metadata = r.bytes(r.u32());
  if (!r.done()) throw IoError("checkpoint has trailing bytes at offset " + std::to_string(r.pos()));
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  detail::write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace lrdet
