#include "lrdet/advfile.hpp"

#include <cstring>
#include <iterator>

#include "byteio.hpp"

namespace lrdet {
namespace {

constexpr char kMagic[7] = {'L', 'R', 'A', 'D', 'V', '1', '\0'};

}  // namespace

std::vector<unsigned char> encode_adv(const std::vector<AdvRecord>& records) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  detail::put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    LRDET_REQUIRE(r.x.shape() == r.x_adv.shape(), "clean and adversarial sample shapes differ");
    detail::put_u32(out, r.label);
    detail::put_u32(out, r.pred);
    detail::put_tensor(out, r.x);
    detail::put_tensor(out, r.x_adv);
  }
  return out;
}

std::vector<AdvRecord> decode_adv(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw IoError("not an LRADV1 file: magic mismatch at byte offset 0");
  detail::Reader r(bytes, "adversarial file");
  r.bytes(sizeof kMagic);
  const std::uint32_t count = r.u32();
  std::vector<AdvRecord> records;
  for (std::uint32_t i = 0; i < count; ++i) {
    AdvRecord rec;
    rec.label = r.u32();
    rec.pred = r.u32();
    rec.x = r.tensor("sample " + std::to_string(i));
    rec.x_adv = r.tensor("adversarial sample " + std::to_string(i));
    if (rec.x.shape() != rec.x_adv.shape())
      throw IoError("adversarial file sample " + std::to_string(i) + " has mismatched shapes");
    records.push_back(std::move(rec));
  }
  if (!r.done()) throw IoError("adversarial file has trailing bytes at offset " + std::to_string(r.pos()));
  return records;
}

void save_adv(const std::filesystem::path& path, const std::vector<AdvRecord>& records) {
  detail::write_file(path, encode_adv(records));
}

std::vector<AdvRecord> load_adv(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  try {
    return decode_adv(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace lrdet
