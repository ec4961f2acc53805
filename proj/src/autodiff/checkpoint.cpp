#include "sprkit/autodiff/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sprkit/core/error.hpp"

namespace sprkit::ad {

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes a little-endian host");

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t pos() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw CorruptDataError(std::string("truncated checkpoint: ") + what, pos_);
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8, "tensor values");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  std::string str(std::size_t n) {
    need(n, "parameter name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& records) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  for (const auto& rec : records) {
    put_u32(out, static_cast<std::uint32_t>(rec.name.size()));
    out.insert(out.end(), rec.name.begin(), rec.name.end());
    const auto& shape = rec.tensor.shape();
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (auto e : shape) put_u32(out, static_cast<std::uint32_t>(e));
    for (double v : rec.tensor.data()) put_f64(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    std::size_t offset = 0;
    while (offset < std::min(bytes.size(), sizeof(kCheckpointMagic)) && bytes[offset] == kCheckpointMagic[offset]) {
      ++offset;
    }
    throw CorruptDataError("bad checkpoint magic, expected SPRKIT01", offset);
  }
  Reader r(bytes);
  r.skip(sizeof(kCheckpointMagic));
  std::vector<NamedTensor> records;
  while (!r.at_end()) {
    const auto name_len = r.u32("name length");
    std::string name = r.str(name_len);
    const auto rank = r.u32("rank");
    if (rank == 0 || rank > 8) throw CorruptDataError("implausible tensor rank " + std::to_string(rank), r.pos() - 4);
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const auto e = r.u32("extent");
      if (e == 0) throw CorruptDataError("zero extent", r.pos() - 4);
      shape.push_back(e);
    }
    const std::size_t n = shape_numel(shape);
    r.need(n * 8, "tensor values");
    std::vector<double> values(n);
    for (auto& v : values) v = r.f64();
    records.push_back({std::move(name), Tensor::from(std::move(shape), std::move(values))});
  }
  return records;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& records) {
  const auto bytes = encode_checkpoint(records);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

NamedTensor meta_record(const std::string& key, const std::string& value) {
  return {"meta:" + key + "=" + value, Tensor::scalar(0.0)};
}

}  // namespace sprkit::ad
