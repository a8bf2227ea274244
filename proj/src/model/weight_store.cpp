#include "model/weight_store.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace lvt {

namespace {

constexpr char kMagic[4] = {'L', 'V', 'T', 'W'};
constexpr std::uint8_t kDtypeF32 = 0;
constexpr int kMaxRank = 8;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  const char* take(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError("weight file truncated: " + path_);
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint16_t u16() {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(take(2));
    return std::uint16_t(p[0]) | std::uint16_t(p[1]) << 8;
  }

  std::uint32_t u32() {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(take(4));
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    const unsigned char* p = reinterpret_cast<const unsigned char*>(take(8));
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    return v;
  }

  std::uint8_t u8() { return std::uint8_t(*take(1)); }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const void* data, std::size_t bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(bytes)));
}

void append_tensor(std::string& out, const std::string& name, const Tensor& t) {
  if (name.size() > 0xffff) throw FormatError("tensor name too long: " + name);
  if (t.rank() > kMaxRank) throw FormatError("tensor rank too large for format: " + name);
  put_u16(out, static_cast<std::uint16_t>(name.size()));
  out.append(name);
  out.push_back(char(t.rank()));
  for (std::size_t a = 0; a < t.rank(); ++a) put_u64(out, std::uint64_t(t.extent(a)));
  out.push_back(char(kDtypeF32));
  const std::size_t bytes = std::size_t(t.numel()) * sizeof(float);
  out.append(reinterpret_cast<const char*>(t.data()), bytes);
  put_u32(out, crc_of(t.data(), bytes));
}

std::pair<std::string, Tensor> read_tensor(Reader& r, const std::string& path) {
  const std::uint16_t name_len = r.u16();
  std::string name(r.take(name_len), name_len);
  const std::uint8_t rank = r.u8();
  if (rank > kMaxRank) {
    throw FormatError("weight file " + path + ": tensor '" + name + "' has rank " +
                      std::to_string(int(rank)));
  }
  std::vector<index_t> shape(rank);
  for (int a = 0; a < rank; ++a) {
    const std::uint64_t e = r.u64();
    if (e == 0 || e > (1ull << 32)) {
      throw FormatError("weight file " + path + ": tensor '" + name + "' has bad extent");
    }
    shape[a] = static_cast<index_t>(e);
  }
  const std::uint8_t dtype = r.u8();
  if (dtype != kDtypeF32) {
    throw FormatError("weight file " + path + ": tensor '" + name + "' has unsupported dtype " +
                      std::to_string(int(dtype)));
  }
  index_t numel = 1;
  for (index_t e : shape) numel *= e;
  const std::size_t bytes = std::size_t(numel) * sizeof(float);
  const char* data = r.take(bytes);
  const std::uint32_t stored_crc = r.u32();
  if (crc_of(data, bytes) != stored_crc) {
    throw ChecksumError("weight file " + path + ": CRC mismatch for tensor '" + name + "'");
  }
  std::vector<float> values(numel);
  std::memcpy(values.data(), data, bytes);
  return {std::move(name), Tensor(std::move(shape), std::move(values))};
}

}  // namespace

void WeightStore::put(const std::string& name, Tensor t) {
  if (name.empty()) throw FormatError("weight store: empty tensor name");
  if (index_.count(name)) throw FormatError("weight store: duplicate tensor name '" + name + "'");
  order_.push_back(name);
  index_.emplace(name, std::move(t));
}

const Tensor& WeightStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw FormatError("weight store: no tensor named '" + name + "'");
  return it->second;
}

index_t WeightStore::total_params() const {
  index_t total = 0;
  for (const auto& [name, t] : index_) total += t.numel();
  return total;
}

void WeightStore::save(const std::string& path) const {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(order_.size()));
  for (const std::string& name : order_) append_tensor(out, name, index_.at(name));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

WeightStore WeightStore::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open weight file: " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r(bytes, path);
  const char* magic = r.take(4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError("weight file " + path + ": bad magic bytes");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw FormatError("weight file " + path + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t count = r.u32();
  WeightStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, tensor] = read_tensor(r, path);
    store.put(name, std::move(tensor));
  }
  if (!r.done()) throw FormatError("weight file " + path + ": trailing bytes");
  return store;
}

void save_tensor_file(const Tensor& t, const std::string& name, const std::string& path) {
  WeightStore store;
  store.put(name, t);
  store.save(path);
}

}  // namespace lvt
