#include "vsegan/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace vsegan::ckpt {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

class Writer {
 public:
  template <typename U>
  void put(U v) {
    char b[sizeof(U)];
    std::memcpy(b, &v, sizeof(U));
    out_.append(b, sizeof(U));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void put_bytes(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& s, std::size_t begin, std::size_t end) : s_(s), pos_(begin), end_(end) {}
  template <typename U>
  U get(const char* what) {
    need(sizeof(U), what);
    U v;
    std::memcpy(&v, s_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string get_string(const char* what) {
    const auto n = get<std::uint32_t>(what);
    need(n, what);
    std::string r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  void get_bytes(std::vector<unsigned char>& out, std::size_t n, const char* what) {
    need(n, what);
    out.assign(s_.begin() + long(pos_), s_.begin() + long(pos_ + n));
    pos_ += n;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n, const char* what) {
    if (end_ - pos_ < n) throw IntegrityError(std::string("checkpoint truncated while reading ") + what);
  }
  const std::string& s_;
  std::size_t pos_, end_;
};

std::uint32_t crc32_of(const std::string& s, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(n)));
}

constexpr std::size_t kHeader = 4 + 4 + 8;

std::string dims_string(const std::vector<std::uint32_t>& d) {
  std::string s = "[";
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "," : "") + std::to_string(d[i]);
  return s + "]";
}

}  // namespace

std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::kF32: return 4;
    case DType::kF64: return 8;
    case DType::kU64: return 8;
  }
  throw IntegrityError("unknown checkpoint dtype code " + std::to_string(int(t)));
}

const char* dtype_name(DType t) {
  switch (t) {
    case DType::kF32: return "f32";
    case DType::kF64: return "f64";
    case DType::kU64: return "u64";
  }
  return "?";
}

std::size_t Record::elements() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

const Record* Container::find(const std::string& name) const {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

std::string encode(const Container& c) {
  Writer payload;
  payload.put_string(c.config_json);
  payload.put<std::uint32_t>(static_cast<std::uint32_t>(c.records.size()));
  for (const auto& r : c.records) {
    require(r.bytes.size() == r.elements() * dtype_size(r.dtype), "record " + r.name + ": byte count does not match dims");
    require(r.dims.size() < 256, "record " + r.name + ": rank too large");
    payload.put_string(r.name);
    payload.put<std::uint8_t>(static_cast<std::uint8_t>(r.dtype));
    payload.put<std::uint8_t>(static_cast<std::uint8_t>(r.dims.size()));
    for (auto d : r.dims) payload.put<std::uint32_t>(d);
    payload.put_bytes(r.bytes.data(), r.bytes.size());
  }
  payload.put_string(c.rng_state);

  Writer w;
  w.put_bytes(kMagic, 4);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint64_t>(payload.str().size());
  w.str() += payload.str();
  w.put<std::uint32_t>(crc32_of(w.str(), w.str().size()));
  return std::move(w.str());
}

Container decode(const std::string& bytes) {
  if (bytes.size() < kHeader + 4) throw IntegrityError("checkpoint truncated: " + std::to_string(bytes.size()) + " bytes");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw IntegrityError("not a checkpoint: bad magic");
  Reader head(bytes, 4, kHeader);
  const auto version = head.get<std::uint32_t>("version");
  if (version != kVersion)
    throw IntegrityError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                         std::to_string(kVersion) + ")");
  const auto payload_len = head.get<std::uint64_t>("payload length");
  if (payload_len != bytes.size() - kHeader - 4)
    throw IntegrityError("checkpoint length mismatch: header says " + std::to_string(payload_len) + " payload bytes, file has " +
                         std::to_string(bytes.size() - kHeader - 4));
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (stored != crc32_of(bytes, bytes.size() - 4)) throw IntegrityError("checkpoint checksum mismatch (CRC-32)");

  Reader r(bytes, kHeader, bytes.size() - 4);
  Container c;
  c.config_json = r.get_string("config");
  const auto count = r.get<std::uint32_t>("record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    Record rec;
    rec.name = r.get_string("record name");
    rec.dtype = static_cast<DType>(r.get<std::uint8_t>("dtype"));
    dtype_size(rec.dtype);
    const auto rank = r.get<std::uint8_t>("rank");
    for (unsigned k = 0; k < rank; ++k) rec.dims.push_back(r.get<std::uint32_t>("dims"));
    r.get_bytes(rec.bytes, rec.elements() * dtype_size(rec.dtype), "record values");
    c.records.push_back(std::move(rec));
  }
  c.rng_state = r.get_string("rng state");
  if (!r.done()) throw IntegrityError("checkpoint has trailing bytes after the rng state");
  return c;
}

void save(const std::filesystem::path& path, const Container& c) {
  const std::string bytes = encode(c);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write to a sibling and rename so a crash never leaves a torn checkpoint.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    require(bool(f), "cannot write checkpoint " + tmp.string());
    f.write(bytes.data(), std::streamsize(bytes.size()));
    require(bool(f), "failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Container load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require(bool(f), "cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  try {
    return decode(ss.str());
  } catch (const IntegrityError& e) {
    throw IntegrityError(path.string() + ": " + e.what());
  }
}

template <typename T>
Record tensor_record(const std::string& name, const Tensor<T>& t) {
  Record r;
  r.name = name;
  r.dtype = std::is_same_v<T, float> ? DType::kF32 : DType::kF64;
  for (auto d : t.shape()) r.dims.push_back(static_cast<std::uint32_t>(d));
  const auto* p = reinterpret_cast<const unsigned char*>(t.data().data());
  r.bytes.assign(p, p + t.size() * sizeof(T));
  return r;
}

Record u64_record(const std::string& name, const std::vector<std::uint64_t>& values) {
  Record r;
  r.name = name;
  r.dtype = DType::kU64;
  r.dims = {static_cast<std::uint32_t>(values.size())};
  const auto* p = reinterpret_cast<const unsigned char*>(values.data());
  r.bytes.assign(p, p + values.size() * 8);
  return r;
}

template <typename T>
void read_tensor(const Container& c, const std::string& name, Tensor<T>& out) {
  const Record* r = c.find(name);
  if (!r) throw IntegrityError("checkpoint is missing parameter " + name);
  std::vector<std::uint32_t> want;
  for (auto d : out.shape()) want.push_back(static_cast<std::uint32_t>(d));
  if (r->dims != want)
    throw IntegrityError("checkpoint shape mismatch for parameter " + name + ": file has " + dims_string(r->dims) +
                         ", model expects " + dims_string(want));
  auto dst = out.data();
  if (r->dtype == DType::kF32) {
    std::vector<float> v(r->elements());
    std::memcpy(v.data(), r->bytes.data(), r->bytes.size());
    std::copy(v.begin(), v.end(), dst.begin());
  } else if (r->dtype == DType::kF64) {
    std::vector<double> v(r->elements());
    std::memcpy(v.data(), r->bytes.data(), r->bytes.size());
    std::transform(v.begin(), v.end(), dst.begin(), [](double x) { return static_cast<T>(x); });
  } else {
    throw IntegrityError("checkpoint record " + name + " has dtype " + dtype_name(r->dtype) + ", expected a float type");
  }
}

std::vector<std::uint64_t> read_u64(const Container& c, const std::string& name) {
  const Record* r = c.find(name);
  if (!r) throw IntegrityError("checkpoint is missing record " + name);
  if (r->dtype != DType::kU64) throw IntegrityError("checkpoint record " + name + " is not u64");
  std::vector<std::uint64_t> v(r->elements());
  std::memcpy(v.data(), r->bytes.data(), r->bytes.size());
  return v;
}

template <typename T>
void append_store(Container& c, const ParamStore<T>& store) {
  for (const auto& p : store.params()) c.records.push_back(tensor_record(p.name, p.var.value()));
  for (const auto& s : store.stats()) {
    c.records.push_back(tensor_record(s.name + ".running_mean", s.stats.running_mean));
    c.records.push_back(tensor_record(s.name + ".running_var", s.stats.running_var));
  }
}

template <typename T>
void restore_store(const Container& c, ParamStore<T>& store) {
  for (auto& p : store.params()) read_tensor(c, p.name, p.var.mutable_value());
  for (auto& s : store.stats()) {
    read_tensor(c, s.name + ".running_mean", s.stats.running_mean);
    read_tensor(c, s.name + ".running_var", s.stats.running_var);
  }
}

template Record tensor_record(const std::string&, const Tensor<float>&);
template Record tensor_record(const std::string&, const Tensor<double>&);
template void read_tensor(const Container&, const std::string&, Tensor<float>&);
template void read_tensor(const Container&, const std::string&, Tensor<double>&);
template void append_store(Container&, const ParamStore<float>&);
template void append_store(Container&, const ParamStore<double>&);
template void restore_store(const Container&, ParamStore<float>&);
template void restore_store(const Container&, ParamStore<double>&);

}  // namespace vsegan::ckpt
