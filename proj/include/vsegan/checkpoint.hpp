#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vsegan/params.hpp"

namespace vsegan::ckpt {

inline constexpr char kMagic[4] = {'V', 'S', 'G', 'N'};
inline constexpr std::uint32_t kVersion = 1;

enum class DType : std::uint8_t { kF32 = 1, kF64 = 2, kU64 = 3 };

std::size_t dtype_size(DType t);
const char* dtype_name(DType t);

struct Record {
  std::string name;
  DType dtype = DType::kF32;
  std::vector<std::uint32_t> dims;
  std::vector<unsigned char> bytes;  // little-endian raw values

  std::size_t elements() const;
};

// Layout: magic, u32 version, u64 payload length, payload, u32 CRC-32 of
// everything before it. Payload: u32-prefixed config JSON, u32 record count,
// records (u32-prefixed name, u8 dtype, u8 rank, u32 dims, raw values), then
// the u32-prefixed rng state string.
struct Container {
  std::string config_json;
  std::vector<Record> records;
  std::string rng_state;

  const Record* find(const std::string& name) const;
};

std::string encode(const Container& c);
// Throws IntegrityError on bad magic/version, truncation, trailing bytes or
// CRC mismatch.
Container decode(const std::string& bytes);

void save(const std::filesystem::path& path, const Container& c);
Container load(const std::filesystem::path& path);

template <typename T>
Record tensor_record(const std::string& name, const Tensor<T>& t);
Record u64_record(const std::string& name, const std::vector<std::uint64_t>& values);

// Copies a record into a tensor of identical shape (any float dtype).
// Missing records and shape mismatches throw IntegrityError naming `name`.
template <typename T>
void read_tensor(const Container& c, const std::string& name, Tensor<T>& out);
std::vector<std::uint64_t> read_u64(const Container& c, const std::string& name);

// Parameters and running statistics under `prefix` + their store names.
template <typename T>
void append_store(Container& c, const ParamStore<T>& store);
template <typename T>
void restore_store(const Container& c, ParamStore<T>& store);

}  // namespace vsegan::ckpt
