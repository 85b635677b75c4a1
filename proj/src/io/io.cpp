#include "vsegan/io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vsegan/error.hpp"

namespace vsegan::io {

namespace fs = std::filesystem;

namespace {

std::vector<char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ContractViolation("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ContractViolation("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ContractViolation("write failed for " + path.string());
}

std::uint32_t le32(const char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
  return v;
}

std::uint16_t le16(const char* p) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(p[0]) | (static_cast<unsigned char>(p[1]) << 8));
}

void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

dsp::Waveform read_wav(const fs::path& path) {
  const auto b = read_bytes(path);
  const std::string name = path.string();
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw IntegrityError(name + ": not a RIFF/WAVE file");
  std::size_t pos = 12;
  bool have_fmt = false;
  while (pos + 8 <= b.size()) {
    const std::string id(b.data() + pos, 4);
    const std::size_t len = le32(b.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > b.size() && id != "data") throw IntegrityError(name + ": chunk '" + id + "' truncated");
    if (id == "fmt ") {
      if (len < 16) throw IntegrityError(name + ": fmt chunk too short");
      const auto format = le16(b.data() + body);
      const auto channels = le16(b.data() + body + 2);
      const auto rate = le32(b.data() + body + 4);
      const auto bits = le16(b.data() + body + 14);
      if (format != 1) throw ContractViolation(name + ": only PCM WAV is supported (format tag " + std::to_string(format) + ")");
      if (channels != 1) throw ContractViolation(name + ": expected mono, got " + std::to_string(channels) + " channels");
      if (rate != dsp::kSampleRate)
        throw ContractViolation(name + ": expected 16000 Hz, got " + std::to_string(rate) + " Hz; resample first");
      if (bits != 16) throw ContractViolation(name + ": expected 16-bit samples, got " + std::to_string(bits));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw IntegrityError(name + ": data chunk before fmt chunk");
      if (body + len > b.size()) throw IntegrityError(name + ": data chunk truncated");
      dsp::Waveform w;
      w.samples.resize(len / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = static_cast<std::int16_t>(le16(b.data() + body + 2 * i)) / 32767.0;
      return w;
    }
    pos = body + len + (len & 1);
  }
  throw IntegrityError(name + ": no data chunk");
}

void write_wav(const fs::path& path, const dsp::Waveform& w) {
  require(w.sample_rate_hz == dsp::kSampleRate, "write_wav: waveform is not 16 kHz");
  const std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string s;
  s.reserve(44 + data_len);
  s += "RIFF";
  put32(s, 36 + data_len);
  s += "WAVEfmt ";
  put32(s, 16);
  put16(s, 1);
  put16(s, 1);
  put32(s, dsp::kSampleRate);
  put32(s, dsp::kSampleRate * 2);
  put16(s, 2);
  put16(s, 16);
  s += "data";
  put32(s, data_len);
  for (double v : w.samples) {
    const double c = std::clamp(v, -1.0, 1.0);
    put16(s, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(c * 32767.0))));
  }
  write_bytes(path, s);
}

GrayImage read_pgm(const fs::path& path) {
  const auto b = read_bytes(path);
  const std::string name = path.string();
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < b.size()) {
      if (b[pos] == '#') {
        while (pos < b.size() && b[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(b[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::string t;
    while (pos < b.size() && !std::isspace(static_cast<unsigned char>(b[pos]))) t.push_back(b[pos++]);
    return t;
  };
  if (token() != "P5") throw ContractViolation(name + ": not a binary PGM (P5)");
  GrayImage img;
  try {
    img.width = std::stoul(token());
    img.height = std::stoul(token());
    const auto maxval = std::stoul(token());
    if (maxval != 255) throw ContractViolation(name + ": only 8-bit PGM supported (maxval " + std::to_string(maxval) + ")");
  } catch (const std::logic_error&) {
    throw IntegrityError(name + ": malformed PGM header");
  }
  ++pos;  // single whitespace before raster
  const std::size_t n = img.width * img.height;
  if (pos + n > b.size()) throw IntegrityError(name + ": PGM raster truncated");
  img.pixels.assign(b.begin() + static_cast<std::ptrdiff_t>(pos), b.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

void write_pgm(const fs::path& path, const GrayImage& img) {
  require(img.pixels.size() == img.width * img.height, "write_pgm: pixel count does not match dimensions");
  std::string s = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  s.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  write_bytes(path, s);
}

void write_frames(const fs::path& dir, const std::vector<GrayImage>& frames) {
  fs::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(name, sizeof name, "%05zu.pgm", i);
    write_pgm(dir / name, frames[i]);
  }
}

std::vector<GrayImage> read_frames(const fs::path& dir) {
  require(fs::is_directory(dir), "frames directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  require(!files.empty(), "no .pgm frames in " + dir.string());
  std::sort(files.begin(), files.end());
  std::vector<GrayImage> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(read_pgm(f));
  return out;
}

std::string read_text(const fs::path& path) {
  const auto b = read_bytes(path);
  return std::string(b.begin(), b.end());
}

void write_text(const fs::path& path, const std::string& text) { write_bytes(path, text); }

}  // namespace vsegan::io
