#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vsegan/dsp.hpp"

namespace vsegan::io {

// 16-bit PCM, mono, 16 kHz only. Anything else throws ContractViolation with
// the offending field in the message; truncated or malformed files throw
// IntegrityError.
dsp::Waveform read_wav(const std::filesystem::path& path);

// Samples are clipped to [-1, 1] and rounded to int16.
void write_wav(const std::filesystem::path& path, const dsp::Waveform& w);

// Value the sample takes after a write/read cycle.
inline double quantize_pcm16(double v) {
  const double c = v > 1.0 ? 1.0 : (v < -1.0 ? -1.0 : v);
  return static_cast<double>(static_cast<std::int16_t>(std::lround(c * 32767.0))) / 32767.0;
}

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }
  bool operator==(const GrayImage&) const = default;
};

// Binary PGM (P5), maxval 255.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& img);

// Frame files are named 00000.pgm, 00001.pgm, ...
void write_frames(const std::filesystem::path& dir, const std::vector<GrayImage>& frames);
// Reads every *.pgm in lexicographic order. Throws ContractViolation when the
// directory is missing or empty.
std::vector<GrayImage> read_frames(const std::filesystem::path& dir);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace vsegan::io
