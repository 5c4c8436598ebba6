#include "tiger/dsp/wav.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "tiger/common/error.hpp"

namespace tiger::dsp {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct Format {
  std::uint16_t code = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw InvalidInput(where + ": not a RIFF/WAVE file");
  }

  Format fmt;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::size_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = std::min(size, bytes.size() - body);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (available < 16) throw InvalidInput(where + ": truncated fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      fmt.code = read_u16(f);
      fmt.channels = read_u16(f + 2);
      fmt.sample_rate = read_u32(f + 4);
      fmt.bits = read_u16(f + 14);
      if (fmt.code == kFormatExtensible) {
        if (available < 26) throw InvalidInput(where + ": truncated extensible fmt chunk");
        fmt.code = read_u16(f + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = available;
    }
    pos = body + size + (size & 1U);
  }
  if (!have_fmt) throw InvalidInput(where + ": missing fmt chunk");
  if (data == nullptr) throw InvalidInput(where + ": missing data chunk");
  if (fmt.channels != 1) {
    throw InvalidInput(where + ": only mono audio is supported, file has " +
                       std::to_string(fmt.channels) + " channels");
  }
  if (fmt.sample_rate == 0) throw InvalidInput(where + ": zero sample rate");

  Waveform wave;
  wave.sample_rate = fmt.sample_rate;
  if (fmt.code == kFormatPcm && (fmt.bits == 16 || fmt.bits == 24 || fmt.bits == 32)) {
    const std::size_t width = fmt.bits / 8;
    const std::size_t count = data_size / width;
    const double scale = std::ldexp(1.0, -(static_cast<int>(fmt.bits) - 1));
    wave.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint8_t* p = data + i * width;
      std::uint32_t raw = 0;
      for (std::size_t b = 0; b < width; ++b) raw |= static_cast<std::uint32_t>(p[b]) << (8 * b);
      const unsigned shift = 32 - static_cast<unsigned>(fmt.bits);
      const auto value = static_cast<std::int32_t>(raw << shift) >> shift;
      wave.samples[i] = static_cast<double>(value) * scale;
    }
  } else if (fmt.code == kFormatFloat && fmt.bits == 32) {
    const std::size_t count = data_size / 4;
    wave.samples.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      wave.samples[i] = static_cast<double>(std::bit_cast<float>(read_u32(data + 4 * i)));
    }
  } else {
    throw InvalidInput(where + ": unsupported encoding (format " + std::to_string(fmt.code) +
                       ", " + std::to_string(fmt.bits) + " bits)");
  }
  return wave;
}

void write_wav(const std::filesystem::path& path, const Waveform& wave, WavEncoding encoding) {
  if (!(wave.sample_rate > 0.0)) throw InvalidArgument("write_wav: sample rate must be positive");
  const bool pcm = encoding == WavEncoding::Pcm16;
  const std::uint16_t bits = pcm ? 16 : 32;
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(wave.sample_rate));
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(wave.samples.size() * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, pcm ? kFormatPcm : kFormatFloat);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * (bits / 8));
  put_u16(out, bits / 8);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : wave.samples) {
    if (pcm) {
      const double clipped = std::clamp(s, -1.0, 1.0);
      const auto v = static_cast<std::int16_t>(std::lround(std::min(clipped * 32768.0, 32767.0)));
      put_u16(out, static_cast<std::uint16_t>(v));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(s)));
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write wav file: " + path.string());
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("write failed: " + path.string());
}

}  // namespace tiger::dsp
