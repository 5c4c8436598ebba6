#pragma once

#include <filesystem>

#include "tiger/dsp/waveform.hpp"

namespace tiger::dsp {

enum class WavEncoding { Pcm16, Float32 };

/// Reads a mono RIFF/WAVE file (PCM 16/24/32-bit or IEEE float 32-bit,
/// including WAVE_FORMAT_EXTENSIBLE). Multi-channel files are rejected.
Waveform read_wav(const std::filesystem::path& path);

/// Writes a mono RIFF/WAVE file. PCM16 output is clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const Waveform& wave,
               WavEncoding encoding = WavEncoding::Float32);

}  // namespace tiger::dsp
