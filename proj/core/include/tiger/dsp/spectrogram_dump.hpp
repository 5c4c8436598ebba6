#pragma once

#include <filesystem>

#include "tiger/dsp/stft.hpp"

namespace tiger::dsp {

/// T rows by F columns of linear magnitudes, comma separated, '.' radix.
void write_magnitude_csv(const std::filesystem::path& path, const ComplexSpectrogram& spec);

/// Binary 8-bit PGM (P5) of log magnitude. Image row r holds frequency bin
/// F-1-r, so low frequencies are at the bottom; columns are frames. The
/// grey scale spans the top `dynamic_range_db` decibels.
void write_log_magnitude_pgm(const std::filesystem::path& path, const ComplexSpectrogram& spec,
                             double dynamic_range_db = 80.0);

}  // namespace tiger::dsp
