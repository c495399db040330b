#pragma once

#include <string>
#include <string_view>

#include "partmix/types.hpp"

// Sample CSV schema and small serialization helpers. The CSV layout is a
// header row f1..fp plus an optional trailing "label" column holding 1, 2,
// or the empty string for a missing label. Numbers are C-locale
// decimal-point form only, written with 17 significant digits.

namespace partmix {

PartialSample read_sample_csv(const std::string& path);

void write_sample_csv(const std::string& path, const PartialSample& sample);

/// printf %.17g equivalent through std::to_chars; locale independent.
std::string format_double(double value);

/// FNV-1a 64-bit hex digest; used for config hashes in result metadata.
std::string fnv1a_hex(std::string_view text);

/// Reads the "theta" block of a stored fit-result JSON file.
MixtureParams theta_from_fit_json(const std::string& path);

}  // namespace partmix
