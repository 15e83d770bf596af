#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace latent {

// Parse a SPICE numeric token: a decimal number with an optional magnitude
// suffix (f, p, n, u, m, k, meg; case-insensitive). Returns nullopt on
// anything else, including trailing garbage.
std::optional<double> parse_spice_number(std::string_view token);

// Render a double as the shortest decimal string that round-trips exactly
// (std::to_chars general format). Suffixes are never re-synthesised on
// output; parse/serialize normalisation is one-way by design.
std::string format_value(double v);

} // namespace latent
