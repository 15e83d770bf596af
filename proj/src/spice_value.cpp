#include "latent/spice_value.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace latent {

namespace {

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::optional<double> suffix_scale(std::string_view suffix) {
    const std::string s = to_lower(suffix);
    if (s.empty()) return 1.0;
    if (s == "meg") return 1e6;
    if (s.size() == 1) {
        switch (s[0]) {
        case 'f': return 1e-15;
        case 'p': return 1e-12;
        case 'n': return 1e-9;
        case 'u': return 1e-6;
        case 'm': return 1e-3;
        case 'k': return 1e3;
        default: break;
        }
    }
    return std::nullopt;
}

} // namespace

std::optional<double> parse_spice_number(std::string_view token) {
    if (token.empty()) return std::nullopt;
    double value = 0.0;
    const char* first = token.data();
    const char* last = token.data() + token.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr == first) return std::nullopt;
    const auto scale = suffix_scale(std::string_view(ptr, static_cast<std::size_t>(last - ptr)));
    if (!scale) return std::nullopt;
    const double v = value * *scale;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

std::string format_value(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }
    return std::string(buf, ptr);
}

} // namespace latent
