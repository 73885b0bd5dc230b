#ifndef CASCADE_FORMAT_HPP
#define CASCADE_FORMAT_HPP

#include <charconv>
#include <string>

namespace cascade {

// Shortest round-trip decimal form; locale independent.
inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// Fixed notation with `digits` fractional digits.
inline std::string format_fixed(double v, int digits)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
    return std::string(buf, res.ptr);
}

} // namespace cascade

#endif // CASCADE_FORMAT_HPP
