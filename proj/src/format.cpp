#include "cream/format.hpp"

#include <array>
#include <charconv>

namespace cream {

std::string format_real(double x)
{
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), end);
}

} // namespace cream
