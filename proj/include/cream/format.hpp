#pragma once

#include <string>

namespace cream {

/// Shortest decimal text that parses back to exactly x.
std::string format_real(double x);

} // namespace cream
