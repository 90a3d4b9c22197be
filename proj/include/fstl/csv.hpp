#pragma once

#include <cstdint>
#include <string>

namespace fstl {

/// Shortest round-trip decimal form, locale independent.
std::string format_number(double v);
std::string format_number(std::uint64_t v);

}  // namespace fstl
