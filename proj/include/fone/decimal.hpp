#pragma once

// Exact arithmetic on non-negative decimal strings ("957454", "12.305").
// Used to label generated data; binary floating point never touches an
// answer.

#include <string>
#include <string_view>

namespace fone::decimal {

/// <0, 0, >0 like strcmp, on numeric value.
int compare(std::string_view a, std::string_view b);

std::string add(std::string_view a, std::string_view b);

/// Requires a >= b; throws invalid-argument otherwise.
std::string subtract(std::string_view a, std::string_view b);

std::string multiply(std::string_view a, std::string_view b);

}  // namespace fone::decimal
