#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "doctest.h"
#include "fone/error.hpp"

namespace testutil {

// Runs f and reports the error kind it threw, if any.
inline bool throws_kind(const std::function<void()>& f, fone::ErrorKind kind) {
    try {
        f();
    } catch (const fone::Error& e) {
        return e.kind() == kind;
    }
    return false;
}

// Non-negative decimal with up to m integer digits and exactly n fraction
// digits, spelled canonically (no leading zeros).
inline std::string random_decimal(std::mt19937_64& gen, int m, int n) {
    std::uniform_int_distribution<int> digit(0, 9);
    std::string integer;
    for (int i = 0; i < m; ++i) integer.push_back(static_cast<char>('0' + digit(gen)));
    const auto nz = integer.find_first_not_of('0');
    integer = nz == std::string::npos ? "0" : integer.substr(nz);
    if (n == 0) return integer;
    std::string fraction;
    for (int i = 0; i < n; ++i) fraction.push_back(static_cast<char>('0' + digit(gen)));
    return integer + "." + fraction;
}

inline std::string random_digits(std::mt19937_64& gen, int count) {
    std::uniform_int_distribution<int> digit(0, 9);
    std::string s;
    for (int i = 0; i < count; ++i) s.push_back(static_cast<char>('0' + digit(gen)));
    return s;
}

}  // namespace testutil

#define CHECK_KIND(expr, kind) CHECK(testutil::throws_kind([&] { (void)(expr); }, fone::ErrorKind::kind))
