#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include <doctest.h>

namespace test_helpers {

inline void check_close(double actual, double expected, double tol) {
    CAPTURE(actual);
    CAPTURE(expected);
    CHECK(std::abs(actual - expected) <= tol);
}

inline void check_vec(const std::vector<double>& actual, const std::vector<double>& expected,
                      double tol) {
    REQUIRE(actual.size() == expected.size());
    for (std::size_t i = 0; i < actual.size(); ++i) {
        CAPTURE(i);
        check_close(actual[i], expected[i], tol);
    }
}

}  // namespace test_helpers
