#include <doctest.h>

#include <random>
#include <vector>

#include "kinkreg/linalg.hpp"
#include "oracles.hpp"

using namespace kinkreg;

TEST_SUITE("linalg") {

TEST_CASE("pivoted solve matches Gaussian elimination on random SPD systems") {
    std::mt19937 gen(1234);
    std::normal_distribution<double> nd;
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t d = 1 + gen() % 7;
        const std::size_t rows = d + 2 + gen() % 10;
        // A = Z'Z with random Z of full column rank (almost surely)
        std::vector<std::vector<double>> z(rows, std::vector<double>(d));
        for (auto& r : z)
            for (auto& v : r) v = nd(gen);
        std::vector<double> a(d * d, 0.0), b(d);
        std::vector<std::vector<double>> a2(d, std::vector<double>(d, 0.0));
        for (std::size_t r = 0; r < d; ++r) {
            b[r] = nd(gen);
            for (std::size_t c = 0; c < d; ++c) {
                double s = 0;
                for (std::size_t i = 0; i < rows; ++i) s += z[i][r] * z[i][c];
                a[r * d + c] = s;
                a2[r][c] = s;
            }
        }
        auto x = linalg::solve_spd_pivoted(a, b, d);
        REQUIRE(x.has_value());
        const auto ref = oracle::gauss_solve(a2, b);
        for (std::size_t k = 0; k < d; ++k)
            CHECK(std::abs((*x)[k] - ref[k]) <= 1e-8 * (1.0 + std::abs(ref[k])));
    }
}

TEST_CASE("rank deficiency is detected") {
    // two identical columns
    const std::size_t d = 3;
    std::vector<std::vector<double>> z = {{1, 1, 2}, {2, 2, 1}, {3, 3, 5}, {4, 4, 0}};
    std::vector<double> a(d * d, 0.0), b(d, 1.0);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) {
            double s = 0;
            for (const auto& row : z) s += row[r] * row[c];
            a[r * d + c] = s;
        }
    CHECK_FALSE(linalg::solve_spd_pivoted(a, b, d).has_value());
}

TEST_CASE("zero-dimensional system is fine") {
    std::vector<double> a, b;
    CHECK(linalg::solve_spd_pivoted(a, b, 0).has_value());
}

} // TEST_SUITE
