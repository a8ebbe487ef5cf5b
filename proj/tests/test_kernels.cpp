#include <cmath>
#include <random>

#include "doctest.h"
#include "wdro/kernels.hpp"

using namespace wdro;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> v(n);
    for (double& x : v) x = u(rng);
    return v;
}

double sum_abs_product(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += std::fabs(a[k] * b[k]);
    return s;
}

}  // namespace

TEST_CASE("scalar kernels on fixed inputs") {
    const auto& k = kernels::scalar_table();
    const double a[] = {1.0, 2.0, 3.0}, b[] = {4.0, -5.0, 6.0};
    CHECK(k.dot(a, b, 3) == 12.0);
    CHECK(k.l1_distance(a, b, 3) == 3.0 + 7.0 + 3.0);
    double y[] = {1.0, 1.0, 1.0};
    k.axpy(2.0, a, y, 3);
    CHECK(y[2] == 7.0);
    const double m[] = {1.0, 0.0, 2.0, 0.0, 1.0, -1.0};  // 2 x 3 row-major
    double out[2];
    k.affine_gemv(m, 2, 3, a, 0.5, out);
    CHECK(out[0] == 7.5);
    CHECK(out[1] == -0.5);
    double h[4] = {0.0, 0.0, 0.0, 0.0};
    const double x[] = {1.0, 2.0};
    k.rank1_update(3.0, x, 2, h, 2);
    CHECK(h[0] == 3.0);
    CHECK(h[1] == 6.0);
    CHECK(h[2] == 6.0);
    CHECK(h[3] == 12.0);
    CHECK(k.dot(a, b, 0) == 0.0);
}

#if defined(WDRO_HAVE_AVX2)
TEST_CASE("vector kernels agree with the scalar reference") {
    if (!kernels::avx2_supported()) return;
    const auto& s = kernels::scalar_table();
    const auto& v = kernels::avx2_table();
    std::mt19937_64 rng(12);
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 13u, 16u, 31u, 61u, 128u, 1001u}) {
        auto a = random_vector(n, rng), b = random_vector(n, rng);
        const double tol = 1e-14 * (1.0 + sum_abs_product(a, b));
        CHECK(std::fabs(s.dot(a.data(), b.data(), n) - v.dot(a.data(), b.data(), n)) <= tol);
        double l1 = 0.0;
        for (std::size_t k = 0; k < n; ++k) l1 += std::fabs(a[k] - b[k]);
        CHECK(std::fabs(s.l1_distance(a.data(), b.data(), n) - v.l1_distance(a.data(), b.data(), n)) <=
              1e-14 * (1.0 + l1));

        auto y1 = b, y2 = b;
        s.axpy(0.75, a.data(), y1.data(), n);
        v.axpy(0.75, a.data(), y2.data(), n);
        for (std::size_t k = 0; k < n; ++k) CHECK(std::fabs(y1[k] - y2[k]) <= 1e-15 * (1.0 + std::fabs(y1[k])));

        const std::size_t rows = n % 9 + 1;
        const auto mat = random_vector(rows * n, rng);
        std::vector<double> o1(rows), o2(rows);
        s.affine_gemv(mat.data(), rows, n, a.data(), -0.3, o1.data());
        v.affine_gemv(mat.data(), rows, n, a.data(), -0.3, o2.data());
        for (std::size_t r = 0; r < rows; ++r) CHECK(std::fabs(o1[r] - o2[r]) <= 1e-13 * (1.0 + 4.0 * n));

        const std::size_t ld = n + 3;
        auto h1 = random_vector(ld * n, rng);
        auto h2 = h1;
        s.rank1_update(-1.25, a.data(), n, h1.data(), ld);
        v.rank1_update(-1.25, a.data(), n, h2.data(), ld);
        for (std::size_t k = 0; k < h1.size(); ++k) CHECK(std::fabs(h1[k] - h2[k]) <= 1e-14 * (1.0 + std::fabs(h1[k])));
    }
}

TEST_CASE("rank one update leaves padding rows alone") {
    if (!kernels::avx2_supported()) return;
    const std::size_t n = 5, ld = 8;
    std::vector<double> h(ld * n, 9.0);
    const std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
    kernels::avx2_table().rank1_update(1.0, x.data(), n, h.data(), ld);
    for (std::size_t c = 0; c < n; ++c)
        for (std::size_t r = n; r < ld; ++r) CHECK(h[c * ld + r] == 9.0);
}
#endif

TEST_CASE("isa dispatch can be overridden") {
    const kernels::Isa before = kernels::active_isa();
    const kernels::Isa prev = kernels::set_isa(kernels::Isa::Scalar);
    CHECK(prev == before);
    CHECK(kernels::active_isa() == kernels::Isa::Scalar);
    CHECK(&kernels::active() == &kernels::scalar_table());
    const std::vector<double> a{1.0, 2.0}, b{3.0, 4.0};
    CHECK(kernels::dot(a, b) == 11.0);
    if (!kernels::avx2_supported()) {
        CHECK_THROWS(kernels::set_isa(kernels::Isa::Avx2));
    }
    kernels::set_isa(before);
    CHECK(kernels::isa_name(kernels::Isa::Scalar) != kernels::isa_name(kernels::Isa::Avx2));
}
