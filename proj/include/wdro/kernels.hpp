#pragma once

// Dense double-precision inner loops shared by the barrier solver and the
// separation oracles. Every routine has a portable scalar reference and, on
// x86-64, an AVX2/FMA variant selected once at startup. The scalar path is
// the semantic reference; vector variants agree with it up to reassociation
// rounding (see tests/test_kernels.cpp).

#include <cstddef>
#include <span>
#include <string_view>

namespace wdro::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*l1_distance)(const double* a, const double* b, std::size_t n);
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // y[r] = offset + <A[r, :], x> for a row-major rows x cols matrix.
    void (*affine_gemv)(const double* a, std::size_t rows, std::size_t cols,
                        const double* x, double offset, double* y);
    // A[0:n, 0:n] += alpha * x x^T, A column-major with leading dimension ld.
    void (*rank1_update)(double alpha, const double* x, std::size_t n, double* a,
                         std::size_t ld);
};

const KernelTable& scalar_table();
#if defined(WDRO_HAVE_AVX2)
const KernelTable& avx2_table();
#endif

bool avx2_supported();

// Currently dispatched ISA. Defaults to the best supported one unless the
// environment variable WDRO_FORCE_SCALAR is set to a non-empty value.
Isa active_isa();
std::string_view isa_name(Isa isa);

// Overrides dispatch; returns the previous ISA. Requesting Avx2 on a machine
// without it throws std::runtime_error.
Isa set_isa(Isa isa);

const KernelTable& active();

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
    return active().l1_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    active().axpy(alpha, x.data(), y.data(), x.size());
}

inline void affine_gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
                        std::span<const double> x, double offset, std::span<double> y) {
    active().affine_gemv(a.data(), rows, cols, x.data(), offset, y.data());
}

inline void rank1_update(double alpha, std::span<const double> x, double* a,
                         std::size_t ld) {
    active().rank1_update(alpha, x.data(), x.size(), a, ld);
}

}  // namespace wdro::kernels
