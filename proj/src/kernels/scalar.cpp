#include "wdro/kernels.hpp"

#include <cmath>

namespace wdro::kernels {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double l1_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += std::fabs(a[i] - b[i]);
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void affine_gemv_scalar(const double* a, std::size_t rows, std::size_t cols,
                        const double* x, double offset, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = offset + dot_scalar(a + r * cols, x, cols);
}

void rank1_scalar(double alpha, const double* x, std::size_t n, double* a, std::size_t ld) {
    for (std::size_t j = 0; j < n; ++j) {
        const double s = alpha * x[j];
        if (s == 0.0) continue;
        double* col = a + j * ld;
        for (std::size_t i = 0; i < n; ++i) col[i] += s * x[i];
    }
}

}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{dot_scalar, l1_scalar, axpy_scalar, affine_gemv_scalar,
                                   rank1_scalar};
    return table;
}

}  // namespace wdro::kernels
