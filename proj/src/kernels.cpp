#include "pepr/kernels.hpp"

#include <algorithm>
#include <cmath>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace pepr::kern {
namespace {

// Row workers shared by the parallel and serial entry points. Both paths run
// the exact same accumulation order per output element, which is what makes
// omp-vs-serial bit-equality hold.

// c_row (m) = a_row (k) * B (k x m)
void mm_nn_row(const double* a_row, const double* b, double* c_row, int k, int m) {
    std::fill(c_row, c_row + m, 0.0);
    for (int kk = 0; kk < k; ++kk) {
        const double a = a_row[kk];
        const double* b_row = b + static_cast<std::size_t>(kk) * m;
        for (int j = 0; j < m; ++j) c_row[j] += a * b_row[j];
    }
}

// c_row (m) = a_row (k) dot rows of B (m x k)
void mm_nt_row(const double* a_row, const double* b, double* c_row, int k, int m) {
    for (int j = 0; j < m; ++j) {
        const double* b_row = b + static_cast<std::size_t>(j) * k;
        double acc = 0.0;
        for (int kk = 0; kk < k; ++kk) acc += a_row[kk] * b_row[kk];
        c_row[j] = acc;
    }
}

// c_row (m) += column i of A (k x n) dotted against B (k x m)
void mm_tn_row(const double* a, const double* b, double* c_row, int i, int n, int k, int m) {
    for (int kk = 0; kk < k; ++kk) {
        const double a_ki = a[static_cast<std::size_t>(kk) * n + i];
        const double* b_row = b + static_cast<std::size_t>(kk) * m;
        for (int j = 0; j < m; ++j) c_row[j] += a_ki * b_row[j];
    }
}

void softmax_row(const double* x, double* y, int cols) {
    double mx = x[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) {
        y[j] = std::exp(x[j] - mx);
        sum += y[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < cols; ++j) y[j] *= inv;
}

void mean_var_col(const double* x, int rows, int cols, int j, double* mean, double* var) {
    double s = 0.0;
    for (int i = 0; i < rows; ++i) s += x[static_cast<std::size_t>(i) * cols + j];
    const double mu = s / rows;
    double sq = 0.0;
    for (int i = 0; i < rows; ++i) {
        const double d = x[static_cast<std::size_t>(i) * cols + j] - mu;
        sq += d * d;
    }
    mean[j] = mu;
    var[j] = sq / rows;
}

double mean_sq_row(const double* row, int cols) {
    double s = 0.0;
    for (int j = 0; j < cols; ++j) s += row[j] * row[j];
    return s / cols;
}

double mean_relu_sq_row(const double* row, int cols) {
    double s = 0.0;
    for (int j = 0; j < cols; ++j) {
        const double r = row[j] > 0.0 ? row[j] : 0.0;
        s += r * r;
    }
    return s / cols;
}

constexpr long long kParallelCutoff = 16384;  // flops below this are not worth a team

}  // namespace

void matmul_nn(const double* a, const double* b, double* c, int n, int k, int m) {
    const long long work = 1LL * n * k * m;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int i = 0; i < n; ++i) {
        mm_nn_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * m, k, m);
    }
}

void matmul_nt(const double* a, const double* b, double* c, int n, int k, int m) {
    const long long work = 1LL * n * k * m;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int i = 0; i < n; ++i) {
        mm_nt_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * m, k, m);
    }
}

void matmul_tn_acc(const double* a, const double* b, double* c, int n, int k, int m) {
    const long long work = 1LL * n * k * m;
#pragma omp parallel for schedule(static) if (work > kParallelCutoff)
    for (int i = 0; i < n; ++i) {
        mm_tn_row(a, b, c + static_cast<std::size_t>(i) * m, i, n, k, m);
    }
}

void add_row_vector(double* m, const double* v, int rows, int cols) {
#pragma omp parallel for schedule(static) if (1LL * rows * cols > kParallelCutoff)
    for (int i = 0; i < rows; ++i) {
        double* row = m + static_cast<std::size_t>(i) * cols;
        for (int j = 0; j < cols; ++j) row[j] += v[j];
    }
}

void col_sum_acc(const double* m, double* out, int rows, int cols) {
#pragma omp parallel for schedule(static) if (1LL * rows * cols > kParallelCutoff)
    for (int j = 0; j < cols; ++j) {
        double s = 0.0;
        for (int i = 0; i < rows; ++i) s += m[static_cast<std::size_t>(i) * cols + j];
        out[j] += s;
    }
}

void elu_forward(const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > static_cast<std::size_t>(kParallelCutoff))
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        y[i] = x[i] >= 0.0 ? x[i] : std::expm1(x[i]);
    }
}

void elu_backward(const double* y, const double* dy, double* dx, std::size_t n) {
    // d/dx elu(x) = 1 for x >= 0, exp(x) = y + 1 otherwise
#pragma omp parallel for schedule(static) if (n > static_cast<std::size_t>(kParallelCutoff))
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        dx[i] = dy[i] * (y[i] >= 0.0 ? 1.0 : y[i] + 1.0);
    }
}

void tanh_forward(const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > static_cast<std::size_t>(kParallelCutoff))
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) y[i] = std::tanh(x[i]);
}

void tanh_backward(const double* y, const double* dy, double* dx, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > static_cast<std::size_t>(kParallelCutoff))
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        dx[i] = dy[i] * (1.0 - y[i] * y[i]);
    }
}

void relu_forward(const double* x, double* y, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > static_cast<std::size_t>(kParallelCutoff))
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        y[i] = x[i] > 0.0 ? x[i] : 0.0;
    }
}

void relu_backward(const double* x, const double* dy, double* dx, std::size_t n) {
#pragma omp parallel for schedule(static) if (n > static_cast<std::size_t>(kParallelCutoff))
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
    }
}

void leaky_relu_forward(const double* x, double* y, std::size_t n, double slope) {
#pragma omp parallel for schedule(static) if (n > static_cast<std::size_t>(kParallelCutoff))
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        y[i] = x[i] > 0.0 ? x[i] : slope * x[i];
    }
}

void leaky_relu_backward(const double* x, const double* dy, double* dx, std::size_t n,
                         double slope) {
#pragma omp parallel for schedule(static) if (n > static_cast<std::size_t>(kParallelCutoff))
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        dx[i] = x[i] > 0.0 ? dy[i] : slope * dy[i];
    }
}

void row_softmax(const double* x, double* y, int rows, int cols) {
#pragma omp parallel for schedule(static) if (1LL * rows * cols > kParallelCutoff)
    for (int i = 0; i < rows; ++i) {
        softmax_row(x + static_cast<std::size_t>(i) * cols, y + static_cast<std::size_t>(i) * cols,
                    cols);
    }
}

void grouped_row_softmax(const double* x, double* y, int rows, int cols, const int* offset,
                         const int* width, int groups) {
#pragma omp parallel for schedule(static) if (1LL * rows * cols > kParallelCutoff)
    for (int i = 0; i < rows; ++i) {
        const double* xr = x + static_cast<std::size_t>(i) * cols;
        double* yr = y + static_cast<std::size_t>(i) * cols;
        for (int g = 0; g < groups; ++g) softmax_row(xr + offset[g], yr + offset[g], width[g]);
    }
}

void feature_mean_var(const double* x, int rows, int cols, double* mean, double* var) {
#pragma omp parallel for schedule(static) if (1LL * rows * cols > kParallelCutoff)
    for (int j = 0; j < cols; ++j) mean_var_col(x, rows, cols, j, mean, var);
}

void row_mean_sq(const double* x, int rows, int cols, double* out) {
#pragma omp parallel for schedule(static) if (1LL * rows * cols > kParallelCutoff)
    for (int i = 0; i < rows; ++i) out[i] = mean_sq_row(x + static_cast<std::size_t>(i) * cols, cols);
}

void row_mean_relu_sq(const double* x, int rows, int cols, double* out) {
#pragma omp parallel for schedule(static) if (1LL * rows * cols > kParallelCutoff)
    for (int i = 0; i < rows; ++i) {
        out[i] = mean_relu_sq_row(x + static_cast<std::size_t>(i) * cols, cols);
    }
}

namespace serial {

void matmul_nn(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        mm_nn_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * m, k, m);
    }
}

void matmul_nt(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        mm_nt_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * m, k, m);
    }
}

void matmul_tn_acc(const double* a, const double* b, double* c, int n, int k, int m) {
    for (int i = 0; i < n; ++i) {
        mm_tn_row(a, b, c + static_cast<std::size_t>(i) * m, i, n, k, m);
    }
}

void elu_forward(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] >= 0.0 ? x[i] : std::expm1(x[i]);
}

void row_softmax(const double* x, double* y, int rows, int cols) {
    for (int i = 0; i < rows; ++i) {
        softmax_row(x + static_cast<std::size_t>(i) * cols, y + static_cast<std::size_t>(i) * cols,
                    cols);
    }
}

void feature_mean_var(const double* x, int rows, int cols, double* mean, double* var) {
    for (int j = 0; j < cols; ++j) mean_var_col(x, rows, cols, j, mean, var);
}

void row_mean_sq(const double* x, int rows, int cols, double* out) {
    for (int i = 0; i < rows; ++i) out[i] = mean_sq_row(x + static_cast<std::size_t>(i) * cols, cols);
}

void row_mean_relu_sq(const double* x, int rows, int cols, double* out) {
    for (int i = 0; i < rows; ++i) {
        out[i] = mean_relu_sq_row(x + static_cast<std::size_t>(i) * cols, cols);
    }
}

}  // namespace serial

}  // namespace pepr::kern
