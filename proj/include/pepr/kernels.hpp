#pragma once

#include <cstddef>

// Data-parallel kernels behind the layer/scoring math. Every parallel kernel
// distributes whole output elements (or whole rows/features) across threads
// and keeps the per-element accumulation order fixed, so results are
// bit-identical to the serial reference for any thread count.
//
// kern::serial holds the reference implementations; tests assert bit-equality
// and tools/kernel_bench compares throughput.
namespace pepr::kern {

// C (n x m) = A (n x k) * B (k x m)
void matmul_nn(const double* a, const double* b, double* c, int n, int k, int m);
// C (n x m) = A (n x k) * B^T, B is (m x k)
void matmul_nt(const double* a, const double* b, double* c, int n, int k, int m);
// C (n x m) += A^T * B, A is (k x n), B is (k x m)
void matmul_tn_acc(const double* a, const double* b, double* c, int n, int k, int m);

void add_row_vector(double* m, const double* v, int rows, int cols);
void col_sum_acc(const double* m, double* out, int rows, int cols);

void elu_forward(const double* x, double* y, std::size_t n);
void elu_backward(const double* y, const double* dy, double* dx, std::size_t n);
void tanh_forward(const double* x, double* y, std::size_t n);
void tanh_backward(const double* y, const double* dy, double* dx, std::size_t n);
void relu_forward(const double* x, double* y, std::size_t n);
void relu_backward(const double* x, const double* dy, double* dx, std::size_t n);
void leaky_relu_forward(const double* x, double* y, std::size_t n, double slope);
void leaky_relu_backward(const double* x, const double* dy, double* dx, std::size_t n, double slope);

void row_softmax(const double* x, double* y, int rows, int cols);
// Independent softmax over [offset[g], offset[g] + width[g]) slices of each row.
void grouped_row_softmax(const double* x, double* y, int rows, int cols, const int* offset,
                         const int* width, int groups);

// Per-feature mean and population variance over the batch dimension.
void feature_mean_var(const double* x, int rows, int cols, double* mean, double* var);

void row_mean_sq(const double* x, int rows, int cols, double* out);
void row_mean_relu_sq(const double* x, int rows, int cols, double* out);

namespace serial {

void matmul_nn(const double* a, const double* b, double* c, int n, int k, int m);
void matmul_nt(const double* a, const double* b, double* c, int n, int k, int m);
void matmul_tn_acc(const double* a, const double* b, double* c, int n, int k, int m);
void elu_forward(const double* x, double* y, std::size_t n);
void row_softmax(const double* x, double* y, int rows, int cols);
void feature_mean_var(const double* x, int rows, int cols, double* mean, double* var);
void row_mean_sq(const double* x, int rows, int cols, double* out);
void row_mean_relu_sq(const double* x, int rows, int cols, double* out);

}  // namespace serial

}  // namespace pepr::kern
