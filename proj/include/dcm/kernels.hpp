#pragma once

#include "dcm/matrix.hpp"

// Dense compute kernels behind the MLP and the kernel two-sample statistics.
// The OpenMP versions assign each output row to exactly one thread and keep a
// fixed inner-loop order, so results are bit-identical to the serial
// references at any thread count.

namespace dcm::kernels {

/// C = A * B^T.  A: (m x k), B: (n x k), C: (m x n).
void matmul_nt(const Matrix& A, const Matrix& B, Matrix& C);

/// C = A * B.  A: (m x k), B: (k x n), C: (m x n).
void matmul_nn(const Matrix& A, const Matrix& B, Matrix& C);

/// C = A^T * B.  A: (n x m), B: (n x k), C: (m x k).
void matmul_tn(const Matrix& A, const Matrix& B, Matrix& C);

/// Adds row vector b to every row of C.
void add_row_inplace(Matrix& C, const Vector& b);

/// D(i,j) = ||X.row(i) - Y.row(j)||^2.
void pairwise_sqdist(const Matrix& X, const Matrix& Y, Matrix& D);

/// In place: D(i,j) <- exp(-D(i,j) / (2 sigma^2)).
void rbf_from_sqdist(Matrix& D, double sigma);

namespace serial {
void matmul_nt(const Matrix& A, const Matrix& B, Matrix& C);
void matmul_nn(const Matrix& A, const Matrix& B, Matrix& C);
void matmul_tn(const Matrix& A, const Matrix& B, Matrix& C);
void pairwise_sqdist(const Matrix& X, const Matrix& Y, Matrix& D);
void rbf_from_sqdist(Matrix& D, double sigma);
}  // namespace serial

}  // namespace dcm::kernels
