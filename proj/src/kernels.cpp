#include "dcm/kernels.hpp"

#include <cmath>

namespace dcm::kernels {

void matmul_nt(const Matrix& A, const Matrix& B, Matrix& C) {
  if (A.cols() != B.cols() || C.rows() != A.rows() || C.cols() != B.rows())
    throw ShapeError("matmul_nt: incompatible shapes");
  // Transposing B turns the per-element reduction into a vectorizable
  // accumulate; the addition order per output element is unchanged.
  Matrix Bt(B.cols(), B.rows());
  for (int i = 0; i < B.rows(); ++i)
    for (int j = 0; j < B.cols(); ++j) Bt(j, i) = B(i, j);
  matmul_nn(A, Bt, C);
}

void matmul_nn(const Matrix& A, const Matrix& B, Matrix& C) {
  if (A.cols() != B.rows() || C.rows() != A.rows() || C.cols() != B.cols())
    throw ShapeError("matmul_nn: incompatible shapes");
  const int m = A.rows(), n = B.cols(), k = A.cols();
#pragma omp parallel for schedule(static) if(C.rows() > 8)
  for (int i = 0; i < m; ++i) {
    double* c = C.row(i);
    for (int j = 0; j < n; ++j) c[j] = 0.0;
    const double* a = A.row(i);
    for (int p = 0; p < k; ++p) {
      const double ap = a[p];
      const double* b = B.row(p);
      for (int j = 0; j < n; ++j) c[j] += ap * b[j];
    }
  }
}

void matmul_tn(const Matrix& A, const Matrix& B, Matrix& C) {
  if (A.rows() != B.rows() || C.rows() != A.cols() || C.cols() != B.cols())
    throw ShapeError("matmul_tn: incompatible shapes");
  const int m = A.cols(), n = B.cols(), k = A.rows();
#pragma omp parallel for schedule(static) if(C.rows() > 8)
  for (int i = 0; i < m; ++i) {
    double* c = C.row(i);
    for (int j = 0; j < n; ++j) c[j] = 0.0;
    for (int p = 0; p < k; ++p) {
      const double ap = A(p, i);
      const double* b = B.row(p);
      for (int j = 0; j < n; ++j) c[j] += ap * b[j];
    }
  }
}

void add_row_inplace(Matrix& C, const Vector& b) {
  if (static_cast<int>(b.size()) != C.cols())
    throw ShapeError("add_row_inplace: width mismatch");
#pragma omp parallel for schedule(static) if(C.rows() > 8)
  for (int i = 0; i < C.rows(); ++i) {
    double* c = C.row(i);
    for (int j = 0; j < C.cols(); ++j) c[j] += b[j];
  }
}

void pairwise_sqdist(const Matrix& X, const Matrix& Y, Matrix& D) {
  if (X.cols() != Y.cols() || D.rows() != X.rows() || D.cols() != Y.rows())
    throw ShapeError("pairwise_sqdist: incompatible shapes");
  const int m = X.rows(), n = Y.rows(), d = X.cols();
#pragma omp parallel for schedule(static) if(m > 8)
  for (int i = 0; i < m; ++i) {
    const double* x = X.row(i);
    double* out = D.row(i);
    for (int j = 0; j < n; ++j) {
      const double* y = Y.row(j);
      double acc = 0.0;
      for (int p = 0; p < d; ++p) {
        const double diff = x[p] - y[p];
        acc += diff * diff;
      }
      out[j] = acc;
    }
  }
}

void rbf_from_sqdist(Matrix& D, double sigma) {
  require(sigma > 0.0, "rbf_from_sqdist: sigma must be positive");
  const double inv = -1.0 / (2.0 * sigma * sigma);
#pragma omp parallel for schedule(static) if(D.rows() > 8)
  for (int i = 0; i < D.rows(); ++i) {
    double* row = D.row(i);
    for (int j = 0; j < D.cols(); ++j) row[j] = std::exp(row[j] * inv);
  }
}

namespace serial {

void matmul_nt(const Matrix& A, const Matrix& B, Matrix& C) {
  Matrix Bt(B.cols(), B.rows());
  for (int i = 0; i < B.rows(); ++i)
    for (int j = 0; j < B.cols(); ++j) Bt(j, i) = B(i, j);
  matmul_nn(A, Bt, C);
}

void matmul_nn(const Matrix& A, const Matrix& B, Matrix& C) {
  for (int i = 0; i < A.rows(); ++i) {
    for (int j = 0; j < B.cols(); ++j) C(i, j) = 0.0;
    for (int p = 0; p < A.cols(); ++p)
      for (int j = 0; j < B.cols(); ++j) C(i, j) += A(i, p) * B(p, j);
  }
}

void matmul_tn(const Matrix& A, const Matrix& B, Matrix& C) {
  for (int i = 0; i < A.cols(); ++i) {
    for (int j = 0; j < B.cols(); ++j) C(i, j) = 0.0;
    for (int p = 0; p < A.rows(); ++p)
      for (int j = 0; j < B.cols(); ++j) C(i, j) += A(p, i) * B(p, j);
  }
}

void pairwise_sqdist(const Matrix& X, const Matrix& Y, Matrix& D) {
  for (int i = 0; i < X.rows(); ++i)
    for (int j = 0; j < Y.rows(); ++j) {
      double acc = 0.0;
      for (int p = 0; p < X.cols(); ++p) {
        const double diff = X(i, p) - Y(j, p);
        acc += diff * diff;
      }
      D(i, j) = acc;
    }
}

void rbf_from_sqdist(Matrix& D, double sigma) {
  const double inv = -1.0 / (2.0 * sigma * sigma);
  for (int i = 0; i < D.rows(); ++i)
    for (int j = 0; j < D.cols(); ++j) D(i, j) = std::exp(D(i, j) * inv);
}

}  // namespace serial

}  // namespace dcm::kernels
