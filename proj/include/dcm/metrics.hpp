#pragma once

#include "dcm/matrix.hpp"

namespace dcm {

/// RBF kernel spec; bandwidth 0 selects the median heuristic on the data.
struct KernelSpec {
  double bandwidth = 0.0;
};

/// Median of the pairwise Euclidean distances of the pooled rows; falls back
/// to 1.0 when the median is zero.
double median_heuristic_bandwidth(const Matrix& X, const Matrix& Y);

/// Unbiased-style squared-MMD estimator with every i = j pair excluded. The
/// raw value can be negative; mmd_rbf clamps at zero for reporting.
double mmd_rbf_raw(const Matrix& X, const Matrix& Y, const KernelSpec& kernel = {});
double mmd_rbf(const Matrix& X, const Matrix& Y, const KernelSpec& kernel = {});

/// Mean over all entries of the squared difference.
double mse_paired(const Matrix& A, const Matrix& B);

struct HsicResult {
  double statistic = 0.0;  // n * HSIC_b
  double p_value = 1.0;
  bool degenerate = false;  // constant input: independence not testable
  bool used_permutation = false;
};

/// Biased HSIC statistic with RBF kernels (per-variable median heuristic) and
/// a gamma approximation to the null. Falls back to a permutation test when
/// the fitted moments degenerate; `force_permutation` selects it outright.
/// The permutation path uses a fixed internal seed (the signature carries no
/// generator), so results are reproducible. Requires at least 20 rows.
HsicResult hsic_pvalue(const Matrix& X, const Matrix& Y, bool force_permutation = false,
                       int num_permutations = 500);

}  // namespace dcm
