#include "dcm/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/gamma.hpp>

#include "dcm/kernels.hpp"
#include "dcm/rng.hpp"

namespace dcm {

namespace {

Matrix pooled_sqdist(const Matrix& X, const Matrix& Y) {
  const int m = X.rows(), n = Y.rows();
  Matrix pooled(m + n, X.cols());
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < X.cols(); ++j) pooled(i, j) = X(i, j);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < X.cols(); ++j) pooled(m + i, j) = Y(i, j);
  Matrix D(m + n, m + n);
  kernels::pairwise_sqdist(pooled, pooled, D);
  return D;
}

double median_of_offdiag_distances(const Matrix& sqdist) {
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(sqdist.rows()) * (sqdist.rows() - 1) / 2);
  for (int i = 0; i < sqdist.rows(); ++i)
    for (int j = i + 1; j < sqdist.cols(); ++j) d.push_back(sqdist(i, j));
  if (d.empty()) return 0.0;
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + mid, d.end());
  return std::sqrt(d[mid]);
}

}  // namespace

double median_heuristic_bandwidth(const Matrix& X, const Matrix& Y) {
  const double med = median_of_offdiag_distances(pooled_sqdist(X, Y));
  return med > 0.0 ? med : 1.0;
}

double mmd_rbf_raw(const Matrix& X, const Matrix& Y, const KernelSpec& kernel) {
  require(!X.empty() && !Y.empty(), "mmd_rbf: empty sample");
  require(X.cols() == Y.cols(), "mmd_rbf: column count mismatch");
  require(X.rows() >= 2 && Y.rows() >= 2, "mmd_rbf: need at least 2 rows in each sample");
  const int m = X.rows(), n = Y.rows();

  Matrix D = pooled_sqdist(X, Y);
  double sigma = kernel.bandwidth;
  if (sigma <= 0.0) {
    sigma = median_of_offdiag_distances(D);
    if (sigma == 0.0) sigma = 1.0;
  }
  kernels::rbf_from_sqdist(D, sigma);
  // blocks of D: [0,m) self-X, [m,m+n) self-Y

  if (m == n) {
    // paired form: cancels exactly for Y = X and is symmetric in (X, Y)
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        acc += (D(i, j) + D(m + i, m + j)) - (D(i, m + j) + D(j, m + i));
    return 2.0 * acc / (static_cast<double>(n) * (n - 1));
  }

  double sx = 0.0, sy = 0.0, cross = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) sx += D(i, j);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) sy += D(m + i, m + j);
  // iterate the cross block with the larger sample outermost so that
  // mmd(X, Y) and mmd(Y, X) accumulate in the same order
  if (m >= n) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j) cross += D(i, m + j);
  } else {
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < m; ++i) cross += D(i, m + j);
  }
  return 2.0 * sx / (static_cast<double>(m) * (m - 1)) +
         2.0 * sy / (static_cast<double>(n) * (n - 1)) -
         2.0 * cross / (static_cast<double>(m) * n);
}

double mmd_rbf(const Matrix& X, const Matrix& Y, const KernelSpec& kernel) {
  return std::max(0.0, mmd_rbf_raw(X, Y, kernel));
}

double mse_paired(const Matrix& A, const Matrix& B) {
  require(A.rows() == B.rows() && A.cols() == B.cols(), "mse_paired: shape mismatch");
  require(!A.empty(), "mse_paired: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double d = A.data()[i] - B.data()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(A.size());
}

namespace {

bool has_constant_column(const Matrix& M) {
  for (int j = 0; j < M.cols(); ++j) {
    bool constant = true;
    for (int i = 1; i < M.rows() && constant; ++i) constant = M(i, j) == M(0, j);
    if (constant) return true;
  }
  return false;
}

Matrix rbf_gram_self(const Matrix& X) {
  Matrix D(X.rows(), X.rows());
  kernels::pairwise_sqdist(X, X, D);
  double sigma = median_of_offdiag_distances(D);
  if (sigma == 0.0) sigma = 1.0;
  kernels::rbf_from_sqdist(D, sigma);
  return D;
}

// double centering: Gc = H G H with H = I - (1/n) 1 1^T
Matrix center_gram(const Matrix& G) {
  const int n = G.rows();
  Vector row_mean(n, 0.0);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += G(i, j);
    row_mean[i] = s / n;
    total += s;
  }
  total /= static_cast<double>(n) * n;
  Matrix out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = G(i, j) - row_mean[i] - row_mean[j] + total;
  return out;
}

double hsic_stat(const Matrix& Kc, const Matrix& Lc) {
  const int n = Kc.rows();
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += Kc(i, j) * Lc(i, j);
  return s / n;  // n * HSIC_b
}

}  // namespace

HsicResult hsic_pvalue(const Matrix& X, const Matrix& Y, bool force_permutation,
                       int num_permutations) {
  require(X.rows() == Y.rows(), "hsic: row count mismatch");
  require(X.rows() >= 20, "hsic: need at least 20 rows");
  const int n = X.rows();

  if (has_constant_column(X) || has_constant_column(Y)) {
    HsicResult r;
    r.degenerate = true;  // independence against a constant is vacuous
    return r;
  }

  const Matrix K = rbf_gram_self(X);
  const Matrix L = rbf_gram_self(Y);
  const Matrix Kc = center_gram(K);
  const Matrix Lc = center_gram(L);

  HsicResult result;
  result.statistic = hsic_stat(Kc, Lc);

  bool permute = force_permutation;
  if (!permute) {
    // gamma approximation to the null distribution
    double var = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) {
          const double e = Kc(i, j) * Lc(i, j) / 6.0;
          var += e * e;
        }
    var /= static_cast<double>(n) * (n - 1);
    var *= 72.0 * (n - 4.0) * (n - 5.0) / (n * (n - 1.0) * (n - 2.0) * (n - 3.0));

    double mu_x = 0.0, mu_y = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) {
          mu_x += K(i, j);
          mu_y += L(i, j);
        }
    mu_x /= static_cast<double>(n) * (n - 1);
    mu_y /= static_cast<double>(n) * (n - 1);
    const double mean = (1.0 + mu_x * mu_y - mu_x - mu_y) / n;

    if (var > 0.0 && mean > 0.0 && std::isfinite(var) && std::isfinite(mean)) {
      const double shape = mean * mean / var;
      const double scale = n * var / mean;
      result.p_value = boost::math::gamma_q(shape, std::max(result.statistic, 0.0) / scale);
      return result;
    }
    permute = true;  // moments degenerated
  }

  // permutation null (fixed internal seed; the signature carries no generator)
  Rng rng(0x68736963ull);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  int at_least = 0;
  Matrix Lp(n, n);
  for (int p = 0; p < num_permutations; ++p) {
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[static_cast<int>(rng.uniform_int(0, i))]);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Lp(i, j) = L(perm[i], perm[j]);
    const Matrix Lpc = center_gram(Lp);
    if (hsic_stat(Kc, Lpc) >= result.statistic) ++at_least;
  }
  result.p_value = (1.0 + at_least) / (1.0 + num_permutations);
  result.used_permutation = true;
  return result;
}

}  // namespace dcm
