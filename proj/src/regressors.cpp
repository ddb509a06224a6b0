#include "dcm/regressors.hpp"

#include <algorithm>
#include <cmath>

#include "dcm/kernels.hpp"
#include "dcm/serialize.hpp"

namespace dcm {

namespace {

// in-place Cholesky solve of the small SPD system A X = B
Matrix spd_solve(Matrix a, Matrix b) {
  const int p = a.rows();
  require(a.cols() == p && b.rows() == p, "spd_solve: shape mismatch");
  for (int j = 0; j < p; ++j) {
    double diag = a(j, j);
    for (int k = 0; k < j; ++k) diag -= a(j, k) * a(j, k);
    require(diag > 0.0, "spd_solve: matrix not positive definite");
    a(j, j) = std::sqrt(diag);
    for (int i = j + 1; i < p; ++i) {
      double v = a(i, j);
      for (int k = 0; k < j; ++k) v -= a(i, k) * a(j, k);
      a(i, j) = v / a(j, j);
    }
  }
  for (int c = 0; c < b.cols(); ++c) {
    for (int i = 0; i < p; ++i) {
      double v = b(i, c);
      for (int k = 0; k < i; ++k) v -= a(i, k) * b(k, c);
      b(i, c) = v / a(i, i);
    }
    for (int i = p - 1; i >= 0; --i) {
      double v = b(i, c);
      for (int k = i + 1; k < p; ++k) v -= a(k, i) * b(k, c);
      b(i, c) = v / a(i, i);
    }
  }
  return b;
}

Vector column_means(const Matrix& m) {
  Vector out(m.cols(), 0.0);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) out[j] += m(i, j);
  for (auto& v : out) v /= m.rows();
  return out;
}

}  // namespace

void RidgeRegressor::fit(const Matrix& X, const Matrix& Y) {
  require(X.rows() == Y.rows() && X.rows() >= 2, "ridge: bad training shapes");
  const Vector mx = column_means(X), my = column_means(Y);
  Matrix xc = X, yc = Y;
  for (int i = 0; i < X.rows(); ++i) {
    for (int j = 0; j < X.cols(); ++j) xc(i, j) -= mx[j];
    for (int j = 0; j < Y.cols(); ++j) yc(i, j) -= my[j];
  }
  Matrix xtx(X.cols(), X.cols()), xty(X.cols(), Y.cols());
  kernels::matmul_tn(xc, xc, xtx);
  kernels::matmul_tn(xc, yc, xty);
  for (int j = 0; j < X.cols(); ++j) xtx(j, j) += lambda_;
  coef_ = spd_solve(std::move(xtx), std::move(xty));
  intercept_.assign(Y.cols(), 0.0);
  for (int q = 0; q < Y.cols(); ++q) {
    double v = my[q];
    for (int j = 0; j < X.cols(); ++j) v -= coef_(j, q) * mx[j];
    intercept_[q] = v;
  }
}

Matrix RidgeRegressor::predict(const Matrix& X) const {
  require(!coef_.empty(), "ridge: predict before fit");
  Matrix out(X.rows(), coef_.cols());
  kernels::matmul_nn(X, coef_, out);
  kernels::add_row_inplace(out, intercept_);
  return out;
}

nlohmann::json RidgeRegressor::to_json() const {
  return {{"kind", "ridge"},
          {"lambda", lambda_},
          {"coef", matrix_to_json(coef_)},
          {"intercept", intercept_}};
}

std::unique_ptr<Regressor> RidgeRegressor::clone() const {
  return std::make_unique<RidgeRegressor>(*this);
}

void KnnRegressor::fit(const Matrix& X, const Matrix& Y) {
  require(X.rows() == Y.rows() && X.rows() >= k_, "knn: bad training shapes");
  train_x_ = X;
  train_y_ = Y;
}

Matrix KnnRegressor::predict(const Matrix& X) const {
  require(!train_x_.empty(), "knn: predict before fit");
  Matrix d(X.rows(), train_x_.rows());
  kernels::pairwise_sqdist(X, train_x_, d);
  Matrix out(X.rows(), train_y_.cols());
  const int k = std::min(k_, train_x_.rows());
#pragma omp parallel for schedule(static) if (X.rows() > 8)
  for (int i = 0; i < X.rows(); ++i) {
    std::vector<std::pair<double, int>> order(train_x_.rows());
    for (int j = 0; j < train_x_.rows(); ++j) order[j] = {d(i, j), j};
    std::partial_sort(order.begin(), order.begin() + k, order.end());
    for (int q = 0; q < train_y_.cols(); ++q) {
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += train_y_(order[t].second, q);
      out(i, q) = acc / k;
    }
  }
  return out;
}

nlohmann::json KnnRegressor::to_json() const {
  return {{"kind", "knn"},
          {"k", k_},
          {"train_x", matrix_to_json(train_x_)},
          {"train_y", matrix_to_json(train_y_)}};
}

std::unique_ptr<Regressor> KnnRegressor::clone() const {
  return std::make_unique<KnnRegressor>(*this);
}

void MlpRegressor::fit(const Matrix& X, const Matrix& Y) {
  require(X.rows() == Y.rows() && X.rows() >= 2, "mlp regressor: bad training shapes");
  Rng rng(opt_.seed);
  Rng init = rng.substream("init");
  std::vector<int> sizes{X.cols()};
  for (int h : opt_.hidden) sizes.push_back(h);
  sizes.push_back(Y.cols());
  net_ = make_mlp(sizes, init);
  AdamState adam = make_adam_state(net_, opt_.learning_rate);
  Rng shuffle = rng.substream("shuffle");

  const int n = X.rows();
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  MlpTape tape;
  for (int epoch = 0; epoch < opt_.epochs; ++epoch) {
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[static_cast<int>(shuffle.uniform_int(0, i))]);
    for (int start = 0; start < n; start += opt_.batch_size) {
      const int b = std::min(opt_.batch_size, n - start);
      Matrix xb(b, X.cols()), yb(b, Y.cols());
      for (int r = 0; r < b; ++r) {
        for (int j = 0; j < X.cols(); ++j) xb(r, j) = X(order[start + r], j);
        for (int j = 0; j < Y.cols(); ++j) yb(r, j) = Y(order[start + r], j);
      }
      const Matrix out = mlp_forward_tape(net_, xb, tape);
      Matrix upstream(b, Y.cols());
      for (int r = 0; r < b; ++r)
        for (int j = 0; j < Y.cols(); ++j) upstream(r, j) = 2.0 * (out(r, j) - yb(r, j)) / b;
      adam_step(adam, net_, mlp_grad_batch(net_, tape, upstream));
    }
  }
  fitted_ = true;
}

Matrix MlpRegressor::predict(const Matrix& X) const {
  require(fitted_, "mlp regressor: predict before fit");
  return mlp_apply_batch(net_, X);
}

nlohmann::json MlpRegressor::to_json() const {
  require(fitted_, "mlp regressor: serialize before fit");
  return {{"kind", "mlp"},
          {"net", mlp_to_json(net_)},
          {"hidden", opt_.hidden},
          {"epochs", opt_.epochs},
          {"batch_size", opt_.batch_size},
          {"learning_rate", opt_.learning_rate},
          {"seed", opt_.seed}};
}

std::unique_ptr<Regressor> MlpRegressor::clone() const {
  return std::make_unique<MlpRegressor>(*this);
}

std::unique_ptr<Regressor> Regressor::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "ridge") {
    auto r = std::make_unique<RidgeRegressor>(j.at("lambda").get<double>());
    r->restore(matrix_from_json(j.at("coef")), j.at("intercept").get<Vector>());
    return r;
  }
  if (kind == "knn") {
    auto r = std::make_unique<KnnRegressor>(j.at("k").get<int>());
    r->fit(matrix_from_json(j.at("train_x")), matrix_from_json(j.at("train_y")));
    return r;
  }
  if (kind == "mlp") {
    MlpRegressor::Options opt;
    opt.hidden = j.at("hidden").get<std::vector<int>>();
    opt.epochs = j.at("epochs").get<int>();
    opt.batch_size = j.at("batch_size").get<int>();
    opt.learning_rate = j.at("learning_rate").get<double>();
    opt.seed = j.at("seed").get<std::uint64_t>();
    auto r = std::make_unique<MlpRegressor>(opt);
    r->restore(mlp_from_json(j.at("net")));
    return r;
  }
  throw Error("unknown regressor kind: " + kind);
}

std::pair<std::unique_ptr<Regressor>, CvSelection> select_regressor_cv(
    const Matrix& X, const Matrix& Y, int folds, Rng& rng,
    const MlpRegressor::Options& mlp_opt) {
  require(folds >= 2, "select_regressor_cv: need at least 2 folds");
  const int n = X.rows();
  require(n >= folds, "select_regressor_cv: more folds than rows");

  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<int>(rng.uniform_int(0, i))]);

  std::vector<std::unique_ptr<Regressor>> menu;
  menu.push_back(std::make_unique<RidgeRegressor>());
  menu.push_back(std::make_unique<KnnRegressor>());
  MlpRegressor::Options mo = mlp_opt;
  mo.seed = rng.substream("mlp_cv").root_seed();
  menu.push_back(std::make_unique<MlpRegressor>(mo));

  CvSelection sel;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_idx = 0;
  for (std::size_t c = 0; c < menu.size(); ++c) {
    double sse = 0.0;
    long count = 0;
    for (int f = 0; f < folds; ++f) {
      std::vector<int> train_idx, test_idx;
      for (int i = 0; i < n; ++i)
        ((i % folds == f) ? test_idx : train_idx).push_back(perm[i]);
      auto cand = menu[c]->clone();
      cand->fit(X.select_rows(train_idx), Y.select_rows(train_idx));
      const Matrix pred = cand->predict(X.select_rows(test_idx));
      const Matrix truth = Y.select_rows(test_idx);
      for (std::size_t e = 0; e < pred.size(); ++e) {
        const double d = pred.data()[e] - truth.data()[e];
        sse += d * d;
      }
      count += static_cast<long>(pred.size());
    }
    const double rmse = std::sqrt(sse / count);
    sel.cv_rmse.emplace_back(menu[c]->name(), rmse);
    if (rmse < best) {
      best = rmse;
      best_idx = c;
    }
  }
  sel.chosen = menu[best_idx]->name();
  auto winner = std::move(menu[best_idx]);
  winner->fit(X, Y);
  return {std::move(winner), std::move(sel)};
}

}  // namespace dcm
