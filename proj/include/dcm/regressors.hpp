#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcm/matrix.hpp"
#include "dcm/nn.hpp"
#include "dcm/rng.hpp"

namespace dcm {

/// Multi-output regressor interface for the additive-noise baseline.
class Regressor {
 public:
  virtual ~Regressor() = default;
  virtual void fit(const Matrix& X, const Matrix& Y) = 0;
  virtual Matrix predict(const Matrix& X) const = 0;
  virtual std::string name() const = 0;
  virtual nlohmann::json to_json() const = 0;
  virtual std::unique_ptr<Regressor> clone() const = 0;
  static std::unique_ptr<Regressor> from_json(const nlohmann::json& j);
};

/// Linear least squares with an unpenalized intercept and L2 penalty lambda.
class RidgeRegressor final : public Regressor {
 public:
  explicit RidgeRegressor(double lambda = 1e-6) : lambda_(lambda) {}
  void fit(const Matrix& X, const Matrix& Y) override;
  Matrix predict(const Matrix& X) const override;
  std::string name() const override { return "ridge"; }
  nlohmann::json to_json() const override;
  std::unique_ptr<Regressor> clone() const override;
  const Matrix& coefficients() const { return coef_; }
  void restore(Matrix coef, Vector intercept) {
    coef_ = std::move(coef);
    intercept_ = std::move(intercept);
  }

 private:
  double lambda_;
  Matrix coef_;      // p x q
  Vector intercept_; // q
};

/// k-nearest-neighbour mean with deterministic distance/index tie-breaking.
class KnnRegressor final : public Regressor {
 public:
  explicit KnnRegressor(int k = 5) : k_(k) {}
  void fit(const Matrix& X, const Matrix& Y) override;
  Matrix predict(const Matrix& X) const override;
  std::string name() const override { return "knn"; }
  nlohmann::json to_json() const override;
  std::unique_ptr<Regressor> clone() const override;

 private:
  int k_;
  Matrix train_x_, train_y_;
};

/// Small SiLU network trained with Adam on mean squared error.
class MlpRegressor final : public Regressor {
 public:
  struct Options {
    std::vector<int> hidden = {64, 64};
    int epochs = 120;
    int batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
  };
  explicit MlpRegressor(Options opt = {}) : opt_(std::move(opt)) {}
  void fit(const Matrix& X, const Matrix& Y) override;
  Matrix predict(const Matrix& X) const override;
  std::string name() const override { return "mlp"; }
  nlohmann::json to_json() const override;
  std::unique_ptr<Regressor> clone() const override;
  void restore(Mlp net) {
    net_ = std::move(net);
    fitted_ = true;
  }

 private:
  Options opt_;
  Mlp net_;
  bool fitted_ = false;
};

struct CvSelection {
  std::string chosen;
  std::vector<std::pair<std::string, double>> cv_rmse;  // per candidate
};

/// K-fold cross-validated RMSE selection over the fixed menu
/// (ridge, knn, mlp); the winner is refit on the full data.
std::pair<std::unique_ptr<Regressor>, CvSelection> select_regressor_cv(
    const Matrix& X, const Matrix& Y, int folds, Rng& rng,
    const MlpRegressor::Options& mlp_opt = {});

}  // namespace dcm
