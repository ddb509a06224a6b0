#pragma once

#include <map>
#include <memory>
#include <string>

#include <json.hpp>

#include "dcm/diffusion.hpp"
#include "dcm/regressors.hpp"
#include "dcm/scm.hpp"

namespace dcm {

// Common query surface so the evaluation harness can treat the learned models
// and the ground-truth oracle uniformly. Intervened nodes take their assigned
// values exactly, in every implementation.
class CausalQueryModel {
 public:
  virtual ~CausalQueryModel() = default;
  virtual const CausalGraph& graph() const = 0;
  virtual std::string name() const = 0;

  /// Observational (empty map) or interventional sampling.
  virtual Matrix sample(const InterventionMap& iv, int n, Rng& rng) const = 0;

  /// Counterfactuals from full factual observations (one per row).
  virtual Matrix counterfactual(const Matrix& factual_values, const InterventionMap& iv) const = 0;

  /// Counterfactuals when exogenous noise traces are available. Learned models
  /// ignore the traces; the oracle uses them.
  virtual Matrix counterfactual_traced(const TracedMatrix& factual,
                                       const InterventionMap& iv) const {
    return counterfactual(factual.values, iv);
  }
};

struct DcmHyperparams {
  int T = 100;
  double beta_min = 1e-4;
  double beta_max = 0.1;
  TrainOptions train;
};

/// Diffusion-based causal model: one noise-prediction network per non-root
/// node, empirical resampling for roots.
class DcmModel final : public CausalQueryModel {
 public:
  DcmModel(CausalGraph graph, std::map<int, DiffusionNodeModel> node_models,
           std::map<int, Matrix> root_empiricals, DcmHyperparams hyper = {});

  const CausalGraph& graph() const override { return graph_; }
  std::string name() const override { return "dcm"; }
  Matrix sample(const InterventionMap& iv, int n, Rng& rng) const override;
  Matrix counterfactual(const Matrix& factual_values, const InterventionMap& iv) const override;

  const DiffusionNodeModel& node_model(int node) const;
  const std::map<int, Matrix>& root_empiricals() const { return root_empiricals_; }
  const std::map<int, std::vector<double>>& loss_traces() const { return loss_traces_; }

  nlohmann::json to_json() const;
  static DcmModel from_json(const nlohmann::json& j);

  friend DcmModel fit_dcm(const Matrix& dataset, const CausalGraph& graph,
                          const DcmHyperparams& hyper, Rng& rng);

 private:
  CausalGraph graph_;
  std::map<int, DiffusionNodeModel> node_models_;  // non-root nodes
  std::map<int, Matrix> root_empiricals_;          // root training columns
  DcmHyperparams hyper_;
  std::map<int, std::vector<double>> loss_traces_;
};

/// Trains one diffusion model per non-root node on the dataset columns and
/// stores root columns for empirical resampling.
DcmModel fit_dcm(const Matrix& dataset, const CausalGraph& graph, const DcmHyperparams& hyper,
                 Rng& rng);

struct AnmOptions {
  int cv_folds = 5;
  MlpRegressor::Options mlp;
};

/// Additive-noise baseline: per-node regression with empirical residual noise.
class AnmModel final : public CausalQueryModel {
 public:
  AnmModel(CausalGraph graph, std::map<int, std::unique_ptr<Regressor>> regressors,
           std::map<int, Matrix> residuals, std::map<int, Matrix> root_empiricals,
           std::map<int, CvSelection> selections = {});

  const CausalGraph& graph() const override { return graph_; }
  std::string name() const override { return "anm"; }
  Matrix sample(const InterventionMap& iv, int n, Rng& rng) const override;
  Matrix counterfactual(const Matrix& factual_values, const InterventionMap& iv) const override;

  const Regressor& regressor(int node) const;
  const Matrix& residuals(int node) const { return residuals_.at(node); }
  const CvSelection& selection(int node) const { return selections_.at(node); }

  nlohmann::json to_json() const;
  static AnmModel from_json(const nlohmann::json& j);

 private:
  CausalGraph graph_;
  std::map<int, std::unique_ptr<Regressor>> regressors_;  // non-root
  std::map<int, Matrix> residuals_;                       // one row per training row
  std::map<int, Matrix> root_empiricals_;
  std::map<int, CvSelection> selections_;
};

AnmModel fit_anm(const Matrix& dataset, const CausalGraph& graph, Rng& rng,
                 const AnmOptions& opt = {});

/// The ground truth behind the query interface. Counterfactuals require noise
/// traces unless every mechanism supports noise inversion.
class OracleModel final : public CausalQueryModel {
 public:
  explicit OracleModel(std::shared_ptr<const GroundTruthScm> scm) : scm_(std::move(scm)) {}

  const CausalGraph& graph() const override { return scm_->graph(); }
  std::string name() const override { return "oracle"; }
  Matrix sample(const InterventionMap& iv, int n, Rng& rng) const override {
    return scm_->sample_interventional(iv, n, rng).values;
  }
  Matrix counterfactual(const Matrix& factual_values, const InterventionMap& iv) const override;
  Matrix counterfactual_traced(const TracedMatrix& factual,
                               const InterventionMap& iv) const override {
    return scm_->true_counterfactual(factual, iv);
  }
  const GroundTruthScm& scm() const { return *scm_; }

 private:
  std::shared_ptr<const GroundTruthScm> scm_;
};

}  // namespace dcm
