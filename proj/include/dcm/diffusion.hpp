#pragma once

#include <vector>

#include <json.hpp>

#include "dcm/matrix.hpp"
#include "dcm/nn.hpp"
#include "dcm/rng.hpp"

namespace dcm {

/// Linear beta schedule with cumulative products alpha_t = prod_{i<=t}(1-beta_i).
struct NoiseSchedule {
  int T = 0;
  std::vector<double> betas;   // beta_1..beta_T
  std::vector<double> alphas;  // alpha_1..alpha_T

  /// alpha_t with the alpha_0 = 1 convention.
  double alpha(int t) const { return t == 0 ? 1.0 : alphas[t - 1]; }
  double beta(int t) const { return betas[t - 1]; }
};

/// beta_t = (beta_max - beta_min) (t-1)/(T-1) + beta_min; T = 1 uses beta_min.
NoiseSchedule make_schedule(int T, double beta_min = 1e-4, double beta_max = 0.1);

/// Per-node noise-prediction model. The network input is the concatenation
/// [noisy value, parent values, t/T]; output predicts the injected noise.
struct DiffusionNodeModel {
  int node = 0;
  int dim = 0;
  int parent_dim = 0;
  Mlp net;
  NoiseSchedule schedule;

  int input_dim() const { return dim + parent_dim + 1; }
};

DiffusionNodeModel make_node_model(int node, int dim, int parent_dim,
                                   const NoiseSchedule& schedule,
                                   const std::vector<int>& hidden, Rng& rng);

struct TrainOptions {
  int epochs = 500;
  int batch_size = 64;
  double learning_rate = 1e-4;
  std::vector<int> hidden = {128, 256, 256};
};

/// Noise-regression training: per sample and epoch, draw t uniform on [1, T]
/// and eps ~ N(0, I), noise the value to sqrt(a_t) x + sqrt(1-a_t) eps, and
/// regress eps under squared error. Returns the mean loss per epoch.
/// Throws on a non-finite epoch loss.
std::vector<double> train_node(DiffusionNodeModel& model, const Matrix& node_values,
                               const Matrix& parent_values, const TrainOptions& opt, Rng& rng);

/// Deterministic forward (noising) pass of the implicit diffusion recursion;
/// returns the latent Z^T. Row-wise over a batch.
Matrix encode_batch(const DiffusionNodeModel& model, const Matrix& x, const Matrix& parents);

/// Deterministic reverse pass from latent to value; returns X^0.
Matrix decode_batch(const DiffusionNodeModel& model, const Matrix& z, const Matrix& parents);

Vector encode(const DiffusionNodeModel& model, const Vector& x, const Vector& parents);
Vector decode(const DiffusionNodeModel& model, const Vector& z, const Vector& parents);

nlohmann::json node_model_to_json(const DiffusionNodeModel& model);
DiffusionNodeModel node_model_from_json(const nlohmann::json& j);

}  // namespace dcm
