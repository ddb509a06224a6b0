#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcm/graph.hpp"
#include "dcm/matrix.hpp"
#include "dcm/nn.hpp"
#include "dcm/rng.hpp"

namespace dcm {

enum class SemKind { Nlin, Nadd };
SemKind sem_kind_from_string(const std::string& s);
std::string to_string(SemKind k);

/// do(X_i := gamma_i); values live on the normalized (dataset) scale.
using InterventionMap = std::map<int, Vector>;

/// Sample batch with the exogenous noise that produced it.
struct TracedMatrix {
  Matrix values;  // n x total_dim
  Matrix noises;  // n x total_noise_dim
};

// A structural mechanism on the raw (pre-normalization) scale. Pure: identical
// (parents, noise) give identical output.
class Mechanism {
 public:
  virtual ~Mechanism() = default;
  virtual int output_dim() const = 0;
  virtual int noise_dim() const = 0;
  virtual Vector eval(const Vector& raw_parents, const Vector& noise) const = 0;
  virtual std::string kind() const = 0;
  virtual nlohmann::json to_json() const = 0;
  virtual std::unique_ptr<Mechanism> clone() const = 0;
  /// Noise recovery for mechanisms where it is well defined (additive paths).
  virtual std::optional<Vector> invert_noise(const Vector& /*raw_value*/,
                                             const Vector& /*raw_parents*/) const {
    return std::nullopt;
  }
  static std::unique_ptr<Mechanism> from_json(const nlohmann::json& j);
};

/// Root mechanism: x = u.
class IdentityMechanism final : public Mechanism {
 public:
  explicit IdentityMechanism(int dim) : dim_(dim) {}
  int output_dim() const override { return dim_; }
  int noise_dim() const override { return dim_; }
  Vector eval(const Vector&, const Vector& noise) const override { return noise; }
  std::string kind() const override { return "identity"; }
  nlohmann::json to_json() const override;
  std::unique_ptr<Mechanism> clone() const override { return std::make_unique<IdentityMechanism>(dim_); }
  std::optional<Vector> invert_noise(const Vector& raw_value, const Vector&) const override {
    return raw_value;
  }

 private:
  int dim_;
};

/// x = W * parents + b + diag(noise_scale) * u.
class LinearMechanism final : public Mechanism {
 public:
  LinearMechanism(Matrix w, Vector b, Vector noise_scale);
  int output_dim() const override { return static_cast<int>(bias_.size()); }
  int noise_dim() const override { return static_cast<int>(noise_scale_.size()); }
  Vector eval(const Vector& raw_parents, const Vector& noise) const override;
  std::string kind() const override { return "linear"; }
  nlohmann::json to_json() const override;
  std::unique_ptr<Mechanism> clone() const override {
    return std::make_unique<LinearMechanism>(weights_, bias_, noise_scale_);
  }
  std::optional<Vector> invert_noise(const Vector& raw_value,
                                     const Vector& raw_parents) const override;
  const Matrix& weights() const { return weights_; }

 private:
  Matrix weights_;  // d x parent_dim
  Vector bias_;
  Vector noise_scale_;
};

/// The fixed scalar benchmark equations for the four small graphs.
class Table4Mechanism final : public Mechanism {
 public:
  Table4Mechanism(GraphKind graph, SemKind sem, int node);
  int output_dim() const override { return 1; }
  int noise_dim() const override { return 1; }
  Vector eval(const Vector& raw_parents, const Vector& noise) const override;
  std::string kind() const override { return "table4"; }
  nlohmann::json to_json() const override;
  std::unique_ptr<Mechanism> clone() const override {
    return std::make_unique<Table4Mechanism>(graph_, sem_, node_);
  }
  std::optional<Vector> invert_noise(const Vector& raw_value,
                                     const Vector& raw_parents) const override;

 private:
  double additive_base(const Vector& p) const;  // NLIN only
  double additive_coef() const;                 // NLIN only
  GraphKind graph_;
  SemKind sem_;
  int node_;  // 0-based
};

/// x = f(parents) + noise_scale * u, f a random single-hidden-layer network.
class MlpAdditiveMechanism final : public Mechanism {
 public:
  MlpAdditiveMechanism(Mlp net, double noise_scale) : net_(std::move(net)), noise_scale_(noise_scale) {}
  int output_dim() const override { return net_.output_dim(); }
  int noise_dim() const override { return net_.output_dim(); }
  Vector eval(const Vector& raw_parents, const Vector& noise) const override;
  std::string kind() const override { return "mlp_additive"; }
  nlohmann::json to_json() const override;
  std::unique_ptr<Mechanism> clone() const override {
    return std::make_unique<MlpAdditiveMechanism>(net_, noise_scale_);
  }
  std::optional<Vector> invert_noise(const Vector& raw_value,
                                     const Vector& raw_parents) const override;
  double noise_scale() const { return noise_scale_; }
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
  double noise_scale_;
};

/// x = f([parents, noise_input_scale * u]), noise entering the network.
class MlpNonadditiveMechanism final : public Mechanism {
 public:
  MlpNonadditiveMechanism(Mlp net, int out_dim, double noise_input_scale)
      : net_(std::move(net)), out_dim_(out_dim), noise_input_scale_(noise_input_scale) {}
  int output_dim() const override { return out_dim_; }
  int noise_dim() const override { return out_dim_; }
  Vector eval(const Vector& raw_parents, const Vector& noise) const override;
  std::string kind() const override { return "mlp_nonadditive"; }
  nlohmann::json to_json() const override;
  std::unique_ptr<Mechanism> clone() const override {
    return std::make_unique<MlpNonadditiveMechanism>(net_, out_dim_, noise_input_scale_);
  }
  double noise_input_scale() const { return noise_input_scale_; }

 private:
  Mlp net_;
  int out_dim_;
  double noise_input_scale_;
};

/// Arbitrary callable for tests and theory scenarios. Not persistable.
class CallableMechanism final : public Mechanism {
 public:
  using Fn = std::function<Vector(const Vector&, const Vector&)>;
  CallableMechanism(int out_dim, int noise_dim, Fn fn)
      : out_dim_(out_dim), noise_dim_(noise_dim), fn_(std::move(fn)) {}
  int output_dim() const override { return out_dim_; }
  int noise_dim() const override { return noise_dim_; }
  Vector eval(const Vector& raw_parents, const Vector& noise) const override {
    return fn_(raw_parents, noise);
  }
  std::string kind() const override { return "callable"; }
  nlohmann::json to_json() const override { throw Error("callable mechanism is not persistable"); }
  std::unique_ptr<Mechanism> clone() const override {
    return std::make_unique<CallableMechanism>(out_dim_, noise_dim_, fn_);
  }

 private:
  int out_dim_;
  int noise_dim_;
  Fn fn_;
};

struct StructuralEquation {
  int node = 0;
  std::unique_ptr<Mechanism> mechanism;
  Vector shift;  // output normalization: x = (raw - shift) / scale
  Vector scale;

  StructuralEquation() = default;
  StructuralEquation(int n, std::unique_ptr<Mechanism> m);
  StructuralEquation(const StructuralEquation& o);
  StructuralEquation& operator=(const StructuralEquation& o);
  StructuralEquation(StructuralEquation&&) = default;
  StructuralEquation& operator=(StructuralEquation&&) = default;
};

/// Ground-truth SCM with explicit mechanisms, standard-normal exogenous noise,
/// and frozen per-node normalization. Immutable after construction; all
/// sampling draws from an explicit per-call generator.
class GroundTruthScm {
 public:
  GroundTruthScm(CausalGraph graph, std::vector<StructuralEquation> equations);

  const CausalGraph& graph() const { return graph_; }
  const StructuralEquation& equation(int node) const { return equations_[node]; }
  StructuralEquation& equation(int node) { return equations_[node]; }

  int noise_dim(int node) const { return equations_[node].mechanism->noise_dim(); }
  int noise_offset(int node) const { return noise_offsets_[node]; }
  int total_noise_dim() const { return noise_offsets_[graph_.num_nodes()]; }

  /// Normalized node value from normalized parents and exogenous noise.
  Vector eval_node(int node, const Vector& normalized_parents, const Vector& noise) const;

  Vector gather_parents(int node, const double* row_values) const;

  TracedMatrix sample_observational(int n, Rng& rng) const;
  TracedMatrix sample_interventional(const InterventionMap& iv, int n, Rng& rng) const;

  Matrix true_counterfactual(const TracedMatrix& factual, const InterventionMap& iv) const;
  Vector true_counterfactual_row(const Vector& values, const Vector& noises,
                                 const InterventionMap& iv) const;

  /// Recovers exogenous noise from a full observation when every non-root
  /// mechanism supports inversion.
  std::optional<Vector> abduct_noise_row(const Vector& values) const;

  void validate_interventions(const InterventionMap& iv) const;

  nlohmann::json to_json() const;
  static GroundTruthScm from_json(const nlohmann::json& j);

 private:
  CausalGraph graph_;
  std::vector<StructuralEquation> equations_;
  std::vector<int> noise_offsets_;
};

/// Estimates per-node normalization constants (10,000-sample Monte Carlo by
/// default) in topological order and freezes them. Roots keep identity.
void estimate_normalization(GroundTruthScm& scm, Rng& rng, int n = 10000);

/// The exact small-graph benchmark equations, normalized.
GroundTruthScm fixed_scm(GraphKind kind, SemKind sem, Rng& rng, bool normalize = true);

struct BenchmarkScmOptions {
  int hidden_units = 16;
  int calib_samples = 10000;
  int noise_grid = 200;       // nonadditive ratio estimation: noise draws
  int parent_samples = 500;   // nonadditive ratio estimation: parent draws per noise
  int signal_samples = 4000;  // additive ratio estimation
  double ratio_lo = 0.05;
  double ratio_hi = 0.5;
  double ratio_mid = 0.2;
  int max_weight_redraws = 20;
  int max_scale_iters = 30;
};

/// Random single-hidden-layer structural equations with the noise path scaled
/// so the noise-to-signal variance ratio lands in [ratio_lo, ratio_hi]; every
/// node normalized to unit variance.
GroundTruthScm build_benchmark_scm(GraphKind kind, SemKind sem, Rng& rng,
                                   const BenchmarkScmOptions& opt = {});

/// Linear-additive SCM with random coefficients, calibrated and normalized.
GroundTruthScm linear_benchmark_scm(const CausalGraph& graph, Rng& rng);

/// Monte-Carlo noise-to-signal variance ratio of one node's mechanism
/// (additive: Var[f2(U)]/Var[f1(X_pa)]; nonadditive via the law of total
/// variance). Used by calibration and by the verification tests.
double estimate_variance_ratio(const GroundTruthScm& scm, int node, SemKind sem, Rng& rng,
                               const BenchmarkScmOptions& opt = {});

}  // namespace dcm
