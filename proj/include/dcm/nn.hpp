#pragma once

#include <vector>

#include "dcm/matrix.hpp"
#include "dcm/rng.hpp"

namespace dcm {

Vector silu(const Vector& x);

/// Fully connected network: SiLU on hidden layers, identity on the output.
/// Weights are stored (fan_in x fan_out) so the forward pass is a plain GEMM.
struct Mlp {
  std::vector<int> layer_sizes;   // input, hidden..., output
  std::vector<Matrix> weights;    // weights[l]: (layer_sizes[l] x layer_sizes[l+1])
  std::vector<Vector> biases;     // biases[l]: layer_sizes[l+1]

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
};

/// Seeded init: weights uniform on [-sqrt(1/fan_in), +sqrt(1/fan_in)], zero biases.
Mlp make_mlp(const std::vector<int>& layer_sizes, Rng& rng);

Matrix mlp_apply_batch(const Mlp& net, const Matrix& input);
Vector mlp_apply(const Mlp& net, const Vector& input);

/// Pre-activations and activations of a forward pass, kept for the backward pass.
struct MlpTape {
  std::vector<Matrix> pre;   // per layer, before activation
  std::vector<Matrix> post;  // post[0] = input, post[l+1] = activation of layer l
};

Matrix mlp_forward_tape(const Mlp& net, const Matrix& input, MlpTape& tape);

struct MlpGrads {
  std::vector<Matrix> d_weights;
  std::vector<Vector> d_biases;
  Matrix d_input;
};

/// Reverse-mode gradients of sum(output .* upstream) w.r.t. parameters and input.
MlpGrads mlp_grad_batch(const Mlp& net, const MlpTape& tape, const Matrix& upstream);
MlpGrads mlp_grad(const Mlp& net, const Vector& input, const Vector& upstream);

struct AdamState {
  long step_count = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_biases, v_biases;
};

AdamState make_adam_state(const Mlp& net, double learning_rate);

/// One Adam update with bias correction. Throws on non-finite gradients.
void adam_step(AdamState& state, Mlp& net, const MlpGrads& grads);

}  // namespace dcm
