#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace evload {

using Matrix = Eigen::MatrixXd;

struct Dims {
  int input_dim = 0;
  int hidden_dim = 0;
  int layer_dim = 0;   // stacked recurrent layers
  int output_dim = 0;  // features emitted per forecast step
  int prediction_steps = 0;

  int flat_output() const { return output_dim * prediction_steps; }
};

// Gate parameters of one recurrent layer. Input-to-hidden matrices are
// in_dim x hidden, hidden-to-hidden are hidden x hidden, biases are stored as
// 1 x hidden so every tensor shares one matrix type.
struct LayerParams {
  Matrix w_xi, w_hi, b_i;
  Matrix w_xf, w_hf, b_f;
  Matrix w_xo, w_ho, b_o;
  Matrix w_xc, w_hc, b_c;
};

// Shared tensor layout for parameters, gradients, and optimizer moments.
struct ParamTensors {
  std::vector<LayerParams> layers;
  Matrix fc_weight;  // hidden x (output_dim * prediction_steps)
  Matrix fc_bias;    // 1 x (output_dim * prediction_steps)
};

using Gradients = ParamTensors;

struct ModelParams : ParamTensors {
  Dims dims;
  std::uint64_t seed = 0;
};

// Stable traversal order over every tensor; zips params with gradients and
// moments during optimization.
std::vector<Matrix*> tensor_list(ParamTensors& t);
std::vector<const Matrix*> tensor_list(const ParamTensors& t);

Gradients zeros_like(const ParamTensors& t);

// Per-layer hidden and cell state, each batch x hidden.
struct HiddenState {
  std::vector<Matrix> h, c;
};

HiddenState zero_state(const Dims& dims, Eigen::Index batch);

// Weights drawn uniformly from [-1/sqrt(hidden), 1/sqrt(hidden)] in a fixed
// traversal order; forget-gate biases start at 1, the rest at 0. Throws
// InvalidDims when any dimension is below 1.
ModelParams init_params(const Dims& dims, std::uint64_t seed);

struct CellOutput {
  Matrix h, c;
};

// One recurrent step: gates i, f, o from sigmoid pre-activations, candidate g
// from tanh, then c = f.*c_prev + i.*g and h = o.*tanh(c).
CellOutput cell_forward(const Matrix& x_t, const Matrix& h_prev,
                        const Matrix& c_prev, const LayerParams& p);

// Time-major input: seq_len entries of batch x input_dim.
using Sequence = std::vector<Matrix>;

struct ForwardResult {
  // batch x (prediction_steps * output_dim); element (b, s*output_dim + f)
  // is feature f of forecast step s.
  Matrix y;
  HiddenState state;
};

// Runs the stack over the sequence and applies the head to the last
// timestep's top-layer hidden state. A null initial state means zeros.
// Throws ShapeMismatch on inconsistent shapes and NonFiniteInput when the
// input contains NaN or infinity.
ForwardResult forward(const Sequence& x, const ModelParams& params,
                      const HiddenState* initial_state = nullptr);

// Intermediate values of one cell evaluation, retained for the backward pass.
struct CellCache {
  Matrix x, h_prev, c_prev;
  Matrix i, f, o, g;
  Matrix c, tanh_c, h;
};

struct ForwardCache {
  std::vector<std::vector<CellCache>> cells;  // [layer][t]
  Matrix h_top_last;
  Matrix y;
};

ForwardCache forward_cached(const Sequence& x, const ModelParams& params);

// Versioned JSON checkpoint holding dims, seed, and every tensor.
void write_model_json(const ModelParams& params, std::ostream& out);
ModelParams read_model_json(std::istream& in);

}  // namespace evload
