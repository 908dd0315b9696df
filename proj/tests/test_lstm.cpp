#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "evload/errors.hpp"
#include "evload/lstm.hpp"
#include "evload/rng.hpp"
#include "evload/train.hpp"

using namespace evload;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Matrix scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

Sequence random_sequence(int seq_len, int batch, int dim, Rng& rng) {
  Sequence x;
  for (int t = 0; t < seq_len; ++t) {
    Matrix m(batch, dim);
    for (int b = 0; b < batch; ++b)
      for (int d = 0; d < dim; ++d) m(b, d) = rng.uniform(-1.0, 1.0);
    x.push_back(m);
  }
  return x;
}

}  // namespace

TEST_CASE("initialization shapes, bounds, forget bias") {
  const Dims dims{3, 4, 2, 2, 5};
  const ModelParams p = init_params(dims, 42);
  REQUIRE(p.layers.size() == 2);
  CHECK(p.layers[0].w_xi.rows() == 3);
  CHECK(p.layers[0].w_xi.cols() == 4);
  CHECK(p.layers[1].w_xi.rows() == 4);  // upper layers consume hidden states
  CHECK(p.layers[0].w_hf.rows() == 4);
  CHECK(p.layers[0].b_i.rows() == 1);
  CHECK(p.fc_weight.rows() == 4);
  CHECK(p.fc_weight.cols() == 10);
  CHECK(p.fc_bias.cols() == 10);

  const double bound = 1.0 / std::sqrt(4.0);
  for (const Matrix* t : tensor_list(p)) {
    if (t == &p.layers[0].b_f || t == &p.layers[1].b_f) continue;
    CHECK(t->array().abs().maxCoeff() <= bound);
  }
  CHECK((p.layers[0].b_f.array() == 1.0).all());  // forget gates start open
  CHECK((p.layers[1].b_f.array() == 1.0).all());
  CHECK((p.layers[0].b_i.array() == 0.0).all());

  const ModelParams q = init_params(dims, 42);
  bool identical = true;
  const auto pt = tensor_list(p);
  const auto qt = tensor_list(q);
  for (std::size_t i = 0; i < pt.size(); ++i) {
    identical = identical && pt[i]->cwiseEqual(*qt[i]).all();
  }
  CHECK(identical);
  const ModelParams r = init_params(dims, 43);
  CHECK_FALSE(r.layers[0].w_xi.cwiseEqual(p.layers[0].w_xi).all());

  CHECK_THROWS_AS(init_params(Dims{0, 4, 1, 1, 1}, 1), InvalidDims);
  CHECK_THROWS_AS(init_params(Dims{1, 4, 1, 1, 0}, 1), InvalidDims);
}

TEST_CASE("cell recurrence against scalar arithmetic") {
  LayerParams p;
  p.w_xi = scalar(0.5);
  p.w_hi = scalar(-0.3);
  p.b_i = scalar(0.1);
  p.w_xf = scalar(0.2);
  p.w_hf = scalar(0.4);
  p.b_f = scalar(1.0);
  p.w_xo = scalar(-0.1);
  p.w_ho = scalar(0.6);
  p.b_o = scalar(0.0);
  p.w_xc = scalar(0.7);
  p.w_hc = scalar(-0.2);
  p.b_c = scalar(0.05);

  const double x = 0.8, h_prev = 0.3, c_prev = -0.5;
  const CellOutput out =
      cell_forward(scalar(x), scalar(h_prev), scalar(c_prev), p);

  const double i = sigmoid(x * 0.5 + h_prev * -0.3 + 0.1);
  const double f = sigmoid(x * 0.2 + h_prev * 0.4 + 1.0);
  const double o = sigmoid(x * -0.1 + h_prev * 0.6 + 0.0);
  const double g = std::tanh(x * 0.7 + h_prev * -0.2 + 0.05);
  const double c = f * c_prev + i * g;
  const double h = o * std::tanh(c);
  CHECK(out.c(0, 0) == doctest::Approx(c).epsilon(1e-15));
  CHECK(out.h(0, 0) == doctest::Approx(h).epsilon(1e-15));
}

TEST_CASE("forward equals the cell recurrence plus the head") {
  const Dims dims{2, 3, 2, 2, 2};
  const ModelParams params = init_params(dims, 7);
  Rng rng(3);
  const Sequence x = random_sequence(4, 3, 2, rng);

  const ForwardResult result = forward(x, params);

  // Replay the stack one cell at a time. Layer l at time t consumes layer
  // l-1's hidden state at the same t; the head sees only the last top state.
  HiddenState state = zero_state(dims, 3);
  Matrix h_top_last;
  for (std::size_t t = 0; t < x.size(); ++t) {
    Matrix input = x[t];
    for (int l = 0; l < dims.layer_dim; ++l) {
      const CellOutput out =
          cell_forward(input, state.h[l], state.c[l], params.layers[l]);
      state.h[l] = out.h;
      state.c[l] = out.c;
      input = out.h;
    }
    h_top_last = input;
  }
  const Matrix y = (h_top_last * params.fc_weight).rowwise() +
                   params.fc_bias.row(0);

  CHECK((result.y - y).array().abs().maxCoeff() < 1e-14);
  CHECK(result.y.rows() == 3);
  CHECK(result.y.cols() == 4);
  // Final state comes back to the caller.
  CHECK((result.state.h[1] - h_top_last).array().abs().maxCoeff() < 1e-14);
}

TEST_CASE("forward validates input") {
  const Dims dims{2, 3, 1, 1, 1};
  const ModelParams params = init_params(dims, 1);
  Rng rng(1);

  Sequence wrong = random_sequence(2, 1, 3, rng);
  CHECK_THROWS_AS(forward(wrong, params), ShapeMismatch);

  Sequence nan_seq = random_sequence(2, 1, 2, rng);
  nan_seq[1](0, 0) = std::nan("");
  CHECK_THROWS_AS(forward(nan_seq, params), NonFiniteInput);

  CHECK_THROWS_AS(forward(Sequence{}, params), InvalidSize);
}

TEST_CASE("cached forward agrees with plain forward") {
  const Dims dims{3, 4, 2, 3, 2};
  const ModelParams params = init_params(dims, 11);
  Rng rng(5);
  const Sequence x = random_sequence(5, 2, 3, rng);
  const ForwardResult plain = forward(x, params);
  const ForwardCache cache = forward_cached(x, params);
  CHECK((plain.y - cache.y).array().abs().maxCoeff() == 0.0);
  REQUIRE(cache.cells.size() == 2);
  REQUIRE(cache.cells[0].size() == 5);
}

TEST_CASE("analytic gradients match finite differences") {
  const Dims dims{2, 3, 2, 2, 2};
  ModelParams params = init_params(dims, 13);
  Rng rng(17);

  Batch batch;
  batch.x = random_sequence(3, 2, 2, rng);
  batch.y = Matrix(2, dims.flat_output());
  for (Eigen::Index i = 0; i < batch.y.size(); ++i) {
    batch.y(i / batch.y.cols(), i % batch.y.cols()) = rng.uniform(-1.0, 1.0);
  }

  const LossAndGrads lg = backward(batch, params);
  CHECK(lg.loss ==
        doctest::Approx(mse_loss(forward(batch.x, params).y, batch.y))
            .epsilon(1e-12));

  const double step = 1e-5;
  auto tensors = tensor_list(static_cast<ParamTensors&>(params));
  const auto grads = tensor_list(static_cast<const ParamTensors&>(lg.grads));
  double worst = 0.0;
  for (std::size_t ti = 0; ti < tensors.size(); ++ti) {
    Matrix& t = *tensors[ti];
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      const double saved = t(i);
      t(i) = saved + step;
      const double up = mse_loss(forward(batch.x, params).y, batch.y);
      t(i) = saved - step;
      const double down = mse_loss(forward(batch.x, params).y, batch.y);
      t(i) = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = (*grads[ti])(i);
      const double rel =
          std::abs(an - fd) / std::max(1e-6, std::abs(an) + std::abs(fd));
      worst = std::max(worst, rel);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("model json round-trips every tensor bit for bit") {
  const Dims dims{4, 5, 2, 3, 2};
  const ModelParams params = init_params(dims, 99);
  std::ostringstream out;
  write_model_json(params, out);
  std::istringstream in(out.str());
  const ModelParams back = read_model_json(in);

  CHECK(back.dims.input_dim == dims.input_dim);
  CHECK(back.dims.hidden_dim == dims.hidden_dim);
  CHECK(back.dims.layer_dim == dims.layer_dim);
  CHECK(back.dims.output_dim == dims.output_dim);
  CHECK(back.dims.prediction_steps == dims.prediction_steps);
  CHECK(back.seed == 99);

  const auto a = tensor_list(params);
  const auto b = tensor_list(back);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->cwiseEqual(*b[i]).all());
  }
}
