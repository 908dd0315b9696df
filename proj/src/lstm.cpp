#include "evload/lstm.hpp"

#include <cmath>
#include <istream>
#include "json.hpp"
#include <ostream>
#include <string>

#include "evload/errors.hpp"
#include "evload/rng.hpp"
#include "json_detail.hpp"

namespace evload {

namespace {

void check_dims(const Dims& d) {
  if (d.input_dim < 1 || d.hidden_dim < 1 || d.layer_dim < 1 ||
      d.output_dim < 1 || d.prediction_steps < 1) {
    throw InvalidDims("all model dimensions must be at least 1");
  }
}

Matrix sigmoid(const Matrix& z) {
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

std::vector<Matrix*> tensor_list(ParamTensors& t) {
  std::vector<Matrix*> out;
  out.reserve(t.layers.size() * 12 + 2);
  for (LayerParams& l : t.layers) {
    out.insert(out.end(), {&l.w_xi, &l.w_hi, &l.b_i, &l.w_xf, &l.w_hf, &l.b_f,
                           &l.w_xo, &l.w_ho, &l.b_o, &l.w_xc, &l.w_hc, &l.b_c});
  }
  out.push_back(&t.fc_weight);
  out.push_back(&t.fc_bias);
  return out;
}

std::vector<const Matrix*> tensor_list(const ParamTensors& t) {
  std::vector<const Matrix*> out;
  for (Matrix* m : tensor_list(const_cast<ParamTensors&>(t))) out.push_back(m);
  return out;
}

Gradients zeros_like(const ParamTensors& t) {
  Gradients g;
  g.layers.resize(t.layers.size());
  auto src = tensor_list(t);
  auto dst = tensor_list(g);
  for (std::size_t i = 0; i < src.size(); ++i) {
    *dst[i] = Matrix::Zero(src[i]->rows(), src[i]->cols());
  }
  return g;
}

HiddenState zero_state(const Dims& dims, Eigen::Index batch) {
  check_dims(dims);
  HiddenState s;
  s.h.assign(dims.layer_dim, Matrix::Zero(batch, dims.hidden_dim));
  s.c.assign(dims.layer_dim, Matrix::Zero(batch, dims.hidden_dim));
  return s;
}

ModelParams init_params(const Dims& dims, std::uint64_t seed) {
  check_dims(dims);
  ModelParams p;
  p.dims = dims;
  p.seed = seed;
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.hidden_dim));
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        m(r, c) = rng.uniform(-bound, bound);
      }
    }
    return m;
  };

  p.layers.resize(dims.layer_dim);
  for (int l = 0; l < dims.layer_dim; ++l) {
    const int in = l == 0 ? dims.input_dim : dims.hidden_dim;
    LayerParams& lp = p.layers[l];
    lp.w_xi = draw(in, dims.hidden_dim);
    lp.w_hi = draw(dims.hidden_dim, dims.hidden_dim);
    lp.w_xf = draw(in, dims.hidden_dim);
    lp.w_hf = draw(dims.hidden_dim, dims.hidden_dim);
    lp.w_xo = draw(in, dims.hidden_dim);
    lp.w_ho = draw(dims.hidden_dim, dims.hidden_dim);
    lp.w_xc = draw(in, dims.hidden_dim);
    lp.w_hc = draw(dims.hidden_dim, dims.hidden_dim);
    lp.b_i = Matrix::Zero(1, dims.hidden_dim);
    // Forget gates open at the start so gradients reach early timesteps.
    lp.b_f = Matrix::Constant(1, dims.hidden_dim, 1.0);
    lp.b_o = Matrix::Zero(1, dims.hidden_dim);
    lp.b_c = Matrix::Zero(1, dims.hidden_dim);
  }
  p.fc_weight = draw(dims.hidden_dim, dims.flat_output());
  p.fc_bias = Matrix::Zero(1, dims.flat_output());
  return p;
}

CellOutput cell_forward(const Matrix& x_t, const Matrix& h_prev,
                        const Matrix& c_prev, const LayerParams& p) {
  if (x_t.cols() != p.w_xi.rows() || h_prev.cols() != p.w_hi.rows() ||
      x_t.rows() != h_prev.rows() || h_prev.rows() != c_prev.rows() ||
      h_prev.cols() != c_prev.cols()) {
    throw ShapeMismatch("cell input shapes are inconsistent");
  }
  const Matrix i =
      sigmoid((x_t * p.w_xi + h_prev * p.w_hi).rowwise() + p.b_i.row(0));
  const Matrix f =
      sigmoid((x_t * p.w_xf + h_prev * p.w_hf).rowwise() + p.b_f.row(0));
  const Matrix o =
      sigmoid((x_t * p.w_xo + h_prev * p.w_ho).rowwise() + p.b_o.row(0));
  const Matrix g =
      ((x_t * p.w_xc + h_prev * p.w_hc).rowwise() + p.b_c.row(0))
          .array()
          .tanh()
          .matrix();
  CellOutput out;
  out.c = (f.array() * c_prev.array() + i.array() * g.array()).matrix();
  out.h = (o.array() * out.c.array().tanh()).matrix();
  return out;
}

namespace {

void check_sequence(const Sequence& x, const ModelParams& params) {
  check_dims(params.dims);
  if (static_cast<int>(params.layers.size()) != params.dims.layer_dim) {
    throw ShapeMismatch("parameter layer count disagrees with dims");
  }
  if (x.empty()) throw InvalidSize("input sequence is empty");
  const Eigen::Index batch = x[0].rows();
  for (const Matrix& step : x) {
    if (step.rows() != batch || step.cols() != params.dims.input_dim) {
      throw ShapeMismatch("sequence steps must all be batch x input_dim");
    }
    if (!step.allFinite()) {
      throw NonFiniteInput("input sequence contains NaN or infinity");
    }
  }
}

void check_state(const HiddenState& s, const Dims& dims, Eigen::Index batch) {
  if (static_cast<int>(s.h.size()) != dims.layer_dim ||
      static_cast<int>(s.c.size()) != dims.layer_dim) {
    throw ShapeMismatch("hidden state layer count disagrees with dims");
  }
  for (int l = 0; l < dims.layer_dim; ++l) {
    if (s.h[l].rows() != batch || s.h[l].cols() != dims.hidden_dim ||
        s.c[l].rows() != batch || s.c[l].cols() != dims.hidden_dim) {
      throw ShapeMismatch("hidden state must be batch x hidden per layer");
    }
  }
}

}  // namespace

ForwardResult forward(const Sequence& x, const ModelParams& params,
                      const HiddenState* initial_state) {
  check_sequence(x, params);
  const Eigen::Index batch = x[0].rows();
  HiddenState state =
      initial_state ? *initial_state : zero_state(params.dims, batch);
  if (initial_state) check_state(state, params.dims, batch);

  for (const Matrix& step : x) {
    Matrix input = step;
    for (int l = 0; l < params.dims.layer_dim; ++l) {
      CellOutput out = cell_forward(input, state.h[l], state.c[l],
                                    params.layers[l]);
      state.h[l] = std::move(out.h);
      state.c[l] = std::move(out.c);
      input = state.h[l];
    }
  }
  ForwardResult result;
  result.y = (state.h.back() * params.fc_weight).rowwise() +
             params.fc_bias.row(0);
  result.state = std::move(state);
  return result;
}

ForwardCache forward_cached(const Sequence& x, const ModelParams& params) {
  check_sequence(x, params);
  const Eigen::Index batch = x[0].rows();
  HiddenState state = zero_state(params.dims, batch);

  ForwardCache cache;
  cache.cells.resize(params.dims.layer_dim);
  for (auto& layer_cells : cache.cells) layer_cells.resize(x.size());

  for (std::size_t t = 0; t < x.size(); ++t) {
    Matrix input = x[t];
    for (int l = 0; l < params.dims.layer_dim; ++l) {
      const LayerParams& p = params.layers[l];
      CellCache& cc = cache.cells[l][t];
      cc.x = input;
      cc.h_prev = state.h[l];
      cc.c_prev = state.c[l];
      cc.i = sigmoid((cc.x * p.w_xi + cc.h_prev * p.w_hi).rowwise() +
                     p.b_i.row(0));
      cc.f = sigmoid((cc.x * p.w_xf + cc.h_prev * p.w_hf).rowwise() +
                     p.b_f.row(0));
      cc.o = sigmoid((cc.x * p.w_xo + cc.h_prev * p.w_ho).rowwise() +
                     p.b_o.row(0));
      cc.g = ((cc.x * p.w_xc + cc.h_prev * p.w_hc).rowwise() + p.b_c.row(0))
                 .array()
                 .tanh()
                 .matrix();
      cc.c = (cc.f.array() * cc.c_prev.array() + cc.i.array() * cc.g.array())
                 .matrix();
      cc.tanh_c = cc.c.array().tanh().matrix();
      cc.h = (cc.o.array() * cc.tanh_c.array()).matrix();
      state.h[l] = cc.h;
      state.c[l] = cc.c;
      input = cc.h;
    }
  }
  cache.h_top_last = state.h.back();
  cache.y =
      (cache.h_top_last * params.fc_weight).rowwise() + params.fc_bias.row(0);
  return cache;
}

namespace {

nlohmann::ordered_json matrix_to_json(const Matrix& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw MalformedHeader("checkpoint tensor is not a 2-d array");
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw MalformedHeader("checkpoint tensor rows have unequal length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

constexpr const char* kTensorNames[] = {"w_xi", "w_hi", "b_i", "w_xf",
                                        "w_hf", "b_f",  "w_xo", "w_ho",
                                        "b_o",  "w_xc", "w_hc", "b_c"};

}  // namespace

namespace detail {

nlohmann::ordered_json model_to_json(const ModelParams& params) {
  nlohmann::ordered_json j;
  j["format"] = "evload_model";
  j["version"] = 1;
  j["dims"] = {{"input_dim", params.dims.input_dim},
               {"hidden_dim", params.dims.hidden_dim},
               {"layer_dim", params.dims.layer_dim},
               {"output_dim", params.dims.output_dim},
               {"prediction_steps", params.dims.prediction_steps}};
  j["seed"] = params.seed;
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const LayerParams& l : params.layers) {
    nlohmann::ordered_json lj;
    const Matrix* tensors[] = {&l.w_xi, &l.w_hi, &l.b_i, &l.w_xf, &l.w_hf,
                               &l.b_f,  &l.w_xo, &l.w_ho, &l.b_o, &l.w_xc,
                               &l.w_hc, &l.b_c};
    for (std::size_t i = 0; i < 12; ++i) {
      lj[kTensorNames[i]] = matrix_to_json(*tensors[i]);
    }
    layers.push_back(std::move(lj));
  }
  j["layers"] = std::move(layers);
  j["fc_weight"] = matrix_to_json(params.fc_weight);
  j["fc_bias"] = matrix_to_json(params.fc_bias);
  return j;
}

ModelParams model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "evload_model" ||
        j.at("version").get<int>() != 1) {
      throw MalformedHeader("unsupported checkpoint format");
    }
    ModelParams p;
    const auto& dj = j.at("dims");
    p.dims.input_dim = dj.at("input_dim").get<int>();
    p.dims.hidden_dim = dj.at("hidden_dim").get<int>();
    p.dims.layer_dim = dj.at("layer_dim").get<int>();
    p.dims.output_dim = dj.at("output_dim").get<int>();
    p.dims.prediction_steps = dj.at("prediction_steps").get<int>();
    check_dims(p.dims);
    p.seed = j.at("seed").get<std::uint64_t>();
    const auto& layers = j.at("layers");
    if (static_cast<int>(layers.size()) != p.dims.layer_dim) {
      throw MalformedHeader("checkpoint layer count disagrees with dims");
    }
    for (const auto& lj : layers) {
      LayerParams l;
      Matrix* tensors[] = {&l.w_xi, &l.w_hi, &l.b_i, &l.w_xf, &l.w_hf, &l.b_f,
                           &l.w_xo, &l.w_ho, &l.b_o, &l.w_xc, &l.w_hc, &l.b_c};
      for (std::size_t i = 0; i < 12; ++i) {
        *tensors[i] = matrix_from_json(lj.at(kTensorNames[i]));
      }
      p.layers.push_back(std::move(l));
    }
    p.fc_weight = matrix_from_json(j.at("fc_weight"));
    p.fc_bias = matrix_from_json(j.at("fc_bias"));
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeader(std::string("incomplete checkpoint: ") + e.what());
  }
}

}  // namespace detail

void write_model_json(const ModelParams& params, std::ostream& out) {
  out << detail::model_to_json(params).dump() << '\n';
}

ModelParams read_model_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeader(std::string("unreadable checkpoint: ") + e.what());
  }
  return detail::model_from_json(j);
}

}  // namespace evload
