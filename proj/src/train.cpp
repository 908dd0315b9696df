#include "evload/train.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include "json.hpp"
#include <ostream>
#include <string>

#include "evload/errors.hpp"
#include "evload/format.hpp"
#include "evload/rng.hpp"
#include "json_detail.hpp"

namespace evload {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw InvalidConfig(what);
  };
  require(sequence_length >= 1, "sequence_length must be at least 1");
  require(prediction_steps >= 1, "prediction_steps must be at least 1");
  require(training_size >= 0.0 && validation_size >= 0.0 && test_size >= 0.0,
          "split fractions must be non-negative");
  require(std::abs(training_size + validation_size + test_size - 1.0) <= 1e-9,
          "split fractions must sum to 1");
  require(learning_rate >= 0.0, "learning_rate must be non-negative");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(noise_level >= 0.0, "noise_level must be non-negative");
  require(multiplier >= 0, "multiplier must be non-negative");
  require(num_epochs >= 1, "num_epochs must be at least 1");
  require(patience >= 1, "patience must be at least 1");
  require(delta >= 0.0, "delta must be non-negative");
  require(hidden_dim >= 1, "hidden_dim must be at least 1");
  require(layer_dim >= 1, "layer_dim must be at least 1");
}

TrainConfig parse_train_config(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("unparseable config: ") + e.what());
  }
  if (!j.is_object()) throw InvalidConfig("config root must be a JSON object");

  TrainConfig c;
  auto read_int = [&](const char* key, int& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer()) {
      throw InvalidConfig(std::string(key) + " must be an integer");
    }
    dst = j[key].get<int>();
  };
  auto read_double = [&](const char* key, double& dst) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) {
      throw InvalidConfig(std::string(key) + " must be a number");
    }
    dst = j[key].get<double>();
  };
  read_int("sequence_length", c.sequence_length);
  read_int("prediction_steps", c.prediction_steps);
  read_double("training_size", c.training_size);
  read_double("validation_size", c.validation_size);
  read_double("test_size", c.test_size);
  read_double("learning_rate", c.learning_rate);
  read_int("batch_size", c.batch_size);
  read_double("noise_level", c.noise_level);
  read_int("multiplier", c.multiplier);
  read_int("num_epochs", c.num_epochs);
  read_int("patience", c.patience);
  read_double("delta", c.delta);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) {
      throw InvalidConfig("seed must be an integer");
    }
    c.seed = j["seed"].get<std::uint64_t>();
  }
  read_int("hidden_dim", c.hidden_dim);
  read_int("layer_dim", c.layer_dim);
  read_double("grad_clip_norm", c.grad_clip_norm);
  c.validate();
  return c;
}

FeatureMatrix augment_with_noise(const FeatureMatrix& data, double sigma,
                                 int multiplier, std::uint64_t seed) {
  if (multiplier < 0) throw InvalidSize("multiplier must be non-negative");
  if (sigma < 0.0) throw InvalidConfig("noise sigma must be non-negative");
  if (data.rows() == 0) throw EmptySeries("cannot augment an empty matrix");

  FeatureMatrix out;
  out.maxima = data.maxima;
  out.warnings = data.warnings;
  if (data.raw_da) out.raw_da.emplace();

  const std::size_t n = data.rows();
  const std::size_t total = n * static_cast<std::size_t>(multiplier + 1);
  out.days.reserve(total);
  for (int c = 0; c < kFeatureCount; ++c) {
    out.column(static_cast<FeatureColumn>(c)).reserve(total);
  }

  // Copy 0 is the untouched original.
  out.days = data.days;
  for (int c = 0; c < kFeatureCount; ++c) {
    out.column(static_cast<FeatureColumn>(c)) =
        data.column(static_cast<FeatureColumn>(c));
  }
  if (data.raw_da) *out.raw_da = *data.raw_da;

  // Only the columns bounded to [0,1] get clamped after perturbation.
  auto bounded = [](int c) { return c <= static_cast<int>(FeatureColumn::CrrM); };

  Rng rng(seed);
  for (int copy = 0; copy < multiplier; ++copy) {
    for (std::size_t i = 0; i < n; ++i) {
      out.days.push_back(data.days[i]);
      for (int c = 0; c < kFeatureCount; ++c) {
        const auto col = static_cast<FeatureColumn>(c);
        double v = data.column(col)[i] + rng.gaussian(sigma);
        if (bounded(c)) v = std::clamp(v, 0.0, 1.0);
        out.column(col).push_back(v);
      }
      if (data.raw_da) {
        out.raw_da->push_back((*data.raw_da)[i] + rng.gaussian(sigma));
      }
    }
  }
  return out;
}

std::vector<SequenceSample> make_sequences(const Matrix& rows,
                                           int sequence_length,
                                           int prediction_steps,
                                           std::size_t segment_length) {
  if (sequence_length < 1 || prediction_steps < 1) {
    throw InvalidSize("window lengths must be at least 1");
  }
  const std::size_t n = static_cast<std::size_t>(rows.rows());
  if (segment_length == 0) segment_length = n;
  if (segment_length == 0 || n % segment_length != 0) {
    throw InvalidSize("rows must divide into equal segments");
  }
  const std::size_t need =
      static_cast<std::size_t>(sequence_length) + prediction_steps;
  if (segment_length < need) {
    throw SeriesTooShort("segment of " + std::to_string(segment_length) +
                         " rows cannot fit a window of " +
                         std::to_string(need));
  }
  std::vector<SequenceSample> samples;
  samples.reserve((segment_length - need + 1) * (n / segment_length));
  for (std::size_t base = 0; base < n; base += segment_length) {
    const std::size_t last_start = segment_length - need;
    for (std::size_t off = 0; off <= last_start; ++off) {
      SequenceSample s;
      s.x = rows.middleRows(static_cast<Eigen::Index>(base + off),
                            sequence_length);
      s.y = rows.middleRows(
          static_cast<Eigen::Index>(base + off + sequence_length),
          prediction_steps);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

std::vector<SequenceSample> make_sequences(const FeatureMatrix& data,
                                           int sequence_length,
                                           int prediction_steps,
                                           std::size_t segment_length) {
  return make_sequences(data.to_matrix(), sequence_length, prediction_steps,
                        segment_length);
}

std::vector<SequenceSample> build_samples(const FeatureMatrix& data,
                                          const TrainConfig& config) {
  config.validate();
  const FeatureMatrix augmented = augment_with_noise(
      data, config.noise_level, config.multiplier, config.seed + 2);
  return make_sequences(augmented, config.sequence_length,
                        config.prediction_steps, data.rows());
}

Split split_data(std::vector<SequenceSample> samples,
                 const Fractions& fractions) {
  if (fractions.train < 0.0 || fractions.val < 0.0 || fractions.test < 0.0) {
    throw InvalidConfig("split fractions must be non-negative");
  }
  if (std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw InvalidConfig("split fractions must sum to 1");
  }
  const std::size_t n = samples.size();
  // The small nudge keeps exact products like 10 * 0.6 from flooring down.
  const auto part = [n](double f) {
    return static_cast<std::size_t>(
        std::floor(f * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_train = part(fractions.train);
  const std::size_t n_val = part(fractions.val);
  if (n_train + n_val > n) {
    throw InvalidConfig("split fractions overflow the sample count");
  }
  const std::size_t n_test = n - n_train - n_val;
  if (n_train == 0 || n_val == 0 || n_test == 0) {
    throw EmptySplit("split of " + std::to_string(n) +
                     " samples leaves an empty part");
  }
  Split split;
  split.train.assign(samples.begin(), samples.begin() + n_train);
  split.val.assign(samples.begin() + n_train,
                   samples.begin() + n_train + n_val);
  split.test.assign(samples.begin() + n_train + n_val, samples.end());
  return split;
}

double mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeMismatch("prediction and target shapes differ");
  }
  if (pred.size() == 0) throw InvalidSize("loss over zero elements");
  return (pred - target).array().square().sum() /
         static_cast<double>(pred.size());
}

Batch make_batch(const std::vector<SequenceSample>& samples,
                 const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw InvalidSize("batch needs at least one sample");
  const Eigen::Index s = samples[indices[0]].x.rows();
  const Eigen::Index f = samples[indices[0]].x.cols();
  const Eigen::Index h = samples[indices[0]].y.rows();
  const auto b = static_cast<Eigen::Index>(indices.size());

  Batch batch;
  batch.x.assign(s, Matrix(b, f));
  batch.y.resize(b, h * f);
  for (Eigen::Index row = 0; row < b; ++row) {
    const SequenceSample& sample = samples[indices[row]];
    if (sample.x.rows() != s || sample.x.cols() != f || sample.y.rows() != h ||
        sample.y.cols() != f) {
      throw ShapeMismatch("samples in a batch must share shapes");
    }
    for (Eigen::Index t = 0; t < s; ++t) {
      batch.x[t].row(row) = sample.x.row(t);
    }
    for (Eigen::Index step = 0; step < h; ++step) {
      for (Eigen::Index col = 0; col < f; ++col) {
        batch.y(row, step * f + col) = sample.y(step, col);
      }
    }
  }
  return batch;
}

LossAndGrads backward(const Batch& batch, const ModelParams& params) {
  const ForwardCache cache = forward_cached(batch.x, params);
  if (batch.y.rows() != cache.y.rows() || batch.y.cols() != cache.y.cols()) {
    throw ShapeMismatch("target shape disagrees with model output");
  }

  LossAndGrads result;
  result.loss = mse_loss(cache.y, batch.y);
  result.grads = zeros_like(params);
  Gradients& g = result.grads;

  const auto T = static_cast<int>(batch.x.size());
  const Eigen::Index b = batch.y.rows();
  const int layers = params.dims.layer_dim;
  const int hidden = params.dims.hidden_dim;

  // d(loss)/d(pred) for a mean over every element.
  const Matrix dy =
      2.0 * (cache.y - batch.y) / static_cast<double>(batch.y.size());
  g.fc_weight = cache.h_top_last.transpose() * dy;
  g.fc_bias = dy.colwise().sum();

  // Gradient flowing into each timestep's hidden output from above. The top
  // layer only receives a signal at the last step, through the head.
  std::vector<Matrix> dh_above(T, Matrix::Zero(b, hidden));
  dh_above[T - 1] = dy * params.fc_weight.transpose();

  for (int l = layers - 1; l >= 0; --l) {
    const LayerParams& p = params.layers[l];
    LayerParams& gl = g.layers[l];
    const Eigen::Index in_dim = p.w_xi.rows();
    std::vector<Matrix> dx_below;
    if (l > 0) dx_below.assign(T, Matrix(b, in_dim));

    Matrix dh_next = Matrix::Zero(b, hidden);
    Matrix dc_next = Matrix::Zero(b, hidden);
    for (int t = T - 1; t >= 0; --t) {
      const CellCache& cc = cache.cells[l][t];
      const Matrix dh = dh_above[t] + dh_next;
      const Matrix dc =
          (dc_next.array() +
           dh.array() * cc.o.array() * (1.0 - cc.tanh_c.array().square()))
              .matrix();
      const Matrix dpre_o =
          (dh.array() * cc.tanh_c.array() * cc.o.array() * (1.0 - cc.o.array()))
              .matrix();
      const Matrix dpre_f = (dc.array() * cc.c_prev.array() * cc.f.array() *
                             (1.0 - cc.f.array()))
                                .matrix();
      const Matrix dpre_i =
          (dc.array() * cc.g.array() * cc.i.array() * (1.0 - cc.i.array()))
              .matrix();
      const Matrix dpre_g =
          (dc.array() * cc.i.array() * (1.0 - cc.g.array().square())).matrix();

      gl.w_xi += cc.x.transpose() * dpre_i;
      gl.w_hi += cc.h_prev.transpose() * dpre_i;
      gl.b_i += dpre_i.colwise().sum();
      gl.w_xf += cc.x.transpose() * dpre_f;
      gl.w_hf += cc.h_prev.transpose() * dpre_f;
      gl.b_f += dpre_f.colwise().sum();
      gl.w_xo += cc.x.transpose() * dpre_o;
      gl.w_ho += cc.h_prev.transpose() * dpre_o;
      gl.b_o += dpre_o.colwise().sum();
      gl.w_xc += cc.x.transpose() * dpre_g;
      gl.w_hc += cc.h_prev.transpose() * dpre_g;
      gl.b_c += dpre_g.colwise().sum();

      dh_next = dpre_i * p.w_hi.transpose() + dpre_f * p.w_hf.transpose() +
                dpre_o * p.w_ho.transpose() + dpre_g * p.w_hc.transpose();
      dc_next = (dc.array() * cc.f.array()).matrix();
      if (l > 0) {
        dx_below[t] = dpre_i * p.w_xi.transpose() +
                      dpre_f * p.w_xf.transpose() +
                      dpre_o * p.w_xo.transpose() + dpre_g * p.w_xc.transpose();
      }
    }
    if (l > 0) dh_above = std::move(dx_below);
  }

  for (const Matrix* t : tensor_list(g)) {
    if (!t->allFinite()) {
      throw NonFiniteGradient("gradient contains NaN or infinity");
    }
  }
  return result;
}

double clip_gradients(Gradients& grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix* t : tensor_list(grads)) sq += t->squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Matrix* t : tensor_list(grads)) *t *= scale;
  }
  return norm;
}

AdamState init_adam(const ModelParams& params) {
  AdamState state;
  state.m = zeros_like(params);
  state.v = zeros_like(params);
  return state;
}

void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               double learning_rate) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step);
  auto ps = tensor_list(static_cast<ParamTensors&>(params));
  auto gs = tensor_list(grads);
  auto ms = tensor_list(state.m);
  auto vs = tensor_list(state.v);
  if (gs.size() != ps.size()) {
    throw ShapeMismatch("gradient tensor count disagrees with parameters");
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    Matrix& p = *ps[i];
    const Matrix& gr = *gs[i];
    Matrix& m = *ms[i];
    Matrix& v = *vs[i];
    if (gr.rows() != p.rows() || gr.cols() != p.cols()) {
      throw ShapeMismatch("gradient tensor shape disagrees with parameters");
    }
    m = state.beta1 * m + (1.0 - state.beta1) * gr;
    v = (state.beta2 * v.array() + (1.0 - state.beta2) * gr.array().square())
            .matrix();
    const auto m_hat = m.array() / bc1;
    const auto v_hat = v.array() / bc2;
    p.array() -= learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
  }
}

namespace {

// Pooled MSE of the model over samples, evaluated in chunks.
double dataset_loss(const std::vector<SequenceSample>& samples,
                    const ModelParams& params) {
  constexpr std::size_t kChunk = 256;
  double sse = 0.0;
  std::size_t elements = 0;
  std::vector<std::size_t> idx;
  for (std::size_t base = 0; base < samples.size(); base += kChunk) {
    const std::size_t end = std::min(samples.size(), base + kChunk);
    idx.clear();
    for (std::size_t i = base; i < end; ++i) idx.push_back(i);
    const Batch batch = make_batch(samples, idx);
    const ForwardResult out = forward(batch.x, params);
    sse += (out.y - batch.y).array().square().sum();
    elements += static_cast<std::size_t>(batch.y.size());
  }
  return sse / static_cast<double>(elements);
}

}  // namespace

TrainResult train_loop(const std::vector<SequenceSample>& samples,
                       const TrainConfig& config) {
  config.validate();
  if (samples.empty()) throw EmptySplit("no samples to train on");
  const Eigen::Index f = samples[0].x.cols();
  for (const SequenceSample& s : samples) {
    if (s.x.rows() != config.sequence_length || s.x.cols() != f ||
        s.y.rows() != config.prediction_steps || s.y.cols() != f) {
      throw ShapeMismatch("sample shapes disagree with the config");
    }
  }

  Split split = split_data(
      samples,
      {config.training_size, config.validation_size, config.test_size});

  Dims dims;
  dims.input_dim = static_cast<int>(f);
  dims.hidden_dim = config.hidden_dim;
  dims.layer_dim = config.layer_dim;
  dims.output_dim = static_cast<int>(f);
  dims.prediction_steps = config.prediction_steps;

  ModelParams params = init_params(dims, config.seed);
  AdamState adam = init_adam(params);
  Rng shuffle_rng(config.seed + 1);

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  std::vector<std::size_t> order(split.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.num_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    std::vector<std::size_t> idx;
    for (std::size_t base = 0; base < order.size();
         base += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), base + static_cast<std::size_t>(config.batch_size));
      idx.assign(order.begin() + base, order.begin() + end);
      LossAndGrads lg = backward(make_batch(split.train, idx), params);
      clip_gradients(lg.grads, config.grad_clip_norm);
      adam_step(params, lg.grads, adam, config.learning_rate);
      loss_sum += lg.loss * static_cast<double>(idx.size());
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());
    const double val_loss = dataset_loss(split.val, params);
    result.history.push_back({epoch, train_loss, val_loss});
    result.stopped_epoch = epoch;

    if (val_loss < best - config.delta) {
      best = val_loss;
      result.best.params = params;
      result.best.epoch = epoch;
      result.best.val_loss = val_loss;
      bad_epochs = 0;
    } else {
      ++bad_epochs;
      if (bad_epochs >= config.patience) break;
    }
  }
  if (result.best.epoch < 0) {
    throw MissingCheckpoint("training never reached a finite validation loss");
  }
  return result;
}

Matrix predict_future(const Matrix& tail, const ModelParams& params,
                      const NormalizationMaxima& maxima) {
  if (params.layers.empty()) {
    throw MissingCheckpoint("model has no parameters");
  }
  if (tail.rows() < 1 || tail.cols() != params.dims.input_dim) {
    throw ShapeMismatch("input window must be rows x input_dim");
  }
  Sequence seq;
  seq.reserve(static_cast<std::size_t>(tail.rows()));
  for (Eigen::Index t = 0; t < tail.rows(); ++t) {
    seq.push_back(tail.row(t));
  }
  const ForwardResult out = forward(seq, params);

  const int f = params.dims.output_dim;
  const int steps = params.dims.prediction_steps;
  Matrix forecast(steps, f);
  for (int step = 0; step < steps; ++step) {
    for (int col = 0; col < f; ++col) {
      double v = out.y(0, step * f + col);
      if (col < kFeatureCount) {
        v = denormalize_value(static_cast<FeatureColumn>(col), v, maxima);
      }
      forecast(step, col) = v;
    }
  }
  return forecast;
}

void write_checkpoint_json(const Checkpoint& ckpt, std::ostream& out) {
  nlohmann::ordered_json j;
  j["format"] = "evload_checkpoint";
  j["version"] = 1;
  j["epoch"] = ckpt.epoch;
  j["val_loss"] = ckpt.val_loss;
  j["model"] = detail::model_to_json(ckpt.params);
  out << j.dump() << '\n';
}

Checkpoint read_checkpoint_json(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeader(std::string("unreadable checkpoint: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "evload_checkpoint" ||
        j.at("version").get<int>() != 1) {
      throw MalformedHeader("unsupported checkpoint format");
    }
    Checkpoint ckpt;
    ckpt.epoch = j.at("epoch").get<int>();
    ckpt.val_loss = j.at("val_loss").get<double>();
    ckpt.params = detail::model_from_json(j.at("model"));
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeader(std::string("incomplete checkpoint: ") + e.what());
  }
}

void write_loss_history_csv(const std::vector<EpochStats>& history,
                            std::ostream& out) {
  out << "epoch,train_loss,val_loss\n";
  for (const EpochStats& e : history) {
    out << e.epoch << ',' << format_double(e.train_loss) << ','
        << format_double(e.val_loss) << '\n';
  }
}

void write_forecast_csv(const Matrix& forecast, std::ostream& out) {
  if (forecast.cols() != kFeatureCount && forecast.cols() != kFeatureCount + 1) {
    throw ShapeMismatch("forecast must have one column per feature");
  }
  // Physical-unit names for the denormalized channels, file column order.
  out << "step,nc,da,dm,crr,crrd,crrm,crrmd,r,rm";
  if (forecast.cols() == kFeatureCount + 1) out << ",raw_da";
  out << '\n';
  constexpr int kOrder[] = {0, 1, 2, 3, 5, 4, 6, 7, 8};
  for (Eigen::Index step = 0; step < forecast.rows(); ++step) {
    out << (step + 1);
    for (int c : kOrder) out << ',' << format_double(forecast(step, c));
    if (forecast.cols() == kFeatureCount + 1) {
      out << ',' << format_double(forecast(step, kFeatureCount));
    }
    out << '\n';
  }
}

}  // namespace evload
