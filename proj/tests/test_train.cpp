#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "evload/errors.hpp"
#include "evload/features.hpp"
#include "evload/train.hpp"

using namespace evload;

namespace {

constexpr double kPi = 3.141592653589793238462643383279;

// A learnable weekly-ish feature table: smooth sinusoids per column.
FeatureMatrix toy_features(int days) {
  FeatureMatrix m;
  m.maxima = {10.0, 2.0, 4.0};
  for (int t = 0; t < days; ++t) {
    m.days.push_back(
        Date{std::chrono::year{2023}, std::chrono::month{1}, std::chrono::day{1}} );
    const double phase = 2.0 * kPi * t / 7.0;
    const double base = 0.5 + 0.4 * std::sin(phase);
    m.nnc.push_back(base);
    m.na.push_back(0.5 + 0.4 * std::cos(phase));
    m.nm.push_back(base * 0.9);
    m.crr.push_back(m.nnc.back() * m.na.back());
    m.crrm.push_back(m.nnc.back() * m.nm.back());
    m.crrd.push_back(0.1);
    m.crrmd.push_back(-0.1);
    m.r.push_back(1.0);
    m.rm.push_back(1.1);
  }
  return m;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.sequence_length = 5;
  cfg.prediction_steps = 2;
  cfg.hidden_dim = 8;
  cfg.layer_dim = 1;
  cfg.batch_size = 8;
  cfg.multiplier = 1;
  cfg.num_epochs = 30;
  cfg.patience = 30;
  cfg.learning_rate = 5e-3;
  cfg.seed = 42;
  return cfg;
}

}  // namespace

TEST_CASE("config parsing and validation") {
  std::istringstream in(
      R"({"sequence_length": 10, "learning_rate": 0.001, "multiplier": 3,
          "unrelated_key": "ignored", "seed": 7})");
  const TrainConfig cfg = parse_train_config(in);
  CHECK(cfg.sequence_length == 10);
  CHECK(cfg.learning_rate == 0.001);
  CHECK(cfg.multiplier == 3);
  CHECK(cfg.seed == 7);
  CHECK(cfg.prediction_steps == 7);  // untouched default

  std::istringstream bad_type(R"({"batch_size": "four"})");
  CHECK_THROWS_AS(parse_train_config(bad_type), InvalidConfig);

  TrainConfig invalid;
  invalid.learning_rate = -1.0;
  CHECK_THROWS_AS(invalid.validate(), InvalidConfig);
  invalid = TrainConfig{};
  invalid.training_size = 0.5;  // fractions no longer sum to 1
  CHECK_THROWS_AS(invalid.validate(), InvalidConfig);
  invalid = TrainConfig{};
  invalid.multiplier = -2;
  CHECK_THROWS_AS(invalid.validate(), InvalidConfig);
}

TEST_CASE("augmentation keeps the original block and clamps bounded columns") {
  const FeatureMatrix base = toy_features(20);
  const FeatureMatrix aug = augment_with_noise(base, 0.3, 2, 5);
  REQUIRE(aug.rows() == 60);

  // Copy zero is the untouched input.
  for (int t = 0; t < 20; ++t) {
    CHECK(aug.na[t] == base.na[t]);
    CHECK(aug.crrd[t] == base.crrd[t]);
  }
  // Noisy copies differ but bounded columns stay in [0, 1].
  bool differs = false;
  for (std::size_t t = 20; t < 60; ++t) {
    differs = differs || (aug.na[t] != base.na[t % 20]);
    CHECK(aug.nnc[t] >= 0.0);
    CHECK(aug.nnc[t] <= 1.0);
    CHECK(aug.crr[t] >= 0.0);
    CHECK(aug.crr[t] <= 1.0);
  }
  CHECK(differs);

  // Same seed reproduces the same draws; a different seed does not.
  const FeatureMatrix again = augment_with_noise(base, 0.3, 2, 5);
  CHECK(again.na == aug.na);
  const FeatureMatrix other = augment_with_noise(base, 0.3, 2, 6);
  CHECK(other.na != aug.na);

  CHECK(augment_with_noise(base, 0.3, 0, 5).rows() == 20);
}

TEST_CASE("windowing produces every in-segment window") {
  Matrix rows(10, 2);
  for (int i = 0; i < 10; ++i) {
    rows(i, 0) = i;
    rows(i, 1) = 10 + i;
  }
  const auto samples = make_sequences(rows, 3, 2);
  REQUIRE(samples.size() == 6);  // 10 - 3 - 2 + 1
  CHECK(samples[0].x(0, 0) == 0.0);
  CHECK(samples[0].x(2, 0) == 2.0);
  CHECK(samples[0].y(0, 0) == 3.0);
  CHECK(samples[0].y(1, 1) == 14.0);
  CHECK(samples[5].x(0, 0) == 5.0);
  CHECK(samples[5].y(1, 0) == 9.0);
}

TEST_CASE("windows never straddle augmented copies") {
  Matrix rows(10, 1);
  for (int i = 0; i < 10; ++i) rows(i, 0) = i;
  const auto samples = make_sequences(rows, 3, 1, 5);
  // Two segments of five rows, each contributing 5 - 3 - 1 + 1 = 2 windows.
  REQUIRE(samples.size() == 4);
  CHECK(samples[0].x(0, 0) == 0.0);
  CHECK(samples[1].y(0, 0) == 4.0);   // last window of segment one
  CHECK(samples[2].x(0, 0) == 5.0);   // first window of segment two
  CHECK(samples[3].y(0, 0) == 9.0);

  CHECK_THROWS_AS(make_sequences(rows, 3, 1, 4), InvalidSize);
  CHECK_THROWS_AS(make_sequences(rows, 8, 3), SeriesTooShort);
}

TEST_CASE("chronological split floors the fractions") {
  std::vector<SequenceSample> samples(7);
  for (int i = 0; i < 7; ++i) {
    samples[i].x = Matrix::Constant(1, 1, i);
    samples[i].y = Matrix::Zero(1, 1);
  }
  const Split split = split_data(samples, {0.6, 0.2, 0.2});
  CHECK(split.train.size() == 4);  // floor(4.2)
  CHECK(split.val.size() == 1);    // floor(1.4)
  CHECK(split.test.size() == 2);   // remainder
  CHECK(split.train[0].x(0, 0) == 0.0);
  CHECK(split.val[0].x(0, 0) == 4.0);
  CHECK(split.test[0].x(0, 0) == 5.0);
  CHECK(split.test[1].x(0, 0) == 6.0);

  CHECK_THROWS_AS(split_data(std::vector<SequenceSample>(2), {0.6, 0.2, 0.2}),
                  EmptySplit);
  CHECK_THROWS_AS(split_data(samples, {0.9, 0.2, 0.2}), InvalidConfig);
}

TEST_CASE("split boundaries are exact where the product is integral") {
  std::vector<SequenceSample> samples(10);
  for (auto& s : samples) {
    s.x = Matrix::Zero(1, 1);
    s.y = Matrix::Zero(1, 1);
  }
  const Split split = split_data(samples, {0.6, 0.2, 0.2});
  CHECK(split.train.size() == 6);
  CHECK(split.val.size() == 2);
  CHECK(split.test.size() == 2);
}

TEST_CASE("mse loss") {
  Matrix a(1, 3), b(1, 3);
  a << 1.0, 2.0, 3.0;
  b << 1.0, 2.0, 4.0;
  CHECK(mse_loss(a, b) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  Matrix c(3, 1);
  CHECK_THROWS_AS(mse_loss(a, c), ShapeMismatch);
}

TEST_CASE("batches are time-major with step-major flat targets") {
  std::vector<SequenceSample> samples(2);
  samples[0].x = Matrix(2, 3);
  samples[0].x << 1, 2, 3, 4, 5, 6;
  samples[0].y = Matrix(2, 3);
  samples[0].y << 10, 11, 12, 13, 14, 15;
  samples[1].x = samples[0].x.array() + 100;
  samples[1].y = samples[0].y.array() + 100;

  const Batch batch = make_batch(samples, {0, 1});
  REQUIRE(batch.x.size() == 2);
  CHECK(batch.x[0](0, 0) == 1.0);
  CHECK(batch.x[0](1, 0) == 101.0);  // second sample, same timestep
  CHECK(batch.x[1](0, 2) == 6.0);
  // y(b, step * F + f)
  CHECK(batch.y(0, 0) == 10.0);
  CHECK(batch.y(0, 3) == 13.0);
  CHECK(batch.y(0, 5) == 15.0);
  CHECK(batch.y(1, 4) == 114.0);

  const Batch sub = make_batch(samples, {1});
  CHECK(sub.x[0].rows() == 1);
  CHECK(sub.y(0, 0) == 110.0);
}

TEST_CASE("gradient clipping rescales to the global norm") {
  const Dims dims{2, 3, 1, 2, 1};
  ModelParams params = init_params(dims, 3);
  Gradients grads = zeros_like(params);
  auto tensors = tensor_list(grads);
  for (Matrix* t : tensors) t->setConstant(1.0);
  double total = 0.0;
  for (Matrix* t : tensors) total += t->squaredNorm();
  const double norm = std::sqrt(total);

  Gradients copy = grads;
  const double reported = clip_gradients(copy, norm / 2.0);
  CHECK(reported == doctest::Approx(norm).epsilon(1e-12));
  double clipped = 0.0;
  for (Matrix* t : tensor_list(copy)) clipped += t->squaredNorm();
  CHECK(std::sqrt(clipped) == doctest::Approx(norm / 2.0).epsilon(1e-12));

  Gradients untouched = grads;
  clip_gradients(untouched, norm * 2.0);
  CHECK(tensor_list(untouched)[0]->cwiseEqual(*tensors[0]).all());

  Gradients disabled = grads;
  clip_gradients(disabled, 0.0);
  CHECK(tensor_list(disabled)[0]->cwiseEqual(*tensors[0]).all());
}

TEST_CASE("adam matches a hand-stepped scalar trace") {
  // One parameter, two steps with lr = 0.1 and gradients 0.5, -0.25.
  const Dims dims{1, 1, 1, 1, 1};
  ModelParams params = init_params(dims, 1);
  auto tensors = tensor_list(static_cast<ParamTensors&>(params));
  for (Matrix* t : tensors) t->setZero();
  params.fc_bias(0, 0) = 1.0;

  AdamState state = init_adam(params);
  Gradients grads = zeros_like(params);
  grads.fc_bias(0, 0) = 0.5;
  adam_step(params, grads, state, 0.1);
  CHECK(params.fc_bias(0, 0) == doctest::Approx(0.900000002).epsilon(1e-12));
  grads.fc_bias(0, 0) = -0.25;
  adam_step(params, grads, state, 0.1);
  CHECK(params.fc_bias(0, 0) ==
        doctest::Approx(0.8733662987078463).epsilon(1e-12));
  // Parameters with zero gradient throughout must not move.
  CHECK(params.fc_weight(0, 0) == 0.0);
}

TEST_CASE("training reduces the loss and is reproducible") {
  const FeatureMatrix data = toy_features(60);
  const TrainConfig cfg = tiny_config();
  const auto samples = build_samples(data, cfg);
  const TrainResult a = train_loop(samples, cfg);
  REQUIRE(!a.history.empty());
  CHECK(a.history.back().train_loss < a.history.front().train_loss);
  CHECK(a.best.val_loss < a.history.front().val_loss);

  const TrainResult b = train_loop(samples, cfg);
  REQUIRE(b.history.size() == a.history.size());
  bool same = true;
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    same = same && a.history[i].train_loss == b.history[i].train_loss &&
           a.history[i].val_loss == b.history[i].val_loss;
  }
  CHECK(same);
  CHECK(a.best.epoch == b.best.epoch);
}

TEST_CASE("early stopping returns the best checkpoint and halts in time") {
  const FeatureMatrix data = toy_features(60);
  TrainConfig cfg = tiny_config();
  cfg.patience = 3;
  cfg.num_epochs = 200;
  const TrainResult r = train_loop(build_samples(data, cfg), cfg);

  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  for (const EpochStats& e : r.history) {
    if (e.val_loss < best) {
      best = e.val_loss;
      best_epoch = e.epoch;
    }
  }
  CHECK(r.best.val_loss == best);
  CHECK(r.best.epoch == best_epoch);
  CHECK(r.stopped_epoch <= cfg.num_epochs);
  if (r.stopped_epoch < cfg.num_epochs) {
    // Halted by patience: exactly `patience` epochs follow the best one.
    CHECK(r.stopped_epoch == best_epoch + cfg.patience);
  }
}

TEST_CASE("checkpoints round-trip") {
  const FeatureMatrix data = toy_features(40);
  TrainConfig cfg = tiny_config();
  cfg.num_epochs = 2;
  const TrainResult r = train_loop(build_samples(data, cfg), cfg);

  std::ostringstream out;
  write_checkpoint_json(r.best, out);
  std::istringstream in(out.str());
  const Checkpoint back = read_checkpoint_json(in);
  CHECK(back.epoch == r.best.epoch);
  CHECK(back.val_loss == r.best.val_loss);
  CHECK(back.params.fc_weight.cwiseEqual(r.best.params.fc_weight).all());
  CHECK(back.params.layers[0].w_hc.cwiseEqual(r.best.params.layers[0].w_hc).all());
}

TEST_CASE("prediction denormalizes only the physical channels") {
  const FeatureMatrix data = toy_features(40);
  TrainConfig cfg = tiny_config();
  cfg.num_epochs = 1;
  const TrainResult r = train_loop(build_samples(data, cfg), cfg);

  const Matrix tail = data.to_matrix().bottomRows(cfg.sequence_length);
  const Matrix normalized =
      predict_future(tail, r.best.params, NormalizationMaxima{1.0, 1.0, 1.0});
  const Matrix scaled = predict_future(tail, r.best.params, data.maxima);
  REQUIRE(normalized.rows() == cfg.prediction_steps);
  REQUIRE(normalized.cols() == kFeatureCount);
  for (Eigen::Index s = 0; s < normalized.rows(); ++s) {
    CHECK(scaled(s, 0) == normalized(s, 0) * data.maxima.max_nc);
    CHECK(scaled(s, 1) == normalized(s, 1) * data.maxima.max_da);
    CHECK(scaled(s, 2) == normalized(s, 2) * data.maxima.max_dm);
    CHECK(scaled(s, 3) == normalized(s, 3));  // crr passes through
    CHECK(scaled(s, 7) == normalized(s, 7));
  }

  ModelParams empty;
  CHECK_THROWS_AS(predict_future(tail, empty, data.maxima),
                  MissingCheckpoint);
}

TEST_CASE("forecast csv layout") {
  Matrix forecast(1, kFeatureCount);
  forecast << 1, 2, 3, 4, 5, 6, 7, 8, 9;  // enum order nnc..rm
  std::ostringstream out;
  write_forecast_csv(forecast, out);
  CHECK(out.str() ==
        "step,nc,da,dm,crr,crrd,crrm,crrmd,r,rm\n"
        "1,1,2,3,4,6,5,7,8,9\n");  // csv order swaps crrd before crrm
}

TEST_CASE("loss history csv") {
  std::vector<EpochStats> history{{1, 0.5, 0.25}, {2, 0.125, 0.0625}};
  std::ostringstream out;
  write_loss_history_csv(history, out);
  CHECK(out.str() ==
        "epoch,train_loss,val_loss\n1,0.5,0.25\n2,0.125,0.0625\n");
}
