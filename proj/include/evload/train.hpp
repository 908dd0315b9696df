#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

#include "evload/features.hpp"
#include "evload/lstm.hpp"

namespace evload {

// Training settings. JSON keys match the field names; unknown keys are
// ignored so one config file can also carry settings for other stages.
struct TrainConfig {
  int sequence_length = 7;
  int prediction_steps = 7;
  double training_size = 0.6;
  double validation_size = 0.2;
  double test_size = 0.2;
  double learning_rate = 5e-5;
  int batch_size = 32;
  double noise_level = 0.05;
  int multiplier = 10;
  int num_epochs = 1000;
  int patience = 100;
  double delta = 0.0;
  std::uint64_t seed = 42;
  int hidden_dim = 32;
  int layer_dim = 2;
  double grad_clip_norm = 5.0;  // <= 0 disables clipping

  void validate() const;  // throws InvalidConfig
};

TrainConfig parse_train_config(std::istream& in);

// One supervised window: x holds sequence_length rows of features, y the
// prediction_steps rows that follow.
struct SequenceSample {
  Matrix x;  // sequence_length x features
  Matrix y;  // prediction_steps x features
};

// Returns the original block followed by `multiplier` noisy copies, each
// element perturbed by Gaussian noise of the given sigma. Columns bounded to
// [0, 1] (nnc, na, nm, crr, crrm) are clamped back after perturbation.
FeatureMatrix augment_with_noise(const FeatureMatrix& data, double sigma,
                                 int multiplier, std::uint64_t seed);

// Slides windows over the rows. A nonzero segment_length splits the rows
// into equal segments (augmented copies) that windows never straddle.
std::vector<SequenceSample> make_sequences(const Matrix& rows,
                                           int sequence_length,
                                           int prediction_steps,
                                           std::size_t segment_length = 0);
std::vector<SequenceSample> make_sequences(const FeatureMatrix& data,
                                           int sequence_length,
                                           int prediction_steps,
                                           std::size_t segment_length = 0);

// Augment + window with the splits the config asks for: noise seed is
// config.seed + 2, windows never straddle copy boundaries.
std::vector<SequenceSample> build_samples(const FeatureMatrix& data,
                                          const TrainConfig& config);

struct Fractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct Split {
  std::vector<SequenceSample> train, val, test;
};

// Chronological split; sizes are floored and the remainder goes to test.
// Throws EmptySplit if any part ends up empty, InvalidConfig if the
// fractions are negative or do not sum to 1.
Split split_data(std::vector<SequenceSample> samples,
                 const Fractions& fractions);

// Mean squared error over all elements; shapes must match.
double mse_loss(const Matrix& pred, const Matrix& target);

// A training batch in model layout: time-major inputs plus flattened
// step-major targets, y(b, step*F + f) = target feature f at step.
struct Batch {
  Sequence x;
  Matrix y;
};

Batch make_batch(const std::vector<SequenceSample>& samples,
                 const std::vector<std::size_t>& indices);

struct LossAndGrads {
  double loss = 0.0;
  Gradients grads;
};

// Full reverse-mode pass through the head and every layer and timestep.
// Throws NonFiniteGradient if any gradient entry is NaN or infinite.
LossAndGrads backward(const Batch& batch, const ModelParams& params);

// Scales gradients so their global L2 norm is at most max_norm; returns the
// norm before scaling. max_norm <= 0 leaves them untouched.
double clip_gradients(Gradients& grads, double max_norm);

struct AdamState {
  Gradients m, v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState init_adam(const ModelParams& params);

// Bias-corrected Adam update.
void adam_step(ModelParams& params, const Gradients& grads, AdamState& state,
               double learning_rate);

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct Checkpoint {
  ModelParams params;
  int epoch = -1;
  double val_loss = std::numeric_limits<double>::infinity();
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochStats> history;
  int stopped_epoch = 0;  // last epoch that actually ran
};

// Minibatch training with shuffled batches (shuffle seed config.seed + 1),
// validation after each epoch, and early stopping: the best-validation
// parameters are checkpointed, and training halts once `patience` epochs
// pass without the validation loss improving by more than `delta`.
TrainResult train_loop(const std::vector<SequenceSample>& samples,
                       const TrainConfig& config);

// Forecasts prediction_steps rows from the trailing window and maps the
// max-normalized channels back to physical units. Throws MissingCheckpoint
// on an empty model.
Matrix predict_future(const Matrix& tail, const ModelParams& params,
                      const NormalizationMaxima& maxima);

// Checkpoint file: model JSON wrapped with the epoch and validation loss.
void write_checkpoint_json(const Checkpoint& ckpt, std::ostream& out);
Checkpoint read_checkpoint_json(std::istream& in);

// epoch,train_loss,val_loss
void write_loss_history_csv(const std::vector<EpochStats>& history,
                            std::ostream& out);

// step,nc,da,dm,crr,crrd,crrm,crrmd,r,rm[,raw_da] with 1-based steps.
void write_forecast_csv(const Matrix& forecast, std::ostream& out);

}  // namespace evload
