#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "evload/errors.hpp"
#include "evload/features.hpp"
#include "evload/lstm.hpp"
#include "evload/metrics.hpp"
#include "evload/rng.hpp"
#include "evload/train.hpp"

using namespace evload;

TEST_CASE("metric formulas against hand arithmetic") {
  // pred [1,2,3] vs target [1,2,4]: SSres = 1, SStot = 42/9, r2 = 11/14.
  const MetricReport r = compute_metrics({1.0, 2.0, 3.0}, {1.0, 2.0, 4.0});
  CHECK(r.mse == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(r.rmse == doctest::Approx(std::sqrt(1.0 / 3.0)).epsilon(1e-15));
  CHECK(r.mae == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(r.r2 == doctest::Approx(11.0 / 14.0).epsilon(1e-15));
  CHECK(r.n_points == 3);
}

TEST_CASE("perfect prediction scores r2 of one") {
  const MetricReport r = compute_metrics({1.0, 2.0, 3.0}, {1.0, 2.0, 3.0});
  CHECK(r.r2 == 1.0);
  CHECK(r.mse == 0.0);
  CHECK(r.mae == 0.0);
}

TEST_CASE("metric error cases") {
  CHECK_THROWS_AS(compute_metrics({1.0}, {1.0, 2.0}), LengthMismatch);
  CHECK_THROWS_AS(compute_metrics({}, {}), InvalidSize);
  CHECK_THROWS_AS(compute_metrics({1.0, 2.0}, {3.0, 3.0}), ZeroVariance);
}

TEST_CASE("model evaluation pools exactly the selected columns") {
  // Small real model; the oracle below re-derives the pooling by hand from
  // plain forward passes.
  const Dims dims{3, 4, 1, 3, 2};
  Checkpoint ckpt;
  ckpt.params = init_params(dims, 21);
  ckpt.epoch = 1;
  ckpt.val_loss = 0.0;

  Rng rng(33);
  std::vector<SequenceSample> test(5);
  for (auto& s : test) {
    s.x = Matrix(4, 3);
    s.y = Matrix(2, 3);
    for (Eigen::Index i = 0; i < s.x.size(); ++i)
      s.x(i % 4, i / 4) = rng.uniform();
    for (Eigen::Index i = 0; i < s.y.size(); ++i)
      s.y(i % 2, i / 2) = rng.uniform();
  }

  const std::vector<FeatureColumn> cols{FeatureColumn::Na};
  const EvalResult result = evaluate_model(ckpt, test, cols);

  std::vector<double> pred, target;
  std::vector<double> abs_sum(2, 0.0);
  for (const auto& s : test) {
    Sequence x;
    for (int t = 0; t < 4; ++t) x.push_back(s.x.row(t));
    const Matrix y = forward(x, ckpt.params).y;
    for (int step = 0; step < 2; ++step) {
      const double p = y(0, step * 3 + 1);  // na sits at column 1
      const double t = s.y(step, 1);
      pred.push_back(p);
      target.push_back(t);
      abs_sum[step] += std::abs(p - t);
    }
  }
  const MetricReport manual = compute_metrics(pred, target);
  CHECK(result.report.r2 == doctest::Approx(manual.r2).epsilon(1e-12));
  CHECK(result.report.mse == doctest::Approx(manual.mse).epsilon(1e-12));
  CHECK(result.report.mae == doctest::Approx(manual.mae).epsilon(1e-12));
  CHECK(result.report.n_points == 10);
  REQUIRE(result.step_abs_error.size() == 2);
  CHECK(result.step_abs_error[0] ==
        doctest::Approx(abs_sum[0] / 5.0).epsilon(1e-12));
  CHECK(result.step_abs_error[1] ==
        doctest::Approx(abs_sum[1] / 5.0).epsilon(1e-12));
}

TEST_CASE("evaluation over two columns doubles the pool") {
  const Dims dims{3, 4, 1, 3, 2};
  Checkpoint ckpt;
  ckpt.params = init_params(dims, 22);
  Rng rng(34);
  std::vector<SequenceSample> test(3);
  for (auto& s : test) {
    s.x = Matrix(4, 3);
    s.y = Matrix(2, 3);
    for (Eigen::Index i = 0; i < s.x.size(); ++i)
      s.x(i % 4, i / 4) = rng.uniform();
    for (Eigen::Index i = 0; i < s.y.size(); ++i)
      s.y(i % 2, i / 2) = rng.uniform();
  }
  const EvalResult result = evaluate_model(
      ckpt, test, {FeatureColumn::Nnc, FeatureColumn::Na});
  CHECK(result.report.n_points == 12);
}

TEST_CASE("metrics csv layout") {
  MetricReport r;
  r.r2 = 0.5;
  r.mse = 0.25;
  r.rmse = 0.5;
  r.mae = 0.125;
  std::ostringstream out;
  write_metrics_csv(r, 7, out);
  CHECK(out.str() == "horizon,r2,mse,rmse,mae\n7,0.5,0.25,0.5,0.125\n");

  std::ostringstream abs_out;
  write_abs_error_csv({0.5, 0.25}, abs_out);
  CHECK(abs_out.str() == "step,abs_error\n1,0.5\n2,0.25\n");
}
