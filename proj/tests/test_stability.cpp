#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "scoresel/error.hpp"
#include "scoresel/stability.hpp"
#include "scoresel/synth.hpp"
#include "test_util.hpp"

using namespace scoresel;

namespace {

struct Fixture {
  Dataset raw;
  Dataset ds;
  SplitSpec split;
};

Fixture planted(std::size_t n) {
  SynthSpec spec;
  spec.n = n;
  Fixture f;
  f.raw = make_planted(spec).data;
  f.split = scoresel::split(f.raw, {0.72, 0.08, 0.20}, 0);
  f.ds = standardize(f.raw, f.split);
  return f;
}

TrainConfig quick() {
  TrainConfig cfg;
  cfg.k = 5;
  cfg.epochs = 8;
  cfg.batch_size = 32;
  return cfg;
}

bool same_points(const SweepPoint& a, const SweepPoint& b) {
  return a.swept_value == b.swept_value && a.error_diff == b.error_diff &&
         a.test_error == b.test_error && a.aux == b.aux;
}

}  // namespace

TEST_CASE("spearman") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 3, 4, 5}, {1, 4, 9, 16, 1000}) == doctest::Approx(1.0));
  // Ties take average ranks: ranks y = (1.5, 1.5, 3), x = (1, 2, 3).
  CHECK(spearman({1, 2, 3}, {5, 5, 7}) == doctest::Approx(std::sqrt(0.75)));
}

TEST_CASE("jaccard") {
  CHECK(jaccard({0, 1, 2}, {0, 1, 2}) == 1.0);
  CHECK(jaccard({0, 1}, {2, 3}) == 0.0);
  CHECK(jaccard({0, 1, 2}, {1, 2, 3}) == 0.5);
}

TEST_CASE("lambda grid") {
  const std::vector<double> g = default_lambda_grid();
  REQUIRE(g.size() == 13);
  CHECK(g.front() == 0.0);
  CHECK(g[1] == 1.0 / 1024.0);
  CHECK(g[11] == 1.0);
  CHECK(g.back() == 2.0);
}

TEST_CASE("sweep_n records the gap of the final params") {
  const Fixture f = planted(400);
  const TrainConfig cfg = quick();
  const StabilityReport r = sweep_n(f.ds, f.split, cfg, {100, 200}, 3);
  REQUIRE(r.sweep.size() == 2);
  CHECK(r.kind == SweepKind::kN);
  for (std::size_t i = 0; i < 2; ++i) {
    const SweepPoint& p = r.sweep[i];
    CHECK(p.error_diff == p.test_error - p.aux.at("train_error"));
    const SplitSpec sub = subsample(f.ds, f.split, static_cast<std::size_t>(p.swept_value), 3);
    const GapMeasure g = measure_gap(train(f.ds, sub, cfg).final_params, f.ds, sub, cfg.k);
    CHECK(std::abs(g.error_diff - p.error_diff) <= 1e-10);
  }
  CHECK(r.sweep[0].swept_value < r.sweep[1].swept_value);

  const StabilityReport one = sweep_n(f.ds, f.split, cfg, {150}, 3);
  CHECK(one.sweep.size() == 1);
  CHECK_THROWS_AS(sweep_n(f.ds, f.split, cfg, {200, 100}, 3), Error);
}

TEST_CASE("sweeps are restartable and independent of thread count") {
  const Fixture f = planted(400);
  const TrainConfig cfg = quick();
  const StabilityReport full = sweep_n(f.ds, f.split, cfg, {60, 120, 180}, 1, {3});
  const StabilityReport prefix = sweep_n(f.ds, f.split, cfg, {60, 120}, 1);
  for (std::size_t i = 0; i < prefix.sweep.size(); ++i)
    CHECK(same_points(prefix.sweep[i], full.sweep[i]));
  const StabilityReport serial = sweep_n(f.ds, f.split, cfg, {60, 120, 180}, 1, {1});
  CHECK(report_to_csv(serial) == report_to_csv(full));
}

TEST_CASE("lambda sweep includes the unregularized point") {
  const Fixture f = planted(300);
  const StabilityReport r = sweep_lambda1(f.ds, f.split, quick(), {0.0, 0.5, 2.0}, 0, {2});
  REQUIRE(r.sweep.size() == 3);
  CHECK(r.sweep[0].swept_value == 0.0);
  CHECK(std::isfinite(r.sweep[0].error_diff));
  CHECK_THROWS_AS(sweep_lambda1(f.ds, f.split, quick(), {-1.0, 0.0}, 0), Error);
}

TEST_CASE("k sweep norm bound") {
  const Fixture f = planted(300);
  const StabilityReport r = sweep_k(f.ds, f.split, quick(), {2, 4, 6, 8, 10}, 0, {4});
  REQUIRE(r.sweep.size() == 5);
  for (const auto& p : r.sweep)
    CHECK(p.aux.at("norm_w0_we_wd") <= p.aux.at("norm_we_wd") * (1 + 1e-15));
  // With every feature kept the two norms coincide.
  CHECK(r.sweep.back().aux.at("norm_w0_we_wd") ==
        doctest::Approx(r.sweep.back().aux.at("norm_we_wd")).epsilon(1e-14));
  CHECK_THROWS_AS(sweep_k(f.ds, f.split, quick(), {5, 11}, 0), Error);
}

TEST_CASE("product norms on a hand example") {
  ModelParams p;
  p.w_m = Vector::Ones(2);
  p.w_e = (Matrix(2, 1) << 1, 2).finished();
  p.w_d = (Matrix(1, 2) << 3, 4).finished();
  const auto [full, masked] = product_norms(p, {1});
  CHECK(full == doctest::Approx(std::sqrt(9.0 + 16.0 + 36.0 + 64.0)));
  CHECK(masked == doctest::Approx(10.0));
}

TEST_CASE("beta of a null deletion is at the noise floor") {
  // An all-zero training row adds nothing to the loss and, under full batch,
  // only rescales the gradient, which Adam normalizes away.
  const Fixture f = planted(300);
  Dataset ds = f.ds;
  const std::size_t zero_row = ds.rows();
  ds.x.conservativeResize(ds.x.rows() + 1, Eigen::NoChange);
  ds.x.row(static_cast<Eigen::Index>(zero_row)).setZero();
  SplitSpec sp = f.split;
  sp.train_idx.push_back(zero_row);

  TrainConfig cfg = quick();
  cfg.batch_size = 0;
  cfg.epochs = 40;
  const Matrix x_test = rows_of(ds.x, sp.test_idx);
  const Vector base = selector_row_losses(train(ds, sp, cfg).final_params, x_test, cfg.k);
  const Vector again = selector_row_losses(train(ds, sp, cfg).final_params, x_test, cfg.k);
  const double floor = (base - again).cwiseAbs().maxCoeff();
  const Vector loo = selector_row_losses(
      leave_one_out_retrain(ds, sp, cfg, zero_row).final_params, x_test, cfg.k);
  const double beta = (base - loo).cwiseAbs().maxCoeff();
  CHECK(floor == 0.0);
  CHECK(beta < 1e-6);
  CHECK(beta <= std::max(10.0 * floor, 1e-6));
}

TEST_CASE("estimate_beta report") {
  const Fixture f = planted(400);
  const StabilityReport r = estimate_beta(f.ds, f.split, quick(), {100, 200}, 2, 5, {3});
  REQUIRE(r.sweep.size() == 2);
  for (const auto& p : r.sweep) {
    CHECK(p.aux.at("beta") >= p.aux.at("beta_mean"));
    CHECK(p.aux.at("beta_mean") >= 0.0);
  }
  const StabilityReport single = estimate_beta(f.ds, f.split, quick(), {100}, 1, 5);
  // The first deletion is shared, so adding deletions can only raise the max.
  CHECK(single.sweep[0].aux.at("beta") <= r.sweep[0].aux.at("beta"));
  CHECK_THROWS_AS(estimate_beta(f.ds, f.split, quick(), {100}, 0, 5), Error);
}

TEST_CASE("selection overlap trivial cases") {
  const Fixture f = planted(200);
  TrainConfig cfg = quick();
  const StabilityReport same = selection_overlap(f.raw, cfg, {4, 4, 4});
  CHECK(same.summary.at("mean_jaccard") == 1.0);
  CHECK(same.summary.at("min_jaccard") == 1.0);

  cfg.k = 10;
  const StabilityReport all = selection_overlap(f.raw, cfg, {0, 1, 2, 3}, {}, {2});
  CHECK(all.summary.at("mean_jaccard") == 1.0);
  for (int j = 0; j < 10; ++j) CHECK(all.summary.at("freq_" + std::to_string(j)) == 1.0);

  CHECK_THROWS_AS(selection_overlap(f.raw, cfg, {1}), Error);
}

TEST_CASE("report export") {
  const Fixture f = planted(300);
  const StabilityReport r = sweep_k(f.ds, f.split, quick(), {2, 3}, 7);
  const std::string csv = report_to_csv(r);
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "swept_value,error_diff,test_error,aux.norm_w0_we_wd,aux.norm_we_wd,aux.train_error");
  int rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  CHECK(rows == 2);

  const nlohmann::json j = report_to_json(r);
  CHECK(j.at("kind") == "k");
  CHECK(j.at("sweep").size() == 2);
  CHECK(j.at("sweep")[1].at("swept_value") == 3.0);
}
