#include "scoresel/stability.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "scoresel/error.hpp"
#include "scoresel/evaluation.hpp"
#include "scoresel/rng.hpp"

namespace scoresel {

std::string to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::kN:
      return "n";
    case SweepKind::kLambda1:
      return "lambda1";
    case SweepKind::kK:
      return "k";
    case SweepKind::kBeta:
      return "beta";
    case SweepKind::kOverlap:
      return "overlap";
  }
  return "unknown";
}

namespace {

// Runs task(i) for i in [0, count) on up to `jobs` threads. Results are
// written by index, so the outcome does not depend on scheduling.
void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

template <typename T>
void require_increasing(const std::vector<T>& values, const char* what) {
  if (values.empty()) throw Error(std::string(what) + ": empty sweep grid");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] > values[i - 1]))
      throw Error(std::string(what) + ": sweep values must be strictly increasing");
}

SweepPoint gap_point(double swept, const ModelParams& params,
                     const Dataset& ds, const SplitSpec& split, std::size_t k) {
  const GapMeasure g = measure_gap(params, ds, split, k);
  SweepPoint p;
  p.swept_value = swept;
  p.error_diff = g.error_diff;
  p.test_error = g.test_error;
  p.aux["train_error"] = g.train_error;
  return p;
}

}  // namespace

GapMeasure measure_gap(const ModelParams& params, const Dataset& ds,
                       const SplitSpec& split, std::size_t k) {
  if (split.test_idx.empty()) throw Error("measure_gap: empty test split");
  GapMeasure g;
  g.train_error = selector_row_losses(params, rows_of(ds.x, split.train_idx), k).mean();
  g.test_error = selector_row_losses(params, rows_of(ds.x, split.test_idx), k).mean();
  g.error_diff = g.test_error - g.train_error;
  return g;
}

StabilityReport sweep_n(const Dataset& ds, const SplitSpec& split,
                        const TrainConfig& cfg,
                        const std::vector<std::size_t>& n_values,
                        std::uint64_t seed, const SweepOptions& opts) {
  require_increasing(n_values, "sweep_n");
  StabilityReport report;
  report.kind = SweepKind::kN;
  report.config = cfg;
  report.seeds = {seed, cfg.seed};
  report.sweep.resize(n_values.size());
  report.selections.resize(n_values.size());
  parallel_for(n_values.size(), opts.jobs, [&](std::size_t i) {
    const SplitSpec sub = subsample(ds, split, n_values[i], seed);
    const TrainReport tr = train(ds, sub, cfg);
    report.sweep[i] = gap_point(static_cast<double>(n_values[i]),
                                tr.final_params, ds, sub, cfg.k);
    report.selections[i] = topk_mask(score_vector(tr.final_params), cfg.k).kept_idx;
  });
  return report;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid{0.0};
  for (int p = 10; p >= 0; --p) grid.push_back(std::ldexp(1.0, -p));
  grid.push_back(2.0);
  return grid;
}

StabilityReport sweep_lambda1(const Dataset& ds, const SplitSpec& split,
                              const TrainConfig& cfg,
                              const std::vector<double>& lambda_values,
                              std::uint64_t seed, const SweepOptions& opts) {
  require_increasing(lambda_values, "sweep_lambda1");
  for (double l : lambda_values)
    if (!(l >= 0.0)) throw Error("sweep_lambda1: lambda values must be >= 0");
  StabilityReport report;
  report.kind = SweepKind::kLambda1;
  report.config = cfg;
  report.seeds = {seed, cfg.seed};
  report.sweep.resize(lambda_values.size());
  report.selections.resize(lambda_values.size());
  parallel_for(lambda_values.size(), opts.jobs, [&](std::size_t i) {
    TrainConfig c = cfg;
    c.lambda1 = lambda_values[i];
    const TrainReport tr = train(ds, split, c);
    report.sweep[i] = gap_point(lambda_values[i], tr.final_params, ds, split, c.k);
    report.selections[i] = topk_mask(score_vector(tr.final_params), c.k).kept_idx;
  });
  return report;
}

std::pair<double, double> product_norms(const ModelParams& params,
                                        const IndexList& kept) {
  const Matrix prod = params.w_e * params.w_d;
  double masked = 0.0;
  for (std::size_t j : kept)
    masked += prod.row(static_cast<Eigen::Index>(j)).squaredNorm();
  return {prod.norm(), std::sqrt(masked)};
}

StabilityReport sweep_k(const Dataset& ds, const SplitSpec& split,
                        const TrainConfig& cfg,
                        const std::vector<std::size_t>& k_values,
                        std::uint64_t seed, const SweepOptions& opts) {
  require_increasing(k_values, "sweep_k");
  if (k_values.back() > ds.features())
    throw Error("sweep_k: k exceeds the number of features");
  StabilityReport report;
  report.kind = SweepKind::kK;
  report.config = cfg;
  report.seeds = {seed, cfg.seed};
  report.sweep.resize(k_values.size());
  report.selections.resize(k_values.size());
  parallel_for(k_values.size(), opts.jobs, [&](std::size_t i) {
    TrainConfig c = cfg;
    c.k = k_values[i];
    const TrainReport tr = train(ds, split, c);
    SweepPoint p = gap_point(static_cast<double>(c.k), tr.final_params, ds, split, c.k);
    const IndexList kept = topk_mask(score_vector(tr.final_params), c.k).kept_idx;
    const auto [full, masked] = product_norms(tr.final_params, kept);
    p.aux["norm_we_wd"] = full;
    p.aux["norm_w0_we_wd"] = masked;
    report.sweep[i] = std::move(p);
    report.selections[i] = kept;
  });
  return report;
}

StabilityReport estimate_beta(const Dataset& ds, const SplitSpec& split,
                              const TrainConfig& cfg,
                              const std::vector<std::size_t>& n_values,
                              std::size_t deletions_per_n, std::uint64_t seed,
                              const SweepOptions& opts) {
  require_increasing(n_values, "estimate_beta");
  if (deletions_per_n < 1) throw Error("estimate_beta: deletions_per_n must be >= 1");

  // Task layout per n: slot 0 trains on S, slots 1..D train on S minus row j.
  const std::size_t per_n = deletions_per_n + 1;
  std::vector<SplitSpec> subs(n_values.size());
  std::vector<IndexList> deleted(n_values.size());
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    subs[i] = subsample(ds, split, n_values[i], seed);
    if (deletions_per_n > subs[i].train_idx.size())
      throw Error("estimate_beta: more deletions than training rows");
    IndexList pool = subs[i].train_idx;
    Rng rng(derive_seed(seed, n_values[i]));
    rng.shuffle(pool);
    deleted[i].assign(pool.begin(), pool.begin() + static_cast<long>(deletions_per_n));
  }

  std::vector<ModelParams> models(n_values.size() * per_n);
  parallel_for(models.size(), opts.jobs, [&](std::size_t t) {
    const std::size_t i = t / per_n;
    const std::size_t slot = t % per_n;
    models[t] = slot == 0
                    ? train(ds, subs[i], cfg).final_params
                    : leave_one_out_retrain(ds, subs[i], cfg, deleted[i][slot - 1]).final_params;
  });

  StabilityReport report;
  report.kind = SweepKind::kBeta;
  report.config = cfg;
  report.seeds = {seed, cfg.seed};
  for (std::size_t i = 0; i < n_values.size(); ++i) {
    const ModelParams& full = models[i * per_n];
    const Matrix x_test = rows_of(ds.x, subs[i].test_idx);
    const Vector base = selector_row_losses(full, x_test, cfg.k);
    double beta = 0.0;
    double mean_sum = 0.0;
    for (std::size_t d = 1; d < per_n; ++d) {
      const Vector other = selector_row_losses(models[i * per_n + d], x_test, cfg.k);
      const Vector diff = (base - other).cwiseAbs();
      beta = std::max(beta, diff.maxCoeff());
      mean_sum += diff.mean();
    }
    SweepPoint p = gap_point(static_cast<double>(n_values[i]), full, ds, subs[i], cfg.k);
    p.aux["beta"] = beta;
    p.aux["beta_mean"] = mean_sum / static_cast<double>(deletions_per_n);
    report.sweep.push_back(std::move(p));
    report.selections.push_back(topk_mask(score_vector(full), cfg.k).kept_idx);
  }
  return report;
}

double jaccard(const IndexList& a, const IndexList& b) {
  std::set<std::size_t> sa(a.begin(), a.end());
  std::set<std::size_t> sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  std::size_t inter = 0;
  for (std::size_t v : sa) inter += sb.count(v);
  const std::size_t uni = sa.size() + sb.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

StabilityReport selection_overlap(const Dataset& raw, const TrainConfig& cfg,
                                  const std::vector<std::uint64_t>& seeds,
                                  const OverlapOptions& overlap,
                                  const SweepOptions& opts) {
  if (seeds.size() < 2) throw Error("selection_overlap: need at least 2 seeds");
  StabilityReport report;
  report.kind = SweepKind::kOverlap;
  report.config = cfg;
  report.seeds = seeds;
  report.sweep.resize(seeds.size());
  report.selections.resize(seeds.size());
  parallel_for(seeds.size(), opts.jobs, [&](std::size_t i) {
    const SplitSpec sp = split(raw, overlap.ratios, seeds[i]);
    const Dataset ds = overlap.standardize_data ? standardize(raw, sp) : raw;
    TrainConfig c = cfg;
    if (overlap.reseed_model) c.seed = seeds[i];
    const TrainReport tr = train(ds, sp, c);
    SweepPoint p = gap_point(static_cast<double>(i), tr.final_params, ds, sp, cfg.k);
    p.aux["split_seed"] = static_cast<double>(seeds[i]);
    report.sweep[i] = std::move(p);
    report.selections[i] = topk_mask(score_vector(tr.final_params), cfg.k).kept_idx;
  });

  const std::size_t s = seeds.size();
  double sum = 0.0;
  double lowest = 1.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < s; ++a) {
    for (std::size_t b = a + 1; b < s; ++b) {
      const double jac = jaccard(report.selections[a], report.selections[b]);
      sum += jac;
      lowest = std::min(lowest, jac);
      ++pairs;
    }
  }
  report.summary["mean_jaccard"] = sum / static_cast<double>(pairs);
  report.summary["min_jaccard"] = lowest;
  std::vector<std::size_t> freq(raw.features(), 0);
  for (const auto& sel : report.selections)
    for (std::size_t j : sel) ++freq[j];
  for (std::size_t j = 0; j < freq.size(); ++j)
    report.summary["freq_" + std::to_string(j)] =
        static_cast<double>(freq[j]) / static_cast<double>(s);
  return report;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw Error("spearman: need two equal-length series of at least 2 points");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

std::string report_to_csv(const StabilityReport& report) {
  std::set<std::string> keys;
  for (const auto& p : report.sweep)
    for (const auto& [k, v] : p.aux) keys.insert(k);
  std::ostringstream out;
  out.precision(17);
  out << "swept_value,error_diff,test_error";
  for (const auto& k : keys) out << ",aux." << k;
  out << '\n';
  for (const auto& p : report.sweep) {
    out << p.swept_value << ',' << p.error_diff << ',' << p.test_error;
    for (const auto& k : keys) {
      out << ',';
      auto it = p.aux.find(k);
      if (it != p.aux.end()) out << it->second;
    }
    out << '\n';
  }
  return out.str();
}

nlohmann::json report_to_json(const StabilityReport& report) {
  nlohmann::json sweep = nlohmann::json::array();
  for (const auto& p : report.sweep) {
    sweep.push_back({{"swept_value", p.swept_value},
                     {"error_diff", p.error_diff},
                     {"test_error", p.test_error},
                     {"aux", p.aux}});
  }
  return {{"kind", to_string(report.kind)},
          {"config", config_to_json(report.config)},
          {"seeds", report.seeds},
          {"sweep", std::move(sweep)},
          {"selections", report.selections},
          {"summary", report.summary}};
}

}  // namespace scoresel
