// End-to-end acceptance checks. Prints one PASS/FAIL/SKIP line per
// criterion and exits nonzero if any gating criterion fails.
//
//   acceptance            run everything
//   acceptance 1 2 8      run a subset

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fd_oracle.hpp"
#include "scoresel/cli.hpp"
#include "scoresel/evaluation.hpp"
#include "scoresel/stability.hpp"
#include "scoresel/synth.hpp"
#include "test_util.hpp"

using namespace scoresel;

namespace {

// Pinned thresholds.
constexpr int kGradInstances = 100;
constexpr double kGradStep = 1e-5;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 10.0;

constexpr int kBranchInstances = 50;
constexpr double kBranchRelTol = 1e-12;

constexpr int kOracleSeeds = 10;
constexpr int kOracleMinMatches = 8;
constexpr double kOracleErrSlack = 0.10;
constexpr double kOracleSeconds = 120.0;

constexpr double kTrendRho = 0.5;
constexpr double kTrendSeconds = 15 * 60.0;
constexpr double kBetaSeconds = 15 * 60.0;

constexpr double kOverlapMinJaccard = 0.8;

constexpr double kMiceMaxMse = 0.05;
constexpr double kMiceMinAccuracy = 0.90;

// Fixed protocol.
constexpr std::size_t kSelectK = 5;
constexpr std::size_t kSmallN = 600;
constexpr std::size_t kSweepN = 3000;
const std::vector<std::size_t> kNGrid{500, 1000, 1500, 2000};
const std::vector<std::size_t> kKGrid{2, 3, 4, 5, 6, 7, 8};
constexpr std::size_t kDeletions = 3;
constexpr std::uint64_t kSweepSeed = 0;

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict = Verdict::kFail;
  std::string detail;
  bool gating = true;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

std::string list(const IndexList& idx) {
  std::string s = "{";
  for (std::size_t i = 0; i < idx.size(); ++i) s += (i ? "," : "") + std::to_string(idx[i]);
  return s + "}";
}

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

TrainConfig protocol_config() {
  TrainConfig cfg;
  cfg.k = kSelectK;
  return cfg;
}

struct Planted {
  SynthData synth;
  SplitSpec split;
  Dataset ds;  // standardized on split.train_idx
};

Planted planted(std::size_t n) {
  SynthSpec spec;
  spec.n = n;
  Planted p;
  p.synth = make_planted(spec);
  p.split = split(p.synth.data, {0.72, 0.08, 0.20}, 0);
  p.ds = standardize(p.synth.data, p.split);
  return p;
}

std::vector<double> column(const StabilityReport& r,
                           const std::function<double(const SweepPoint&)>& f) {
  std::vector<double> out;
  for (const auto& p : r.sweep) out.push_back(f(p));
  return out;
}

Outcome gradient_correctness() {
  const auto start = Clock::now();
  Rng rng(20240101);
  double worst = 0.0;
  int done = 0, redrawn = 0;
  while (done < kGradInstances) {
    const long m = 1 + static_cast<long>(rng.below(8));
    const long d = 1 + static_cast<long>(rng.below(std::min<std::uint64_t>(4, m)));
    const long b = 1 + static_cast<long>(rng.below(5));
    const std::size_t k = 1 + rng.below(static_cast<std::uint64_t>(m));
    const ScorerMap phi = done % 2 ? ScorerMap::kAbs : ScorerMap::kSquare;
    const double lambda1 = std::array<double, 3>{0.0, 1.0 / 128.0, 2.0}[done % 3];
    const ModelParams p = testutil::random_params(rng, m, d, phi);
    const Matrix x = testutil::random_matrix(rng, b, m);
    const testutil::FdResult r = testutil::check_gradients(p, x, k, lambda1, kGradStep);
    if (!r.mask_stable) {
      ++redrawn;  // the top-k set is not differentiable across a swap
      continue;
    }
    worst = std::max(worst, r.max_rel_err);
    ++done;
  }
  const double secs = seconds_since(start);
  Outcome o;
  o.verdict = worst <= kGradRelTol && secs < kGradSeconds ? Verdict::kPass : Verdict::kFail;
  o.detail = "max rel err " + fmt(worst, 3) + " over " + std::to_string(done) +
             " instances (limit " + fmt(kGradRelTol) + ", " + std::to_string(redrawn) +
             " redrawn for a mask swap), " + fmt(secs, 3) + " s (limit " + fmt(kGradSeconds) + " s)";
  return o;
}

Outcome branch_coincidence() {
  Rng rng(77);
  int exact = 0;
  double worst = 0.0;
  for (int i = 0; i < kBranchInstances; ++i) {
    const long m = 1 + static_cast<long>(rng.below(16));
    const long d = 1 + static_cast<long>(rng.below(static_cast<std::uint64_t>(m)));
    const ScorerMap phi = i % 2 ? ScorerMap::kAbs : ScorerMap::kSquare;
    const ModelParams p = testutil::random_params(rng, m, d, phi);
    const Matrix x = testutil::random_matrix(rng, 1 + static_cast<long>(rng.below(20)), m);
    const LossBreakdown l = loss(p, x, static_cast<std::size_t>(m), rng.uniform(0.0, 2.0));
    if (l.selec == l.score) ++exact;
    worst = std::max(worst, std::abs(l.selec - l.score) / std::max(l.score, 1e-300));
  }
  Outcome o;
  o.verdict = worst <= kBranchRelTol ? Verdict::kPass : Verdict::kFail;
  o.detail = std::to_string(exact) + "/" + std::to_string(kBranchInstances) +
             " bitwise equal, max rel diff " + fmt(worst, 3) + " (limit " + fmt(kBranchRelTol) + ")";
  return o;
}

Outcome oracle_equivalence() {
  const auto start = Clock::now();
  const Planted p = planted(kSmallN);
  const SubsetSearchResult best = brute_force_best_subset(p.ds, p.split, kSelectK);

  std::vector<IndexList> picks(kOracleSeeds);
  std::vector<double> errs(kOracleSeeds);
  std::vector<std::thread> pool;
  for (int s = 0; s < kOracleSeeds; ++s) {
    pool.emplace_back([&, s] {
      TrainConfig cfg = protocol_config();
      cfg.seed = static_cast<std::uint64_t>(s);
      const TrainReport tr = train(p.ds, p.split, cfg);
      picks[s] = select_features(tr.final_params, kSelectK).kept_idx;
      errs[s] = ols_error(ols_fit(p.ds, p.split, picks[s]), p.ds, p.split, SplitPart::kTest);
    });
  }
  for (auto& t : pool) t.join();

  int matches = 0, within = 0;
  double worst_ratio = 0.0;
  for (int s = 0; s < kOracleSeeds; ++s) {
    matches += picks[s] == best.best_idx;
    within += errs[s] <= (1.0 + kOracleErrSlack) * best.best_err;
    worst_ratio = std::max(worst_ratio, errs[s] / best.best_err);
  }
  const double secs = seconds_since(start);
  std::string chosen;
  for (int s = 0; s < kOracleSeeds; ++s) chosen += (s ? " " : "") + list(picks[s]);

  Outcome o;
  o.verdict = matches >= kOracleMinMatches && within == kOracleSeeds && secs < kOracleSeconds
                  ? Verdict::kPass
                  : Verdict::kFail;
  o.detail = "oracle " + list(best.best_idx) + " (planted " + list(p.synth.planted) +
             ", err " + fmt(best.best_err) + "); exact match " + std::to_string(matches) + "/" +
             std::to_string(kOracleSeeds) + " (need " + std::to_string(kOracleMinMatches) +
             "), within 10% " + std::to_string(within) + "/" + std::to_string(kOracleSeeds) +
             ", worst err ratio " + fmt(worst_ratio) + ", " + fmt(secs, 3) + " s; selections " +
             chosen;
  return o;
}

Outcome trend_reproduction() {
  const auto start = Clock::now();
  const Planted p = planted(kSweepN);
  const TrainConfig cfg = protocol_config();
  const SweepOptions opts{jobs()};
  auto value = [](const SweepPoint& q) { return q.swept_value; };
  auto diff = [](const SweepPoint& q) { return q.error_diff; };
  auto test = [](const SweepPoint& q) { return q.test_error; };

  const StabilityReport rn = sweep_n(p.ds, p.split, cfg, kNGrid, kSweepSeed, opts);
  const StabilityReport rl =
      sweep_lambda1(p.ds, p.split, cfg, default_lambda_grid(), kSweepSeed, opts);
  const StabilityReport rk = sweep_k(p.ds, p.split, cfg, kKGrid, kSweepSeed, opts);

  const double n_diff = spearman(column(rn, value), column(rn, diff));
  const double n_test = spearman(column(rn, value), column(rn, test));
  const double l_diff = spearman(column(rl, value), column(rl, diff));
  const double k_diff = spearman(column(rk, value), column(rk, diff));
  const double k_test = spearman(column(rk, value), column(rk, test));
  const double secs = seconds_since(start);

  const bool ok = n_diff <= -kTrendRho && l_diff <= -kTrendRho && k_diff >= kTrendRho &&
                  k_test <= -kTrendRho && secs < kTrendSeconds;
  Outcome o;
  o.verdict = ok ? Verdict::kPass : Verdict::kFail;
  o.detail = "rho(n, diff) " + fmt(n_diff, 3) + " [<= -0.5], rho(lambda1, diff) " +
             fmt(l_diff, 3) + " [<= -0.5], rho(k, diff) " + fmt(k_diff, 3) +
             " [>= 0.5], rho(k, test) " + fmt(k_test, 3) + " [<= -0.5]; info rho(n, test) " +
             fmt(n_test, 3) + "; " + fmt(secs, 3) + " s";
  return o;
}

Outcome uniform_stability() {
  const auto start = Clock::now();
  const Planted p = planted(kSweepN);
  const StabilityReport r = estimate_beta(p.ds, p.split, protocol_config(), kNGrid, kDeletions,
                                          kSweepSeed, SweepOptions{jobs()});
  std::vector<double> n, beta;
  std::string values;
  for (const auto& q : r.sweep) {
    n.push_back(q.swept_value);
    beta.push_back(q.aux.at("beta"));
    values += (values.empty() ? "" : " ") + fmt(q.aux.at("beta"), 3);
  }
  const double rho = spearman(n, beta);
  const double secs = seconds_since(start);
  Outcome o;
  o.verdict = rho <= -kTrendRho && secs < kBetaSeconds ? Verdict::kPass : Verdict::kFail;
  o.detail = "rho(n, beta) " + fmt(rho, 3) + " [<= -0.5]; beta " + values + "; " +
             fmt(secs, 3) + " s";
  return o;
}

Outcome selection_stability() {
  const Planted p = planted(kSmallN);
  std::vector<std::uint64_t> seeds(10);
  std::iota(seeds.begin(), seeds.end(), std::uint64_t{0});
  const TrainConfig cfg = protocol_config();

  OverlapOptions varied;
  const StabilityReport r = selection_overlap(p.synth.data, cfg, seeds, varied, {jobs()});
  OverlapOptions fixed_init;
  fixed_init.reseed_model = false;
  const StabilityReport f = selection_overlap(p.synth.data, cfg, seeds, fixed_init, {jobs()});

  const double mean = r.summary.at("mean_jaccard");
  Outcome o;
  o.verdict = mean >= kOverlapMinJaccard ? Verdict::kPass : Verdict::kFail;
  o.detail = "mean pairwise Jaccard " + fmt(mean, 3) + " (limit " + fmt(kOverlapMinJaccard) +
             "), min " + fmt(r.summary.at("min_jaccard"), 3) +
             "; info: split-only reseeding with a fixed initialization gives " +
             fmt(f.summary.at("mean_jaccard"), 3);
  return o;
}

Outcome reference_check() {
  Outcome o;
  o.gating = false;
  const char* path = std::getenv("MICE_PROTEIN_CSV");
  if (!path || !*path) {
    o.verdict = Verdict::kSkip;
    o.detail = "set MICE_PROTEIN_CSV to a numeric CSV with a class column to run";
    return o;
  }
  const char* label_env = std::getenv("MICE_PROTEIN_LABEL");
  const std::string label = label_env && *label_env ? label_env : "class";
  const Dataset raw = load_csv(path, true, label);
  const SplitSpec sp = split(raw, {0.72, 0.08, 0.20}, 0);
  const Dataset ds = standardize(raw, sp);
  TrainConfig cfg;
  cfg.k = 10;
  cfg.phi = ScorerMap::kSquare;
  const TrainReport tr = train(ds, sp, cfg);
  const SelectionResult sel = select_features(tr.best_params, cfg.k);
  const double mse = ols_error(ols_fit(ds, sp, sel), ds, sp, SplitPart::kTest);

  auto columns = [&](const IndexList& rows) {
    const Matrix x = rows_of(ds.x, rows);
    Matrix xs(x.rows(), static_cast<Eigen::Index>(sel.kept_idx.size()));
    for (std::size_t i = 0; i < sel.kept_idx.size(); ++i)
      xs.col(static_cast<Eigen::Index>(i)) = x.col(static_cast<Eigen::Index>(sel.kept_idx[i]));
    return xs;
  };
  const ExtraTreesModel et =
      extratrees_fit(columns(sp.train_idx), labels_of(ds, sp.train_idx), cfg.seed);
  const double acc = extratrees_accuracy(et, columns(sp.test_idx), labels_of(ds, sp.test_idx));
  o.verdict = mse <= kMiceMaxMse && acc >= kMiceMinAccuracy ? Verdict::kPass : Verdict::kFail;
  o.detail = std::to_string(ds.rows()) + "x" + std::to_string(ds.features()) + ", " +
             std::to_string(ds.num_classes()) + " classes; recon mse " + fmt(mse) +
             " (limit " + fmt(kMiceMaxMse) + "), accuracy " + fmt(acc) + " (limit " +
             fmt(kMiceMinAccuracy) + "); report only";
  return o;
}

Outcome determinism() {
  testutil::TempDir dir("acceptance");
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return run_command(args, sink, sink); };

  Outcome o;
  const std::string data = dir.file("synth.csv");
  if (run({"gen-synth", "--n", "400", "--out", data}) != 0) {
    o.detail = "gen-synth failed";
    return o;
  }
  testutil::write_text(dir.file("config.json"),
                       "{\"data\": \"" + data + "\", \"label_column\": \"label\", \"k\": 3,"
                       " \"epochs\": 5, \"n_trees\": 5, \"jobs\": 4,"
                       " \"n_values\": [100, 200], \"lambda_values\": [0, 0.5],"
                       " \"k_values\": [2, 4], \"deletions\": 2, \"overlap_seeds\": [1, 2, 3]}");
  const std::string cfg = dir.file("config.json");

  const std::vector<std::vector<std::string>> commands{
      {"gen-synth", "--n", "50", "--seed", "3", "--out", "@/g.csv"},
      {"train", "--config", cfg, "--out", "@"},
      {"select", "--params", "@/params.json", "--k", "2", "--out", "@"},
      {"eval", "--config", cfg, "--params", "@/params.json", "--out", "@"},
      {"sweep-n", "--config", cfg, "--out", "@"},
      {"sweep-lambda", "--config", cfg, "--out", "@"},
      {"sweep-k", "--config", cfg, "--out", "@"},
      {"beta", "--config", cfg, "--out", "@"},
      {"overlap", "--config", cfg, "--out", "@"},
      {"oracle", "--config", cfg, "--k", "3", "--out", "@"}};

  // Identical config means identical paths too, so both passes share one
  // output directory and the first pass is snapshotted before the second.
  const std::string root = dir.file("run");
  auto run_all = [&]() -> bool {
    for (auto args : commands) {
      for (auto& a : args) {
        if (a.rfind('@', 0) == 0) a = root + a.substr(1);
      }
      if (run(args) != 0) {
        o.detail = args.front() + " failed: " + sink.str();
        return false;
      }
    }
    return true;
  };
  auto snapshot = [&] {
    std::map<std::string, std::string> files;
    for (const auto& entry : std::filesystem::directory_iterator(root))
      files[entry.path().filename().string()] = testutil::read_text(entry.path().string());
    return files;
  };

  if (!run_all()) return o;
  const auto first = snapshot();
  if (!run_all()) return o;
  const auto second = snapshot();

  std::vector<std::string> differing;
  for (const auto& [name, bytes] : first) {
    auto it = second.find(name);
    if (it == second.end() || it->second != bytes) differing.push_back(name);
  }
  o.verdict = differing.empty() && first.size() == second.size() && !first.empty()
                  ? Verdict::kPass
                  : Verdict::kFail;
  o.detail = std::to_string(first.size()) + " output files from 10 commands compared, " +
             std::to_string(differing.size()) + " differ";
  for (const auto& d : differing) o.detail += " " + d;
  return o;
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "gradient correctness", gradient_correctness},
      {2, "branch coincidence", branch_coincidence},
      {3, "oracle equivalence", oracle_equivalence},
      {4, "trend reproduction", trend_reproduction},
      {5, "empirical uniform stability", uniform_stability},
      {6, "selection stability", selection_stability},
      {7, "reference dataset check", reference_check},
      {8, "determinism", determinism}};

  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.verdict = Verdict::kFail;
      o.detail = std::string("exception: ") + e.what();
    }
    const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kSkip ? "SKIP" : "FAIL";
    std::cout << tag << "  criterion " << c.id << " " << c.name << ": " << o.detail << std::endl;
    if (o.verdict == Verdict::kFail && o.gating) ++failed;
  }
  std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criterion(s) failed"
                       : std::string("acceptance: all gating criteria passed"))
            << std::endl;
  return failed ? 1 : 0;
}
