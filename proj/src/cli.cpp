#include "scoresel/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "scoresel/error.hpp"
#include "scoresel/evaluation.hpp"
#include "scoresel/stability.hpp"
#include "scoresel/synth.hpp"

namespace scoresel {

namespace fs = std::filesystem;

namespace {

constexpr const char* kOutDirEnv = "SCORESEL_OUT_DIR";

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& field,
              nlohmann::json& sources) {
  auto it = j.find(key);
  if (it == j.end()) {
    sources[key] = "default";
    return;
  }
  try {
    field = it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
  sources[key] = "user";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_text(path, j.dump(2) + "\n");
}

struct Prepared {
  Dataset raw;
  Dataset ds;
  SplitSpec split;
};

Prepared prepare(const RunConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("config key 'data' is required");
  Prepared p;
  p.raw = load_csv(cfg.data, cfg.has_header,
                   cfg.label_column.empty() ? std::nullopt
                                            : std::optional<std::string>(cfg.label_column));
  p.split = split(p.raw, cfg.ratios, cfg.split_seed);
  p.ds = cfg.standardize ? standardize(p.raw, p.split) : p.raw;
  return p;
}

fs::path output_dir(const RunConfig& cfg, const std::string& flag_override) {
  fs::path dir = cfg.out_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) dir = env;
  if (!flag_override.empty()) dir = flag_override;
  fs::create_directories(dir);
  return dir;
}

void log_config(const RunConfig& cfg, std::ostream& err) {
  const nlohmann::json resolved = resolved_config_json(cfg);
  for (const auto& [key, entry] : resolved.items())
    err << "config: " << key << " = " << entry.at("value").dump() << " ("
        << entry.at("source").get<std::string>() << ")\n";
}

nlohmann::json selection_json(const SelectionResult& sel) {
  return {{"kept_idx", sel.kept_idx}, {"scores", sel.scores}, {"source", sel.source}};
}

std::string dataset_name(const RunConfig& cfg) {
  return fs::path(cfg.data).stem().string();
}

void write_report(const fs::path& dir, const StabilityReport& report,
                  std::uint64_t seed) {
  const std::string stem = "sweep_" + to_string(report.kind) + "_seed" + std::to_string(seed);
  write_text(dir / (stem + ".csv"), report_to_csv(report));
  write_json(dir / (stem + ".json"), report_to_json(report));
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "data", "has_header", "label_column", "ratios", "split_seed",
      "standardize", "lambda1", "k", "d", "epochs", "batch_size", "lr", "phi",
      "seed", "shuffle", "ols", "classify", "ridge_eps", "n_trees", "out_dir",
      "jobs", "sweep_seed", "n_values", "lambda_values", "k_values",
      "deletions", "overlap_seeds"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");
  }

  RunConfig c;
  auto& s = c.sources;
  read_key(j, "data", c.data, s);
  read_key(j, "has_header", c.has_header, s);
  if (j.contains("label_column") && j.at("label_column").is_null()) {
    s["label_column"] = "user";
  } else {
    read_key(j, "label_column", c.label_column, s);
  }
  std::vector<double> ratios(c.ratios.begin(), c.ratios.end());
  read_key(j, "ratios", ratios, s);
  if (ratios.size() != 3) throw ConfigError("config key 'ratios' needs 3 values");
  std::copy(ratios.begin(), ratios.end(), c.ratios.begin());
  read_key(j, "split_seed", c.split_seed, s);
  read_key(j, "standardize", c.standardize, s);
  read_key(j, "lambda1", c.train.lambda1, s);
  read_key(j, "k", c.train.k, s);
  read_key(j, "d", c.train.d, s);
  read_key(j, "epochs", c.train.epochs, s);
  read_key(j, "batch_size", c.train.batch_size, s);
  read_key(j, "lr", c.train.lr, s);
  std::string phi = to_string(c.train.phi);
  read_key(j, "phi", phi, s);
  c.train.phi = parse_scorer_map(phi);
  read_key(j, "seed", c.train.seed, s);
  read_key(j, "shuffle", c.train.shuffle, s);
  read_key(j, "ols", c.ols, s);
  read_key(j, "classify", c.classify, s);
  read_key(j, "ridge_eps", c.ridge_eps, s);
  read_key(j, "n_trees", c.n_trees, s);
  read_key(j, "out_dir", c.out_dir, s);
  read_key(j, "jobs", c.jobs, s);
  read_key(j, "sweep_seed", c.sweep_seed, s);
  read_key(j, "n_values", c.n_values, s);
  read_key(j, "lambda_values", c.lambda_values, s);
  if (c.lambda_values.empty()) c.lambda_values = default_lambda_grid();
  read_key(j, "k_values", c.k_values, s);
  read_key(j, "deletions", c.deletions, s);
  read_key(j, "overlap_seeds", c.overlap_seeds, s);

  if (!(c.train.lambda1 >= 0.0)) throw ConfigError("config key 'lambda1' must be >= 0");
  if (c.train.k < 1) throw ConfigError("config key 'k' must be >= 1");
  if (!(c.train.lr > 0.0)) throw ConfigError("config key 'lr' must be > 0");
  if (!(c.ridge_eps >= 0.0)) throw ConfigError("config key 'ridge_eps' must be >= 0");
  if (c.n_trees < 1) throw ConfigError("config key 'n_trees' must be >= 1");
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return parse_run_config(j);
}

nlohmann::json resolved_config_json(const RunConfig& cfg) {
  const nlohmann::json values = {
      {"data", cfg.data},
      {"has_header", cfg.has_header},
      {"label_column", cfg.label_column.empty() ? nlohmann::json(nullptr)
                                                : nlohmann::json(cfg.label_column)},
      {"ratios", cfg.ratios},
      {"split_seed", cfg.split_seed},
      {"standardize", cfg.standardize},
      {"lambda1", cfg.train.lambda1},
      {"k", cfg.train.k},
      {"d", cfg.train.latent()},
      {"epochs", cfg.train.epochs},
      {"batch_size", cfg.train.batch_size},
      {"lr", cfg.train.lr},
      {"phi", to_string(cfg.train.phi)},
      {"seed", cfg.train.seed},
      {"shuffle", cfg.train.shuffle},
      {"ols", cfg.ols},
      {"classify", cfg.classify},
      {"ridge_eps", cfg.ridge_eps},
      {"n_trees", cfg.n_trees},
      {"out_dir", cfg.out_dir},
      {"jobs", cfg.jobs},
      {"sweep_seed", cfg.sweep_seed},
      {"n_values", cfg.n_values},
      {"lambda_values", cfg.lambda_values},
      {"k_values", cfg.k_values},
      {"deletions", cfg.deletions},
      {"overlap_seeds", cfg.overlap_seeds}};
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, value] : values.items()) {
    const auto src = cfg.sources.find(key);
    out[key] = {{"value", value},
                {"source", src == cfg.sources.end() ? "default" : src->get<std::string>()}};
  }
  return out;
}

int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err) {
  CLI::App app{"Scorer/selector autoencoder feature selection", "scoresel"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_flag;
  std::string params_path;
  std::string data_path;
  std::size_t k_flag = 0;
  std::size_t jobs_flag = 0;
  SynthSpec synth;
  std::string synth_out = "synth.csv";

  auto add_config = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--config", config_path, "JSON run configuration");
    if (required) opt->required();
    sub->add_option("--out", out_flag, "output directory (overrides config and environment)");
  };

  auto* train_cmd = app.add_subcommand("train", "train the selector and write params + telemetry");
  add_config(train_cmd, true);

  auto* select_cmd = app.add_subcommand("select", "top-k features of a params file");
  select_cmd->add_option("--params", params_path, "params JSON")->required();
  select_cmd->add_option("--k", k_flag, "number of features")->required();
  select_cmd->add_option("--out", out_flag, "output directory");

  auto* eval_cmd = app.add_subcommand("eval", "OLS reconstruction and extra-trees accuracy");
  add_config(eval_cmd, true);
  eval_cmd->add_option("--params", params_path, "params JSON")->required();

  std::vector<CLI::App*> sweep_cmds;
  for (const char* name : {"sweep-n", "sweep-lambda", "sweep-k", "beta", "overlap"}) {
    auto* sub = app.add_subcommand(name, std::string("stability experiment: ") + name);
    add_config(sub, true);
    sub->add_option("--jobs", jobs_flag, "parallel training runs");
    sweep_cmds.push_back(sub);
  }

  auto* oracle_cmd = app.add_subcommand("oracle", "exhaustive best k-subset under OLS reconstruction");
  add_config(oracle_cmd, false);
  oracle_cmd->add_option("--data", data_path, "CSV dataset (used when no config is given)");
  oracle_cmd->add_option("--k", k_flag, "subset size")->required();

  auto* synth_cmd = app.add_subcommand("gen-synth", "write the planted-feature dataset");
  synth_cmd->add_option("--m", synth.m, "features")->capture_default_str();
  synth_cmd->add_option("--n", synth.n, "samples")->capture_default_str();
  synth_cmd->add_option("--informative", synth.informative, "planted generating features")->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise, "noise standard deviation")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "CSV path; planted indices go to <stem>.planted.json")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << e.what() << "\n";
    return 2;
  }

  try {
    if (synth_cmd->parsed()) {
      const SynthData sd = make_planted(synth);
      const fs::path csv = synth_out;
      if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
      write_csv(sd.data, csv.string(), "label");
      fs::path planted = csv;
      planted.replace_extension(".planted.json");
      write_json(planted, {{"planted", sd.planted},
                           {"m", synth.m},
                           {"n", synth.n},
                           {"informative", synth.informative},
                           {"noise", synth.noise},
                           {"seed", synth.seed}});
      out << csv.string() << "\n";
      return 0;
    }

    if (select_cmd->parsed()) {
      const ModelParams params = load_params(params_path);
      const SelectionResult sel = select_features(params, k_flag, params_path);
      RunConfig defaults;
      const fs::path dir = output_dir(defaults, out_flag);
      write_json(dir / "selection.json", selection_json(sel));
      out << nlohmann::json(sel.kept_idx).dump() << "\n";
      return 0;
    }

    RunConfig cfg;
    if (!config_path.empty()) {
      cfg = load_run_config(config_path);
    } else {
      cfg = parse_run_config(nlohmann::json::object());
    }
    if (!data_path.empty()) {
      cfg.data = data_path;
      cfg.sources["data"] = "user";
    }
    if (jobs_flag > 0) cfg.jobs = jobs_flag;
    log_config(cfg, err);
    const fs::path dir = output_dir(cfg, out_flag);
    write_json(dir / "resolved_config.json", resolved_config_json(cfg));

    if (oracle_cmd->parsed()) {
      const Prepared p = prepare(cfg);
      const SubsetSearchResult r = brute_force_best_subset(p.ds, p.split, k_flag, cfg.ridge_eps);
      write_json(dir / ("oracle_k" + std::to_string(k_flag) + ".json"),
                 {{"k", k_flag},
                  {"best_idx", r.best_idx},
                  {"best_err", r.best_err},
                  {"evaluated", r.evaluated}});
      out << nlohmann::json(r.best_idx).dump() << "\n";
      return 0;
    }

    const Prepared p = prepare(cfg);
    cfg.train.validate(p.ds.features());

    if (train_cmd->parsed()) {
      const TrainReport report = train(p.ds, p.split, cfg.train);
      save_params(report.final_params, (dir / "params.json").string());
      save_params(report.best_params, (dir / "best_params.json").string());
      write_text(dir / "report.jsonl", report_to_jsonl(report));
      write_json(dir / "split.json", split_to_json(p.split));
      write_json(dir / "selection.json",
                 selection_json(select_features(report.final_params, cfg.train.k, "params.json")));
      return 0;
    }

    if (eval_cmd->parsed()) {
      const ModelParams params = load_params(params_path);
      if (params.features() != p.ds.features())
        throw Error("params have " + std::to_string(params.features()) +
                    " features, dataset has " + std::to_string(p.ds.features()));
      const SelectionResult sel = select_features(params, cfg.train.k, params_path);
      nlohmann::json metrics = {{"dataset", dataset_name(cfg)},
                                {"k", cfg.train.k},
                                {"phi", to_string(params.phi)},
                                {"kept_idx", sel.kept_idx},
                                {"recon_mse", nullptr},
                                {"accuracy", nullptr}};
      if (cfg.ols) {
        const OlsModel ols = ols_fit(p.ds, p.split, sel, cfg.ridge_eps);
        metrics["recon_mse"] = ols_error(ols, p.ds, p.split, SplitPart::kTest);
      }
      if (cfg.classify && p.ds.labels) {
        auto columns = [&](const IndexList& rows) {
          const Matrix x = rows_of(p.ds.x, rows);
          Matrix xs(x.rows(), static_cast<Eigen::Index>(sel.kept_idx.size()));
          for (std::size_t i = 0; i < sel.kept_idx.size(); ++i)
            xs.col(static_cast<Eigen::Index>(i)) = x.col(static_cast<Eigen::Index>(sel.kept_idx[i]));
          return xs;
        };
        ExtraTreesOptions opts;
        opts.n_trees = cfg.n_trees;
        const ExtraTreesModel et = extratrees_fit(columns(p.split.train_idx),
                                                  labels_of(p.ds, p.split.train_idx),
                                                  cfg.train.seed, opts);
        metrics["accuracy"] = extratrees_accuracy(et, columns(p.split.test_idx),
                                                  labels_of(p.ds, p.split.test_idx));
      }
      const IndexList& val_rows = p.split.val_idx.empty() ? p.split.train_idx : p.split.val_idx;
      metrics["val_loss"] = loss_to_json(
          loss(params, rows_of(p.ds.x, val_rows), cfg.train.k, cfg.train.lambda1));
      write_json(dir / "metrics.json", metrics);
      out << metrics.dump() << "\n";
      return 0;
    }

    SweepOptions opts;
    opts.jobs = cfg.jobs;
    const std::string sub = app.get_subcommands().front()->get_name();
    StabilityReport report;
    std::uint64_t seed = cfg.sweep_seed;
    if (sub == "sweep-n") {
      report = sweep_n(p.ds, p.split, cfg.train, cfg.n_values, cfg.sweep_seed, opts);
    } else if (sub == "sweep-lambda") {
      report = sweep_lambda1(p.ds, p.split, cfg.train, cfg.lambda_values, cfg.sweep_seed, opts);
    } else if (sub == "sweep-k") {
      report = sweep_k(p.ds, p.split, cfg.train, cfg.k_values, cfg.sweep_seed, opts);
    } else if (sub == "beta") {
      report = estimate_beta(p.ds, p.split, cfg.train, cfg.n_values, cfg.deletions,
                             cfg.sweep_seed, opts);
    } else if (sub == "overlap") {
      OverlapOptions overlap;
      overlap.ratios = cfg.ratios;
      overlap.standardize_data = cfg.standardize;
      report = selection_overlap(p.raw, cfg.train, cfg.overlap_seeds, overlap, opts);
      seed = cfg.overlap_seeds.front();
    } else {
      throw Error("unhandled subcommand " + sub);
    }
    write_report(dir, report, seed);
    out << report_to_csv(report);
    return 0;
  } catch (const ConfigError& e) {
    err << "error[config]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error[runtime]: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace scoresel
