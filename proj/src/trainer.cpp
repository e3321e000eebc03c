#include "scoresel/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "scoresel/error.hpp"
#include "scoresel/optim.hpp"
#include "scoresel/rng.hpp"

namespace scoresel {

void TrainConfig::validate(std::size_t m) const {
  if (!(lambda1 >= 0.0) || !std::isfinite(lambda1))
    throw ConfigError("lambda1 must be a finite non-negative number");
  if (k < 1 || k > m)
    throw ConfigError("k=" + std::to_string(k) + " must lie in [1, " +
                      std::to_string(m) + "]");
  if (latent() < 1 || latent() > m)
    throw ConfigError("d=" + std::to_string(latent()) + " must lie in [1, " +
                      std::to_string(m) + "]");
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw ConfigError("lr must be positive");
}

namespace {

TrainReport run_training(const Dataset& ds, const SplitSpec& split,
                         const TrainConfig& cfg,
                         std::optional<std::size_t> removed) {
  const std::size_t m = ds.features();
  cfg.validate(m);
  if (split.train_idx.empty()) throw Error("train: empty train split");

  IndexList rows = split.train_idx;
  const std::size_t n_eff = rows.size() - (removed ? 1 : 0);
  if (n_eff == 0) throw Error("train: no training rows after deletion");

  const Matrix x_train = [&] {
    IndexList kept;
    kept.reserve(n_eff);
    for (std::size_t r : rows)
      if (!removed || r != *removed) kept.push_back(r);
    return rows_of(ds.x, kept);
  }();
  const Matrix x_val = rows_of(ds.x, split.val_idx);

  TrainReport report;
  ModelParams params = init_params(m, cfg.latent(), cfg.phi, cfg.seed);
  report.best_params = params;
  AdamState adam = AdamState::for_params(params, cfg.lr);

  // Shuffling draws from a stream independent of the initializer.
  Rng order_rng(derive_seed(cfg.seed, 1));
  const std::size_t batch =
      cfg.batch_size == 0 ? n_eff : std::min(cfg.batch_size, n_eff);

  double best_val = std::numeric_limits<double>::infinity();
  ParamGrads grads;
  IndexList order = rows;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order = rows;
    if (cfg.shuffle) order_rng.shuffle(order);
    if (removed)
      order.erase(std::remove(order.begin(), order.end(), *removed),
                  order.end());

    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < n_eff; start += batch, ++batch_no) {
      const std::size_t end = std::min(start + batch, n_eff);
      const IndexList idx(order.begin() + static_cast<long>(start),
                          order.begin() + static_cast<long>(end));
      const Matrix xb = rows_of(ds.x, idx);
      const LossBreakdown l =
          loss_and_gradients(params, xb, cfg.k, cfg.lambda1, grads);
      if (!std::isfinite(l.total) || !grads.all_finite()) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << batch_no;
        throw Error(msg.str());
      }
      adam_update(adam, params, grads);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train = loss(params, x_train, cfg.k, cfg.lambda1);
    if (x_val.rows() > 0) rec.val = loss(params, x_val, cfg.k, cfg.lambda1);
    else rec.val = rec.train;
    if (!std::isfinite(rec.train.total) || !std::isfinite(rec.val.total))
      throw Error("non-finite loss at end of epoch " + std::to_string(epoch));
    rec.kept_idx = topk_mask(score_vector(params), cfg.k).kept_idx;
    if (rec.val.total < best_val) {
      best_val = rec.val.total;
      report.best_epoch = epoch;
      report.best_params = params;
    }
    report.epochs.push_back(std::move(rec));
  }
  report.final_params = std::move(params);
  return report;
}

}  // namespace

TrainReport train(const Dataset& ds, const SplitSpec& split,
                  const TrainConfig& cfg) {
  return run_training(ds, split, cfg, std::nullopt);
}

TrainReport leave_one_out_retrain(const Dataset& ds, const SplitSpec& split,
                                  const TrainConfig& cfg, std::size_t removed) {
  if (std::find(split.train_idx.begin(), split.train_idx.end(), removed) ==
      split.train_idx.end())
    throw Error("leave_one_out_retrain: row " + std::to_string(removed) +
                " is not in the train split");
  return run_training(ds, split, cfg, removed);
}

nlohmann::json loss_to_json(const LossBreakdown& l) {
  return {{"selec", l.selec},
          {"score", l.score},
          {"total", l.total},
          {"lambda1", l.lambda1}};
}

nlohmann::json config_to_json(const TrainConfig& cfg) {
  return {{"lambda1", cfg.lambda1}, {"k", cfg.k},
          {"d", cfg.latent()},      {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size}, {"lr", cfg.lr},
          {"phi", to_string(cfg.phi)}, {"seed", cfg.seed},
          {"shuffle", cfg.shuffle}};
}

std::string report_to_jsonl(const TrainReport& report) {
  std::string out;
  for (const auto& rec : report.epochs) {
    nlohmann::json j = {{"epoch", rec.epoch},
                        {"train", loss_to_json(rec.train)},
                        {"val", loss_to_json(rec.val)},
                        {"kept_idx", rec.kept_idx},
                        {"best", rec.epoch == report.best_epoch}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace scoresel
