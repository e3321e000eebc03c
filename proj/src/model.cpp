#include "scoresel/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "scoresel/error.hpp"

namespace scoresel {

std::string to_string(ScorerMap phi) {
  return phi == ScorerMap::kAbs ? "abs" : "square";
}

ScorerMap parse_scorer_map(const std::string& name) {
  if (name == "abs") return ScorerMap::kAbs;
  if (name == "square") return ScorerMap::kSquare;
  throw ConfigError("unknown scorer map '" + name + "' (expected abs|square)");
}

bool ModelParams::all_finite() const {
  return w_m.allFinite() && w_e.allFinite() && w_d.allFinite();
}

ParamGrads ParamGrads::zeros_like(const ModelParams& p) {
  return {Vector::Zero(p.w_m.size()),
          Matrix::Zero(p.w_e.rows(), p.w_e.cols()),
          Matrix::Zero(p.w_d.rows(), p.w_d.cols())};
}

bool ParamGrads::all_finite() const {
  return w_m.allFinite() && w_e.allFinite() && w_d.allFinite();
}

Vector score_vector(const ModelParams& params) {
  if (params.phi == ScorerMap::kAbs) return params.w_m.cwiseAbs();
  return params.w_m.cwiseAbs2();
}

TopKMask topk_mask(const Vector& scores, std::size_t k) {
  const auto m = static_cast<std::size_t>(scores.size());
  if (k < 1 || k > m)
    throw Error("topk_mask: k=" + std::to_string(k) + " outside [1, " +
                std::to_string(m) + "]");
  IndexList order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&scores](std::size_t a, std::size_t b) {
                     return scores[static_cast<Eigen::Index>(a)] >
                            scores[static_cast<Eigen::Index>(b)];
                   });
  TopKMask out;
  out.k = k;
  out.kept_idx.assign(order.begin(), order.begin() + static_cast<long>(k));
  std::sort(out.kept_idx.begin(), out.kept_idx.end());
  out.mask.assign(m, 0);
  for (std::size_t j : out.kept_idx) out.mask[j] = 1;
  return out;
}

namespace {

void check_dims(const ModelParams& params, const Matrix& x) {
  const auto m = static_cast<Eigen::Index>(params.features());
  if (x.cols() != m || params.w_e.rows() != m || params.w_d.cols() != m ||
      params.w_e.cols() != params.w_d.rows())
    throw Error("dimension mismatch: x has " + std::to_string(x.cols()) +
                " columns, model has " + std::to_string(m) + " features");
}

Vector masked(const Vector& s, const TopKMask& mask) {
  Vector out = s;
  for (Eigen::Index j = 0; j < out.size(); ++j)
    if (!mask.mask[static_cast<std::size_t>(j)]) out[j] = 0.0;
  return out;
}

// Reconstruction through one branch with input scaling u.
struct BranchPass {
  Matrix scaled;  // x * diag(u)
  Matrix hidden;  // scaled * w_e
  Matrix resid;   // hidden * w_d - x
};

BranchPass run_branch(const ModelParams& params, const Matrix& x,
                      const Vector& u) {
  BranchPass p;
  p.scaled = x * u.asDiagonal();
  p.hidden = p.scaled * params.w_e;
  p.resid = p.hidden * params.w_d - x;
  return p;
}

// Accumulates weight * d(mean ||resid||^2)/d(params) into grads; returns the
// gradient with respect to the scaling vector u.
Vector backprop_branch(const ModelParams& params, const Matrix& x,
                       const BranchPass& p, double weight, ParamGrads& grads) {
  const double n = static_cast<double>(x.rows());
  const Matrix g_out = (2.0 * weight / n) * p.resid;
  grads.w_d.noalias() += p.hidden.transpose() * g_out;
  const Matrix g_hidden = g_out * params.w_d.transpose();
  grads.w_e.noalias() += p.scaled.transpose() * g_hidden;
  const Matrix g_scaled = g_hidden * params.w_e.transpose();
  return g_scaled.cwiseProduct(x).colwise().sum().transpose();
}

Vector phi_derivative(const ModelParams& params) {
  const Vector& w = params.w_m;
  if (params.phi == ScorerMap::kSquare) return 2.0 * w;
  Vector out(w.size());
  for (Eigen::Index j = 0; j < w.size(); ++j)
    out[j] = w[j] > 0.0 ? 1.0 : (w[j] < 0.0 ? -1.0 : 0.0);
  return out;
}

}  // namespace

Matrix forward(const ModelParams& params, const Matrix& x,
               const TopKMask* mask) {
  check_dims(params, x);
  Vector s = score_vector(params);
  if (mask) s = masked(s, *mask);
  return ((x * s.asDiagonal()) * params.w_e) * params.w_d;
}

Vector selector_row_losses(const ModelParams& params, const Matrix& x,
                           std::size_t k) {
  const TopKMask mask = topk_mask(score_vector(params), k);
  return (forward(params, x, &mask) - x).rowwise().squaredNorm();
}

LossBreakdown loss(const ModelParams& params, const Matrix& x, std::size_t k,
                   double lambda1) {
  if (x.rows() == 0) throw Error("loss: empty batch");
  const Vector s = score_vector(params);
  const TopKMask mask = topk_mask(s, k);
  const double n = static_cast<double>(x.rows());
  LossBreakdown out;
  out.lambda1 = lambda1;
  out.selec = (forward(params, x, &mask) - x).squaredNorm() / n;
  out.score = (forward(params, x) - x).squaredNorm() / n;
  out.total = out.selec + lambda1 * out.score;
  return out;
}

LossBreakdown loss_and_gradients(const ModelParams& params, const Matrix& x,
                                 std::size_t k, double lambda1,
                                 ParamGrads& grads) {
  check_dims(params, x);
  if (x.rows() == 0) throw Error("gradients: empty batch");
  const Vector s = score_vector(params);
  const TopKMask mask = topk_mask(s, k);
  const Vector s_sel = masked(s, mask);

  grads = ParamGrads::zeros_like(params);
  const BranchPass sel = run_branch(params, x, s_sel);
  const BranchPass sco = run_branch(params, x, s);
  Vector g_s = backprop_branch(params, x, sel, 1.0, grads);
  for (Eigen::Index j = 0; j < g_s.size(); ++j)
    if (!mask.mask[static_cast<std::size_t>(j)]) g_s[j] = 0.0;
  if (lambda1 != 0.0) g_s += backprop_branch(params, x, sco, lambda1, grads);
  grads.w_m = g_s.cwiseProduct(phi_derivative(params));

  const double n = static_cast<double>(x.rows());
  LossBreakdown out;
  out.lambda1 = lambda1;
  out.selec = sel.resid.squaredNorm() / n;
  out.score = sco.resid.squaredNorm() / n;
  out.total = out.selec + lambda1 * out.score;
  return out;
}

ParamGrads gradients(const ModelParams& params, const Matrix& x, std::size_t k,
                     double lambda1) {
  ParamGrads g;
  loss_and_gradients(params, x, k, lambda1, g);
  return g;
}

nlohmann::json params_to_json(const ModelParams& params) {
  auto rows = [](const Matrix& m) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      out.push_back(std::move(row));
    }
    return out;
  };
  nlohmann::json w_m = nlohmann::json::array();
  for (Eigen::Index j = 0; j < params.w_m.size(); ++j)
    w_m.push_back(params.w_m[j]);
  return {{"phi", to_string(params.phi)},
          {"w_m", std::move(w_m)},
          {"w_e", rows(params.w_e)},
          {"w_d", rows(params.w_d)}};
}

ModelParams params_from_json(const nlohmann::json& j) {
  auto matrix = [](const nlohmann::json& rows, const char* name) {
    const auto r = static_cast<Eigen::Index>(rows.size());
    const auto c = r ? static_cast<Eigen::Index>(rows.at(0).size()) : 0;
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      const auto& row = rows.at(static_cast<std::size_t>(i));
      if (static_cast<Eigen::Index>(row.size()) != c)
        throw Error(std::string("ragged matrix '") + name + "' in params");
      for (Eigen::Index k = 0; k < c; ++k)
        m(i, k) = row.at(static_cast<std::size_t>(k)).get<double>();
    }
    return m;
  };
  ModelParams p;
  p.phi = parse_scorer_map(j.at("phi").get<std::string>());
  const auto w = j.at("w_m").get<std::vector<double>>();
  p.w_m = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
  p.w_e = matrix(j.at("w_e"), "w_e");
  p.w_d = matrix(j.at("w_d"), "w_d");
  const auto m = p.w_m.size();
  if (p.w_e.rows() != m || p.w_d.cols() != m || p.w_e.cols() != p.w_d.rows())
    throw Error("params: inconsistent shapes");
  return p;
}

void save_params(const ModelParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << params_to_json(params).dump() << '\n';
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return params_from_json(nlohmann::json::parse(in));
}

}  // namespace scoresel
