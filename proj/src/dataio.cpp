#include "scoresel/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "scoresel/error.hpp"
#include "scoresel/rng.hpp"

namespace scoresel {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '"')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' ||
                   s[e - 1] == '"'))
    --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(std::string_view(line).substr(start)));
      break;
    }
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

bool parse_real(const std::string& field, double& value) {
  if (field.empty()) return false;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last && std::isfinite(value);
}

}  // namespace

int Dataset::num_classes() const {
  if (!labels || labels->empty()) return 0;
  return *std::max_element(labels->begin(), labels->end()) + 1;
}

const IndexList& part(const SplitSpec& split, SplitPart which) {
  switch (which) {
    case SplitPart::kTrain:
      return split.train_idx;
    case SplitPart::kVal:
      return split.val_idx;
    case SplitPart::kTest:
      return split.test_idx;
  }
  return split.train_idx;
}

SplitPart parse_split_part(const std::string& name) {
  if (name == "train") return SplitPart::kTrain;
  if (name == "val") return SplitPart::kVal;
  if (name == "test") return SplitPart::kTest;
  throw Error("unknown split name '" + name + "' (expected train|val|test)");
}

Dataset load_csv(const std::string& path, bool has_header,
                 const std::optional<std::string>& label_column) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);

  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t arity = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_fields(line);
    if (arity == 0) arity = fields.size();
    if (fields.size() != arity) {
      std::ostringstream msg;
      msg << path << ": line " << line_no << " has " << fields.size()
          << " fields, expected " << arity;
      throw Error(msg.str());
    }
    if (has_header && header.empty()) {
      header = std::move(fields);
      continue;
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw Error(path + ": no data rows");

  std::optional<std::size_t> label_col;
  if (label_column) {
    if (has_header) {
      auto it = std::find(header.begin(), header.end(), *label_column);
      if (it == header.end())
        throw Error(path + ": label column '" + *label_column + "' not found");
      label_col = static_cast<std::size_t>(it - header.begin());
    } else {
      std::size_t c = 0;
      auto [ptr, ec] = std::from_chars(
          label_column->data(), label_column->data() + label_column->size(), c);
      if (ec != std::errc() || c >= arity)
        throw Error(path + ": label column '" + *label_column +
                    "' is not a valid column number");
      label_col = c;
    }
  }

  const std::size_t m = arity - (label_col ? 1 : 0);
  if (m == 0) throw Error(path + ": no feature columns");

  Dataset ds;
  ds.x.resize(static_cast<Eigen::Index>(rows.size()),
              static_cast<Eigen::Index>(m));
  for (std::size_t c = 0; c < arity; ++c) {
    if (label_col && c == *label_col) continue;
    ds.feature_names.push_back(has_header ? header[c]
                                          : "f" + std::to_string(c));
  }

  std::vector<std::string> raw_labels;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::size_t out_c = 0;
    for (std::size_t c = 0; c < arity; ++c) {
      if (label_col && c == *label_col) {
        raw_labels.push_back(rows[r][c]);
        continue;
      }
      double v = 0.0;
      if (!parse_real(rows[r][c], v)) {
        std::ostringstream msg;
        msg << path << ": cannot parse '" << rows[r][c] << "' as a real at row "
            << (r + 1) << ", column "
            << (has_header ? header[c] : std::to_string(c + 1));
        throw Error(msg.str());
      }
      ds.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(out_c++)) =
          v;
    }
  }

  if (label_col) {
    // Numeric labels sort numerically, anything else lexicographically.
    bool numeric = true;
    for (const auto& s : raw_labels) {
      double v = 0.0;
      if (!parse_real(s, v)) {
        numeric = false;
        break;
      }
    }
    std::vector<std::string> distinct(raw_labels.begin(), raw_labels.end());
    std::sort(distinct.begin(), distinct.end(),
              [numeric](const std::string& a, const std::string& b) {
                if (!numeric) return a < b;
                double va = 0.0;
                double vb = 0.0;
                parse_real(a, va);
                parse_real(b, vb);
                return va < vb;
              });
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());
    std::map<std::string, int> ids;
    for (std::size_t i = 0; i < distinct.size(); ++i)
      ids[distinct[i]] = static_cast<int>(i);
    std::vector<int> labels;
    labels.reserve(raw_labels.size());
    for (const auto& s : raw_labels) labels.push_back(ids.at(s));
    ds.labels = std::move(labels);
  }
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path,
               const std::string& label_name) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out.precision(17);
  const std::size_t m = ds.features();
  for (std::size_t c = 0; c < m; ++c) {
    if (c) out << ',';
    out << (c < ds.feature_names.size() ? ds.feature_names[c]
                                        : "f" + std::to_string(c));
  }
  if (ds.labels) out << ',' << label_name;
  out << '\n';
  for (Eigen::Index r = 0; r < ds.x.rows(); ++r) {
    for (Eigen::Index c = 0; c < ds.x.cols(); ++c) {
      if (c) out << ',';
      out << ds.x(r, c);
    }
    if (ds.labels) out << ',' << (*ds.labels)[static_cast<std::size_t>(r)];
    out << '\n';
  }
}

SplitSpec split(const Dataset& ds, const std::array<double, 3>& ratios,
                std::uint64_t seed) {
  const std::size_t n = ds.rows();
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r >= 0.0)) throw Error("split ratios must be non-negative");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("split ratios must sum to 1");
  if (n < 3) throw Error("split needs at least 3 rows");

  const auto n_val =
      static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n) + 1e-9));
  const auto n_test =
      static_cast<std::size_t>(std::floor(ratios[2] * static_cast<double>(n) + 1e-9));
  const std::size_t n_train = n - n_val - n_test;
  const std::array<std::size_t, 3> sizes{n_train, n_val, n_test};
  for (std::size_t i = 0; i < 3; ++i) {
    if (ratios[i] > 0.0 && sizes[i] == 0)
      throw Error("split part " + std::to_string(i) +
                  " would be empty; dataset too small for the ratios");
  }

  Rng rng(seed);
  const IndexList perm = rng.permutation(n);
  SplitSpec out;
  out.ratios = ratios;
  out.seed = seed;
  out.train_idx.assign(perm.begin(), perm.begin() + n_train);
  out.val_idx.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
  out.test_idx.assign(perm.begin() + n_train + n_val, perm.end());
  return out;
}

Dataset standardize(const Dataset& ds, const SplitSpec& split) {
  if (split.train_idx.empty()) throw Error("standardize: empty train split");
  const Eigen::Index m = ds.x.cols();
  const double n = static_cast<double>(split.train_idx.size());
  std::vector<FeatureScaling> scaling(static_cast<std::size_t>(m));
  for (Eigen::Index c = 0; c < m; ++c) {
    double mean = 0.0;
    for (std::size_t r : split.train_idx)
      mean += ds.x(static_cast<Eigen::Index>(r), c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r : split.train_idx) {
      const double dv = ds.x(static_cast<Eigen::Index>(r), c) - mean;
      var += dv * dv;
    }
    var /= n;
    const double sd = std::sqrt(var);
    // Relative threshold: a column whose spread is rounding noise is constant.
    const bool constant = sd <= 1e-12 * std::max(1.0, std::abs(mean));
    scaling[static_cast<std::size_t>(c)] = {mean, constant ? 1.0 : sd};
  }
  Dataset out = ds;
  out.x = apply_standardization(ds.x, scaling);
  out.standardization = std::move(scaling);
  return out;
}

Matrix apply_standardization(const Matrix& raw,
                             const std::vector<FeatureScaling>& scaling) {
  if (static_cast<std::size_t>(raw.cols()) != scaling.size())
    throw Error("apply_standardization: column count mismatch");
  Matrix out(raw.rows(), raw.cols());
  for (Eigen::Index c = 0; c < raw.cols(); ++c) {
    const auto& s = scaling[static_cast<std::size_t>(c)];
    out.col(c) = (raw.col(c).array() - s.mean) / s.scale;
  }
  return out;
}

SplitSpec subsample(const Dataset& ds, const SplitSpec& split, std::size_t n,
                    std::uint64_t seed) {
  (void)ds;
  if (n > split.train_idx.size())
    throw Error("subsample: n=" + std::to_string(n) + " exceeds train size " +
                std::to_string(split.train_idx.size()));
  // Canonical order first so the result depends only on the train set.
  IndexList pool = split.train_idx;
  std::sort(pool.begin(), pool.end());
  Rng rng(seed);
  rng.shuffle(pool);
  SplitSpec out = split;
  out.train_idx.assign(pool.begin(), pool.begin() + static_cast<long>(n));
  std::sort(out.train_idx.begin(), out.train_idx.end());
  return out;
}

Matrix rows_of(const Matrix& x, const IndexList& idx) {
  Matrix out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) =
        x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

nlohmann::json split_to_json(const SplitSpec& split) {
  return {{"seed", split.seed},
          {"train", split.train_idx},
          {"val", split.val_idx},
          {"test", split.test_idx}};
}

SplitSpec split_from_json(const nlohmann::json& j) {
  SplitSpec s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train_idx = j.at("train").get<IndexList>();
  s.val_idx = j.at("val").get<IndexList>();
  s.test_idx = j.at("test").get<IndexList>();
  const double n = static_cast<double>(s.train_idx.size() + s.val_idx.size() +
                                       s.test_idx.size());
  if (n > 0)
    s.ratios = {static_cast<double>(s.train_idx.size()) / n,
                static_cast<double>(s.val_idx.size()) / n,
                static_cast<double>(s.test_idx.size()) / n};
  return s;
}

}  // namespace scoresel
