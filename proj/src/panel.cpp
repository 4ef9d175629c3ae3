#include "rcnls/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace rcnls {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_row(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, delim)) out.push_back(trim(cell));
  if (!line.empty() && line.back() == delim) out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw std::invalid_argument("load_panel: non-numeric cell at row " +
                             std::to_string(row) + ", column '" + col + "'");
  }
  return value;
}

} // namespace

ProductionPanel::ProductionPanel(std::vector<std::string> firm_ids,
                                 std::vector<int> periods, Matrix x, Matrix y,
                                 Matrix b, Matrix z)
    : firm_ids_(std::move(firm_ids)),
      periods_(std::move(periods)),
      x_(std::move(x)),
      y_(std::move(y)),
      b_(std::move(b)),
      z_(std::move(z)) {
  const Index n = x_.rows();
  if (n == 0 || x_.cols() == 0 || y_.cols() == 0)
    throw std::invalid_argument("ProductionPanel: need at least one observation, one input and one output");
  if (y_.rows() != n || static_cast<Index>(firm_ids_.size()) != n ||
      static_cast<Index>(periods_.size()) != n)
    throw std::invalid_argument("ProductionPanel: inconsistent row counts");
  if (b_.size() == 0) b_.resize(n, 0);
  if (z_.size() == 0) z_.resize(n, 0);
  if (b_.rows() != n || z_.rows() != n)
    throw std::invalid_argument("ProductionPanel: inconsistent row counts in b/z");
  for (Index i = 0; i < n; ++i) {
    for (Index m = 0; m < x_.cols(); ++m)
      if (!(x_(i, m) > 0.0) || !std::isfinite(x_(i, m)))
        throw std::invalid_argument("ProductionPanel: non-positive input x" +
                                    std::to_string(m + 1) + " at row " + std::to_string(i + 1));
    for (Index s = 0; s < y_.cols(); ++s)
      if (y_(i, s) < 0.0 || !std::isfinite(y_(i, s)))
        throw std::invalid_argument("ProductionPanel: negative output y" +
                                    std::to_string(s + 1) + " at row " + std::to_string(i + 1));
    for (Index k = 0; k < b_.cols(); ++k)
      if (b_(i, k) < 0.0 || !std::isfinite(b_(i, k)))
        throw std::invalid_argument("ProductionPanel: negative bad output b" +
                                    std::to_string(k + 1) + " at row " + std::to_string(i + 1));
  }
  std::map<std::pair<std::string, int>, Index> seen;
  for (Index i = 0; i < n; ++i) {
    auto key = std::make_pair(firm_ids_[i], periods_[i]);
    auto [it, inserted] = seen.emplace(key, i);
    if (!inserted)
      throw std::invalid_argument("ProductionPanel: duplicate (firm, period) key ('" +
                                  firm_ids_[i] + "', " + std::to_string(periods_[i]) + ")");
  }
}

bool ProductionPanel::is_cross_section() const {
  return std::all_of(periods_.begin(), periods_.end(),
                     [&](int p) { return p == periods_.front(); });
}

ProductionPanel make_cross_section(Matrix x, Matrix y, Matrix b, Matrix z) {
  const Index n = x.rows();
  std::vector<std::string> ids(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) ids[static_cast<std::size_t>(i)] = std::to_string(i + 1);
  std::vector<int> periods(static_cast<std::size_t>(n), 0);
  return ProductionPanel(std::move(ids), std::move(periods), std::move(x),
                         std::move(y), std::move(b), std::move(z));
}

ProductionPanel load_panel(std::istream& source, const PanelSchema& schema) {
  if (schema.inputs.empty() || schema.outputs.empty())
    throw std::invalid_argument("load_panel: schema must map at least one input and one output column");
  std::string line;
  if (!std::getline(source, line))
    throw std::invalid_argument("load_panel: empty input stream");
  const char delim = line.find(';') != std::string::npos && line.find(',') == std::string::npos ? ';' : ',';
  const auto header = split_row(line, delim);

  auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    return std::nullopt;
  };
  auto require_column = [&](const std::string& name) -> std::size_t {
    auto c = column_of(name);
    if (!c) throw std::invalid_argument("load_panel: missing column '" + name + "'");
    return *c;
  };

  const std::size_t id_col = require_column(schema.id);
  std::optional<std::size_t> period_col;
  if (!schema.period.empty()) period_col = column_of(schema.period);
  std::vector<std::size_t> x_cols, y_cols, b_cols, z_cols;
  for (const auto& c : schema.inputs) x_cols.push_back(require_column(c));
  for (const auto& c : schema.outputs) y_cols.push_back(require_column(c));
  for (const auto& c : schema.bad_outputs) b_cols.push_back(require_column(c));
  for (const auto& c : schema.contextual) z_cols.push_back(require_column(c));

  std::vector<std::string> ids;
  std::vector<int> periods;
  std::vector<std::vector<double>> xs, ys, bs, zs;
  std::size_t row = 1;
  while (std::getline(source, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split_row(line, delim);
    if (cells.size() < header.size())
      throw std::invalid_argument("load_panel: row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " cells, header has " +
                               std::to_string(header.size()));
    ids.push_back(cells[id_col]);
    if (period_col) {
      periods.push_back(static_cast<int>(parse_cell(cells[*period_col], row, schema.period)));
    } else {
      periods.push_back(0);
    }
    auto grab = [&](const std::vector<std::size_t>& cols,
                    const std::vector<std::string>& names) {
      std::vector<double> v(cols.size());
      for (std::size_t k = 0; k < cols.size(); ++k)
        v[k] = parse_cell(cells[cols[k]], row, names[k]);
      return v;
    };
    xs.push_back(grab(x_cols, schema.inputs));
    ys.push_back(grab(y_cols, schema.outputs));
    bs.push_back(grab(b_cols, schema.bad_outputs));
    zs.push_back(grab(z_cols, schema.contextual));
    for (std::size_t k = 0; k < xs.back().size(); ++k)
      if (!(xs.back()[k] > 0.0))
        throw std::invalid_argument("load_panel: non-positive input at row " +
                                 std::to_string(row) + ", column '" + schema.inputs[k] + "'");
  }
  const Index n = static_cast<Index>(ids.size());
  if (n == 0) throw std::invalid_argument("load_panel: no data rows");

  auto to_matrix = [&](const std::vector<std::vector<double>>& rows_of, Index cols) {
    Matrix m(n, cols);
    for (Index i = 0; i < n; ++i)
      for (Index c = 0; c < cols; ++c) m(i, c) = rows_of[i][c];
    return m;
  };
  return ProductionPanel(std::move(ids), std::move(periods),
                         to_matrix(xs, static_cast<Index>(x_cols.size())),
                         to_matrix(ys, static_cast<Index>(y_cols.size())),
                         to_matrix(bs, static_cast<Index>(b_cols.size())),
                         to_matrix(zs, static_cast<Index>(z_cols.size())));
}

ProductionPanel load_panel_file(const std::string& path, const PanelSchema& schema) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_panel: cannot open '" + path + "'");
  return load_panel(in, schema);
}

NormalizedView normalize_columns(ConstMatrixRef cols, Index numeraire_index,
                                 ConstVectorRef d_weights) {
  const Index n = cols.rows(), m = cols.cols();
  if (numeraire_index < 0 || numeraire_index >= m)
    throw std::invalid_argument("normalize: numeraire index out of range");
  if (d_weights.size() != m)
    throw std::invalid_argument("normalize: d_weights length must match column count");
  if ((d_weights.array() < 0.0).any())
    throw std::invalid_argument("normalize: d_weights must be nonnegative");
  if (std::abs(d_weights.sum() - 1.0) > 1e-9)
    throw std::invalid_argument("normalize: d_weights must sum to 1 within 1e-9");
  if ((cols.array() <= 0.0).any())
    throw std::invalid_argument("normalize: columns must be strictly positive");

  NormalizedView view;
  view.numeraire_index = numeraire_index;
  view.d_weights = d_weights;
  const Matrix logs = cols.array().log().matrix();
  const Vector log_norm = logs * d_weights;  // ln of the Cobb-Douglas numeraire
  view.xtilde = (logs.colwise() - log_norm).array().exp().matrix();
  view.log_numeraire = log_norm;
  view.log_ratios.resize(n, m - 1);
  Index out = 0;
  for (Index c = 0; c < m; ++c) {
    if (c == numeraire_index) continue;
    view.log_ratios.col(out++) = logs.col(numeraire_index) - logs.col(c);
  }
  return view;
}

NormalizedView normalize(const ProductionPanel& panel, Index numeraire_index,
                         ConstVectorRef d_weights) {
  return normalize_columns(panel.x(), numeraire_index, d_weights);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::naive_cnls: return "naive-cnls";
    case ModelKind::radial_cnls: return "radial-cnls";
    case ModelKind::radial_output_cnls: return "radial-output-cnls";
    case ModelKind::weight_restricted_panel: return "weight-restricted-panel";
    case ModelKind::dea_vrs: return "dea-vrs";
    case ModelKind::sfa_cd: return "sfa-cd";
    case ModelKind::sfa_tl: return "sfa-tl";
  }
  throw std::logic_error("to_string: unknown model kind");
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "naive-cnls") return ModelKind::naive_cnls;
  if (name == "radial-cnls") return ModelKind::radial_cnls;
  if (name == "radial-output-cnls") return ModelKind::radial_output_cnls;
  if (name == "weight-restricted-panel") return ModelKind::weight_restricted_panel;
  if (name == "dea-vrs") return ModelKind::dea_vrs;
  if (name == "sfa-cd") return ModelKind::sfa_cd;
  if (name == "sfa-tl") return ModelKind::sfa_tl;
  throw std::invalid_argument("unknown model kind '" + name + "'");
}

} // namespace rcnls
