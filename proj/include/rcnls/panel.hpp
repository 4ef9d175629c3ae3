#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rcnls/types.hpp"

namespace rcnls {

//! Column mapping for delimited input files. Only `inputs` and `outputs` are
//! mandatory; an empty `period` name marks cross-section data (period 0).
struct PanelSchema {
  std::string id = "id";
  std::string period = "period";
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::vector<std::string> bad_outputs;
  std::vector<std::string> contextual;
};

//! Immutable observation table: M inputs, S desirable outputs, K undesirable
//! outputs and J contextual covariates per (firm, period) key.
class ProductionPanel {
 public:
  ProductionPanel(std::vector<std::string> firm_ids, std::vector<int> periods,
                  Matrix x, Matrix y, Matrix b = Matrix(), Matrix z = Matrix());

  Index n_obs() const { return x_.rows(); }
  Index n_inputs() const { return x_.cols(); }
  Index n_outputs() const { return y_.cols(); }
  Index n_bad_outputs() const { return b_.cols(); }
  Index n_contextual() const { return z_.cols(); }

  const std::vector<std::string>& firm_ids() const { return firm_ids_; }
  const std::vector<int>& periods() const { return periods_; }
  const Matrix& x() const { return x_; }
  const Matrix& y() const { return y_; }
  const Matrix& b() const { return b_; }
  const Matrix& z() const { return z_; }

  bool is_cross_section() const;

 private:
  std::vector<std::string> firm_ids_;
  std::vector<int> periods_;
  Matrix x_, y_, b_, z_;
};

//! Inputs after division by the Cobb-Douglas numeraire prod_m x_m^{d_m},
//! together with the log-ratio regressors ln x_num - ln x_m (m != numeraire).
struct NormalizedView {
  Index numeraire_index = 0;
  Vector d_weights;
  Matrix xtilde;
  Matrix log_ratios;
  Vector log_numeraire;
};

//! Build a single-period panel with synthetic firm ids "1".."n".
ProductionPanel make_cross_section(Matrix x, Matrix y, Matrix b = Matrix(),
                                   Matrix z = Matrix());

//! Parse a delimited stream with a header row into a validated panel.
//! Throws std::runtime_error naming the row and column of the first violation.
ProductionPanel load_panel(std::istream& source, const PanelSchema& schema);
ProductionPanel load_panel_file(const std::string& path, const PanelSchema& schema);

//! Cobb-Douglas normalization of the input block.
//! d_weights must be nonnegative and sum to 1 within 1e-9.
NormalizedView normalize(const ProductionPanel& panel, Index numeraire_index,
                         ConstVectorRef d_weights);

//! Same transform applied to an arbitrary positive column block (used for the
//! output-distance model where outputs play the numeraire role).
NormalizedView normalize_columns(ConstMatrixRef cols, Index numeraire_index,
                                 ConstVectorRef d_weights);

enum class ModelKind {
  naive_cnls,
  radial_cnls,
  radial_output_cnls,
  weight_restricted_panel,
  dea_vrs,
  sfa_cd,
  sfa_tl,
};

enum class ReturnsToScale { vrs, crs };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

//! Shared solver knobs; everything stochastic flows from `seed`.
struct SolverSettings {
  double feas_tol = 1e-8;
  double opt_tol = 1e-6;
  int max_iterations = 10000;
  int multistart = 5;
  std::uint64_t seed = 1;
  bool check_gradients = false;
};

//! Componentwise hyperplane-coefficient bounds for the weight-restricted
//! panel model (stage 2). lo <= up is enforced; beta/gamma bounds are
//! additionally clamped to be nonnegative.
struct WeightBounds {
  Vector beta_lo, beta_up;
  Vector gamma_lo, gamma_up;
  Vector mu_lo, mu_up;
};

struct ModelSpec {
  ModelKind model_kind = ModelKind::radial_cnls;
  Index numeraire_index = 0;
  Vector d_weights;  // empty means equal weights 1/M
  ReturnsToScale rts = ReturnsToScale::vrs;
  std::optional<WeightBounds> weight_bounds;
  SolverSettings solver;
  PanelSchema schema;
};

} // namespace rcnls
