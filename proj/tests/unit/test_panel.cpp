#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rcnls/panel.hpp"

using namespace rcnls;

namespace {
PanelSchema cross_section_schema(int m, int s) {
  PanelSchema sc;
  sc.period.clear();
  sc.inputs.clear();
  sc.outputs.clear();
  for (int j = 1; j <= m; ++j) sc.inputs.push_back("x" + std::to_string(j));
  for (int j = 1; j <= s; ++j) sc.outputs.push_back("y" + std::to_string(j));
  return sc;
}
} // namespace

TEST_CASE("load a small cross-section csv") {
  std::istringstream csv("id,x1,x2,y1\nA,1.0,2.0,3.0\nB,2.0,1.5,4.0\nC,0.5,0.5,1.0\n");
  const ProductionPanel p = load_panel(csv, cross_section_schema(2, 1));
  CHECK(p.n_obs() == 3);
  CHECK(p.n_inputs() == 2);
  CHECK(p.n_outputs() == 1);
  CHECK(p.is_cross_section());
  CHECK(p.x()(0, 0) == doctest::Approx(1.0));
  CHECK(p.x()(1, 1) == doctest::Approx(1.5));
  CHECK(p.y()(2, 0) == doctest::Approx(1.0));
  CHECK(p.firm_ids()[1] == "B");
}

TEST_CASE("nonpositive input is rejected naming row and column") {
  std::istringstream csv("id,x1,x2,y1\nA,1.0,2.0,3.0\nB,2.0,0.0,4.0\n");
  try {
    load_panel(csv, cross_section_schema(2, 1));
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("x2") != std::string::npos);
    CHECK(msg.find('2') != std::string::npos);
  }
}

TEST_CASE("missing column is named") {
  std::istringstream csv("id,x1,y1\nA,1.0,3.0\n");
  try {
    load_panel(csv, cross_section_schema(2, 1));
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("x2") != std::string::npos);
  }
}

TEST_CASE("duplicate firm-period pairs are rejected") {
  std::istringstream csv("id,period,x1,y1\nA,1,1.0,1.0\nA,1,2.0,2.0\n");
  PanelSchema sc = cross_section_schema(1, 1);
  sc.period = "period";
  CHECK_THROWS_AS(load_panel(csv, sc), std::invalid_argument);
}

TEST_CASE("panel with a period column") {
  std::istringstream csv(
      "id,period,x1,y1\nA,1,1.0,1.0\nA,2,1.1,1.2\nB,1,2.0,2.0\nB,2,2.1,2.2\n");
  PanelSchema sc = cross_section_schema(1, 1);
  sc.period = "period";
  const ProductionPanel p = load_panel(csv, sc);
  CHECK(p.n_obs() == 4);
  CHECK_FALSE(p.is_cross_section());
  CHECK(p.periods()[1] == 2);
}

TEST_CASE("semicolon-separated files parse too") {
  std::istringstream csv("id;x1;x2;y1\nA;1.0;2.0;3.0\n");
  const ProductionPanel p = load_panel(csv, cross_section_schema(2, 1));
  CHECK(p.n_obs() == 1);
  CHECK(p.x()(0, 1) == doctest::Approx(2.0));
}

TEST_CASE("normalization hand example") {
  Matrix x(1, 2);
  x << 4.0, 1.0;
  Vector d(2);
  d << 0.5, 0.5;
  const NormalizedView v = normalize_columns(x, 0, d);
  CHECK(v.log_numeraire[0] == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  CHECK(v.xtilde(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(v.xtilde(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  REQUIRE(v.log_ratios.cols() == 1);
  CHECK(v.log_ratios(0, 0) == doctest::Approx(std::log(4.0)).epsilon(1e-14));
}

TEST_CASE("degenerate weight on the numeraire") {
  Matrix x(1, 2);
  x << 2.0, 8.0;
  Vector d(2);
  d << 1.0, 0.0;
  const NormalizedView v = normalize_columns(x, 0, d);
  CHECK(v.xtilde(0, 0) == doctest::Approx(1.0));
  CHECK(v.xtilde(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("equal inputs normalize to ones") {
  Matrix x(3, 2);
  x << 7.0, 7.0, 0.3, 0.3, 11.0, 11.0;
  Vector d(2);
  d << 0.5, 0.5;
  const NormalizedView v = normalize_columns(x, 1, d);
  CHECK(v.xtilde.isApproxToConstant(1.0, 1e-14));
  CHECK(v.log_ratios.cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("weight vector must be a proper convex combination") {
  Matrix x(1, 2);
  x << 1.0, 2.0;
  Vector bad(2);
  bad << 0.7, 0.7;
  CHECK_THROWS_AS(normalize_columns(x, 0, bad), std::invalid_argument);
  Vector neg(2);
  neg << 1.5, -0.5;
  CHECK_THROWS_AS(normalize_columns(x, 0, neg), std::invalid_argument);
  Vector ok(2);
  ok << 0.5, 0.5;
  CHECK_THROWS_AS(normalize_columns(x, 2, ok), std::invalid_argument); // bad numeraire
}

TEST_CASE("normalization is invariant to common scaling and reconstructs inputs") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  Matrix x(6, 3);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) x(i, j) = u(rng);
  Vector d(3);
  d << 0.2, 0.5, 0.3;
  const NormalizedView a = normalize_columns(x, 0, d);
  const NormalizedView b = normalize_columns(Matrix(3.7 * x), 0, d);
  CHECK((a.xtilde - b.xtilde).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.log_ratios - b.log_ratios).cwiseAbs().maxCoeff() < 1e-12);
  // Round trip: xtilde_ij * prod_k x_ik^d_k == x_ij.
  for (Index i = 0; i < x.rows(); ++i) {
    const double piece = std::exp(a.log_numeraire[i]);
    for (Index j = 0; j < x.cols(); ++j)
      CHECK(a.xtilde(i, j) * piece == doctest::Approx(x(i, j)).epsilon(1e-12));
  }
}

TEST_CASE("model kind names round trip") {
  for (ModelKind k : {ModelKind::radial_cnls, ModelKind::radial_output_cnls,
                      ModelKind::naive_cnls, ModelKind::weight_restricted_panel,
                      ModelKind::dea_vrs, ModelKind::sfa_cd, ModelKind::sfa_tl}) {
    CHECK(model_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(model_kind_from_string("nope"), std::invalid_argument);
}
