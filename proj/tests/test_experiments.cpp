#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "zenmet/experiments.hpp"

using namespace zenmet;
using doctest::Approx;

namespace {

const ProbeSpec kProbe(1.0, M_PI);

PrecisionSeries synthetic_series(const std::vector<double>& dg, double h = 0.1) {
  PrecisionSeries s;
  for (std::size_t i = 0; i < dg.size(); ++i) {
    s.times.push_back(static_cast<double>(i) * h);
    s.delta_gamma.push_back(dg[i]);
    s.mean_M.push_back(0.0);
    s.delta_M.push_back(1.0);
  }
  return s;
}

}  // namespace

TEST_CASE("local minima extraction on synthetic data") {
  const double nan = std::numeric_limits<double>::quiet_NaN();

  // Parabola (t-1)^2 + 0.5 sampled on a grid: one refined minimum.
  {
    std::vector<double> dg;
    for (int i = 0; i <= 20; ++i) {
      const double t = 0.1 * i;
      dg.push_back((t - 1.0) * (t - 1.0) + 0.5);
    }
    const auto minima = find_local_minima(synthetic_series(dg));
    REQUIRE(minima.size() == 1);
    CHECK(minima[0].first == Approx(1.0).epsilon(1e-12));
    CHECK(minima[0].second == Approx(0.5).epsilon(1e-12));
  }
  // Strictly monotone series: nothing.
  CHECK(find_local_minima(synthetic_series({5, 4, 3, 2, 1})).empty());
  // Fewer than three defined points: nothing.
  CHECK(find_local_minima(synthetic_series({nan, 2.0, nan, 1.0, nan})).empty());
  // An undefined point breaks the window around the would-be minimum.
  {
    std::vector<double> dg = {3, 2, 1, 2, 3, nan, 3, 1.5, 2.5};
    const auto minima = find_local_minima(synthetic_series(dg));
    REQUIRE(minima.size() == 2);
    std::vector<double> broken = {3, 2, 1, 2, 3, nan, 1.5, 2.5, 3.5};
    CHECK(find_local_minima(synthetic_series(broken)).size() == 1);
  }
}

TEST_CASE("noiseless precision minima sit at gamma t = (2m+1) pi/2") {
  const NoiseSpec none(0.0, 1.0, 1.0);
  const Trajectory traj = solve_sensitivity(kProbe, none, 3.0, 0.002);
  const InputState st(100.0, 0.05);
  PrecisionSeries series = delta_gamma_series(st, traj);
  annotate_local_minima(series);
  REQUIRE(series.local_minima.size() == 3);
  for (std::size_t m = 0; m < series.local_minima.size(); ++m) {
    const auto [tm, vm] = series.local_minima[m];
    const double t_expect = (2.0 * static_cast<double>(m) + 1.0) * M_PI / (2.0 * M_PI);
    // The 1/t prefactor drags each minimum slightly past the phase-matched
    // time and slightly below the fixed-phase value; both effects shrink
    // like 1/t (measured shifts here: 1.22e-2, 4.1e-3, 2.4e-3).
    CHECK(std::fabs(tm - t_expect) <= 0.002 + 0.015 / (2.0 * m + 1.0));
    const double tol = m == 0 ? 0.02 : 0.01;
    CHECK(vm == Approx(ideal_min_delta_gamma(st, tm)).epsilon(tol));
    CHECK(vm == Approx(ideal_min_delta_gamma(st, t_expect)).epsilon(tol));
  }
}

TEST_CASE("optimize_beta locates the precision optimum") {
  auto ideal_objective = [](double N) {
    return [N](double beta) { return ideal_min_delta_gamma(InputState(N, beta), 1.0); };
  };
  {
    const BetaOptimum opt = optimize_beta(ideal_objective(1e4), 1e4);
    CHECK_FALSE(opt.flat);
    CHECK(std::fabs(opt.beta - 0.005) <= 0.2 * 0.005);
    // The golden-section refinement lands on the scan optimum.
    CHECK(opt.beta == Approx(0.004851).epsilon(1e-2));
    CHECK(opt.value == Approx(0.0010061241).epsilon(1e-4));
  }
  {
    const BetaOptimum opt = optimize_beta(ideal_objective(1e6), 1e6);
    CHECK(std::fabs(opt.value - zeno_limit(1e6, 1.0)) <= 0.01 * zeno_limit(1e6, 1.0));
  }
  {
    const BetaOptimum opt = optimize_beta([](double) { return 2.5; }, 100.0);
    CHECK(opt.flat);
    CHECK(opt.beta == Approx(0.25).epsilon(1e-4));
  }
  bool threw = false;
  try {
    optimize_beta([](double b) { return b > 0.3 ? std::nan("") : 1.0; }, 10.0);
  } catch (const std::runtime_error& e) {
    threw = true;
    CHECK(std::string(e.what()).find("beta") != std::string::npos);
  }
  CHECK(threw);
  CHECK_THROWS_AS(optimize_beta([](double) { return 1.0; }, 0.0), std::domain_error);
}

TEST_CASE("sweep validation") {
  SweepSettings s;
  s.axis = "nope";
  s.values = {1.0, 2.0};
  CHECK_THROWS_AS(run_sweep(s), std::invalid_argument);
  s.axis = "omega_c";
  s.values = {};
  CHECK_THROWS_AS(run_sweep(s), std::invalid_argument);
  s.values = {2.0, 1.0};
  CHECK_THROWS_AS(run_sweep(s), std::invalid_argument);
}

TEST_CASE("omega_c sweep crosses the bound-state threshold") {
  SweepSettings s;
  s.axis = "omega_c";
  s.values = {100.0, 207.0, 207.2, 300.0};
  s.h = 1e-3;
  s.t_max = 30.0;
  s.with_precision = false;
  s.threads = 2;
  const SweepResult result = run_sweep(s);
  REQUIRE(result.rows.size() == 4);
  CHECK_FALSE(result.rows[0].exists);
  CHECK_FALSE(result.rows[1].exists);  // 207.0 < (1+pi)/0.02
  CHECK(result.rows[2].exists);        // 207.2 > (1+pi)/0.02
  CHECK(result.rows[3].exists);

  CHECK(result.rows[0].plateau_mean < 0.05);
  CHECK(result.rows[3].plateau_mean == Approx(result.rows[3].Z).epsilon(0.02));
  for (const auto& row : result.rows) {
    if (row.exists) {
      CHECK(row.varpi_b < 0.0);
      CHECK(row.Z > 0.0);
      CHECK(row.Z <= 1.0);
    } else {
      CHECK(std::isnan(row.varpi_b));
      CHECK(std::isnan(row.Z));
    }
    CHECK(row.h_used == Approx(1e-3));
  }
}

TEST_CASE("N and t sweeps reuse one trajectory and scale as expected") {
  {
    SweepSettings s;
    s.axis = "N";
    s.values = {10.0, 1000.0};
    s.h = 1.5e-3;
    s.t_max = 30.0;
    s.threads = 1;
    const SweepResult result = run_sweep(s);
    REQUIRE(result.rows.size() == 2);
    CHECK(result.rows[0].min_delta_gamma > result.rows[1].min_delta_gamma);
    CHECK(result.rows[0].exists);
    CHECK(result.rows[0].Z == Approx(result.rows[1].Z).epsilon(1e-14));
  }
  {
    SweepSettings s;
    s.axis = "t";
    s.values = {10.0, 20.0, 30.0};
    s.h = 1.5e-3;
    const SweepResult result = run_sweep(s);
    REQUIRE(result.rows.size() == 3);
    // Bound-state regime: the long-time minima keep improving with t.
    CHECK(result.rows[2].min_delta_gamma < result.rows[0].min_delta_gamma);
    CHECK(result.rows[2].t_max_used == Approx(30.0));
  }
}

TEST_CASE("measured long-time minima track the asymptotic law") {
  SweepSettings s;
  s.axis = "eta";
  s.values = {0.02};
  s.h = 1e-3;
  s.t_max = 40.0;
  s.threads = 1;
  const SweepResult result = run_sweep(s);
  const SweepRow& row = result.rows[0];
  REQUIRE(row.exists);
  REQUIRE(std::isfinite(row.min_delta_gamma));
  CHECK(std::fabs(row.min_delta_gamma - row.predicted_delta_gamma) <=
        0.05 * row.predicted_delta_gamma);
}

TEST_CASE("fig1b tables: plateau transition and spectrum levels") {
  ReproduceSettings rs;
  rs.grid = {100.0, 207.0, 207.2, 300.0};
  rs.h = 1e-3;
  rs.t_max = 30.0;
  rs.threads = 2;
  const auto tables = reproduce_fig1b(rs);
  REQUIRE(tables.size() == 3);
  CHECK(tables[0].name == "fig1b_plateau");
  CHECK(tables[1].name == "fig1b_spectrum_levels");
  CHECK(tables[2].name == "fig1b_y_samples");
  REQUIRE(tables[0].rows.size() == 4);
  // exists column flips between the rows bracketing the criterion point.
  CHECK(tables[0].rows[1][1] == "false");
  CHECK(tables[0].rows[2][1] == "true");
  // Plateau column: ~0 below, ~Z above.
  CHECK(std::stod(tables[0].rows[0][4]) < 0.05);
  const double z3 = std::stod(tables[0].rows[3][3]);
  CHECK(std::stod(tables[0].rows[3][4]) == Approx(z3).epsilon(0.02));
  CHECK(tables[2].rows.size() == 200);
}

TEST_CASE("fig2 tables: minima envelopes and N-scaling rows") {
  ReproduceSettings rs;
  rs.omega_c_panels = {100.0, 300.0};
  rs.n_grid = {10.0, 1000.0};
  rs.h = 1e-3;
  rs.t_max = 25.0;
  rs.threads = 2;
  const auto tables = reproduce_fig2(rs);
  REQUIRE(tables.size() == 3);
  CHECK(tables[0].name == "fig2a_delta_gamma");
  CHECK(tables[1].name == "fig2b_minima");
  CHECK(tables[2].name == "fig2c_min_vs_N");

  // Panel (a)/(b): without the bound state the late minima grow; with it the
  // envelope at the end improves on the early-time best.
  std::vector<double> t_open, v_open, t_bound, v_bound;
  for (const auto& row : tables[1].rows) {
    const double wc = std::stod(row[0]);
    if (wc == 100.0) {
      t_open.push_back(std::stod(row[1]));
      v_open.push_back(std::stod(row[2]));
    } else if (wc == 300.0) {
      t_bound.push_back(std::stod(row[1]));
      v_bound.push_back(std::stod(row[2]));
    }
  }
  REQUIRE(t_open.size() > 5);
  REQUIRE(t_bound.size() > 5);
  CHECK(v_open.back() > 1.2 * *std::min_element(v_open.begin(), v_open.end()));
  CHECK(v_bound.back() <= 1.02 * *std::min_element(v_bound.begin(), v_bound.end()));
  // Bound-state minima track the asymptotic prediction late in the window.
  for (std::size_t i = 0; i < t_bound.size(); ++i) {
    if (t_bound[i] < 10.0) continue;
    const double predicted = std::stod(tables[1].rows[t_open.size() + i][3]);
    CHECK(std::fabs(v_bound[i] - predicted) <= 0.05 * predicted);
  }

  // Panel (c): minima nearest t = 10 exist and improve with N; the SNL and
  // ZL reference columns hold their closed-form values.
  REQUIRE(tables[2].rows.size() == 4);
  for (const auto& row : tables[2].rows) {
    const double N = std::stod(row[1]);
    const double t_min = std::stod(row[2]);
    CHECK(std::fabs(t_min - 10.0) < 1.5);
    CHECK(std::stod(row[5]) == Approx(1.0 / (10.0 * std::sqrt(N))).epsilon(1e-12));
    CHECK(std::stod(row[6]) == Approx(zeno_limit(N, 10.0)).epsilon(1e-12));
  }
  const double dg_n10 = std::stod(tables[2].rows[0][3]);
  const double dg_n1000 = std::stod(tables[2].rows[1][3]);
  CHECK(dg_n1000 < dg_n10);
}

TEST_CASE("fig3 tables: eta crossover, residue trend, plateau") {
  ReproduceSettings rs;
  rs.grid = {0.005, 0.013, 0.0145, 0.02, 0.05};
  rs.h = 1e-3;
  rs.t_max = 40.0;
  rs.threads = 2;
  const auto tables = reproduce_fig3(rs);
  REQUIRE(tables.size() == 2);
  const auto& rows = tables[0].rows;
  REQUIRE(rows.size() == 5);
  CHECK(rows[0][1] == "false");  // eta = 0.005 < (1+pi)/300
  CHECK(rows[1][1] == "false");  // eta = 0.013
  CHECK(rows[2][1] == "true");   // eta = 0.0145
  CHECK(rows[3][1] == "true");
  CHECK(rows[4][1] == "true");

  // Plateau tracks Z on the bound-state side; below the threshold the
  // amplitude is still draining at t = 40 (shifted-pole rate ~ 0.04), so
  // only partial decay is visible in this window.
  CHECK(std::stod(rows[0][4]) < 0.5);
  CHECK(std::stod(rows[3][4]) == Approx(std::stod(rows[3][3])).epsilon(0.02));
  CHECK(std::stod(rows[4][4]) == Approx(std::stod(rows[4][3])).epsilon(0.02));
  // Away from the threshold the residue decreases with deeper coupling.
  CHECK(std::stod(rows[4][3]) < std::stod(rows[3][3]));
}

TEST_CASE("sweeps are deterministic") {
  ReproduceSettings rs;
  rs.grid = {207.0, 207.2};
  rs.h = 2e-3;
  rs.t_max = 5.0;
  rs.threads = 2;
  const auto a = reproduce_fig1b(rs);
  const auto b = reproduce_fig1b(rs);
  const std::string ra = csv::render({}, a);
  const std::string rb = csv::render({}, b);
  CHECK(ra == rb);
}
