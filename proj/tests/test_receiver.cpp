#include <doctest.h>

#include <cmath>
#include <complex>
#include <cstdio>

#include "qlidar/errors.hpp"
#include "qlidar/receiver.hpp"

using namespace qlidar;

namespace {

ReceiverSetup default_rx(double kappa = 1.0, double dw = 0.0, double dth = 0.0) {
  ModeParams p;
  p.omega = 5.0;
  ReceiverSetup rx;
  rx.kappa = kappa;
  rx.delta_omega = dw;
  rx.delta_theta = dth;
  rx.grid = TimeGrid::spanning(p);
  return rx;
}

ModeParams default_params() {
  ModeParams p;
  p.omega = 5.0;
  return p;
}

}  // namespace

TEST_CASE("mean vector") {
  const ModeParams p = default_params();

  SUBCASE("vanishes without displacement") {
    StateSpec spec;
    spec.occupations.push_back({0, {0.0, 0.0}, 1.0, 0.3});
    const ModeBasis basis = basis_for(spec, p);
    CHECK(mean_vector(spec, basis, default_rx()).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("vanishes at zero transmissivity") {
    StateSpec spec;
    spec.occupations.push_back({1, {3.0, 1.0}, 0.0, 0.0});
    const ModeBasis basis = basis_for(spec, p);
    CHECK(mean_vector(spec, basis, default_rx(0.0)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("matched probe reproduces the envelope closed form") {
    const StateSpec spec = standard_probe(100.0, 0.75);
    const ModeBasis basis = basis_for(spec, p);
    const ReceiverSetup rx = default_rx();
    const Eigen::VectorXd mu = mean_vector(spec, basis, rx);
    const std::complex<double> alpha1 = spec.occupations[1].alpha;
    for (int i : {10, 50, 77}) {
      const double t = rx.grid.center(i);
      const double expected =
          std::sqrt(2.0) * alpha1.real() * mode_envelope(1, t, p);
      CHECK(mu(i) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  SUBCASE("resolution guard") {
    StateSpec spec;
    spec.occupations.push_back({0, {1.0, 0.0}, 0.0, 0.0});
    const ModeBasis basis = basis_for(spec, p);
    ReceiverSetup rx = default_rx(1.0, 20.0);  // dt * dw = 4 > 0.5
    CHECK_THROWS_AS(mean_vector(spec, basis, rx), std::invalid_argument);
  }
}

TEST_CASE("covariance matrix") {
  const ModeParams p = default_params();

  SUBCASE("vacuum probe is pure shot noise") {
    const StateSpec vacuum;
    const ModeBasis basis = basis_for(vacuum, p);
    const ReceiverSetup rx = default_rx();
    const Eigen::MatrixXd sigma = covariance_matrix(vacuum, basis, rx);
    const Eigen::MatrixXd expected =
        Eigen::MatrixXd::Identity(rx.grid.n_bins, rx.grid.n_bins) /
        (2.0 * rx.grid.dt);
    CHECK((sigma - expected).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("loss affine law is exact") {
    const StateSpec spec = standard_probe(40.0, 0.6);
    const ModeBasis basis = basis_for(spec, p);
    const ReceiverSetup full = default_rx(1.0, 0.0, 0.02);
    ReceiverSetup lossy = full;
    lossy.kappa = 0.37;
    const Eigen::MatrixXd s1 = covariance_matrix(spec, basis, full);
    const Eigen::MatrixXd sk = covariance_matrix(spec, basis, lossy);
    const Eigen::MatrixXd shot =
        Eigen::MatrixXd::Identity(full.grid.n_bins, full.grid.n_bins) /
        (2.0 * full.grid.dt);
    const Eigen::MatrixXd predicted = lossy.kappa * (s1 - shot) + shot;
    CHECK((sk - predicted).cwiseAbs().maxCoeff() < 1e-12);

    const Eigen::VectorXd m1 = mean_vector(spec, basis, full);
    const Eigen::VectorXd mk = mean_vector(spec, basis, lossy);
    CHECK((mk - std::sqrt(lossy.kappa) * m1).cwiseAbs().maxCoeff() < 1e-14);
  }

  SUBCASE("symmetric and positive definite") {
    const StateSpec spec = standard_probe(25.0, 0.8);
    const ModeBasis basis = basis_for(spec, p);
    const GaussianStats stats = gaussian_stats(spec, basis, default_rx(0.7, 0.0, 0.1));
    CHECK(stats.symmetry_error() < 1e-12);
    CHECK(stats.min_eigenvalue() > -1e-9);
  }

  SUBCASE("mode-0 squeezed quadrature variance") {
    // Projecting onto the mode-0 envelope row recovers the squeezed scalar
    // variance e^{-2r}/2.
    StateSpec spec;
    spec.occupations.push_back({0, {0.0, 0.0}, 1.0, 0.0});
    const ModeBasis basis = basis_for(spec, p);
    const ReceiverSetup rx = default_rx();
    const Eigen::MatrixXd sigma = covariance_matrix(spec, basis, rx);
    const Eigen::MatrixXd u = discretize_envelopes(basis, rx.grid);
    const double var = u.row(0) * sigma * u.row(0).transpose();
    CHECK(var * rx.grid.dt == doctest::Approx(std::exp(-2.0) / 2.0).epsilon(1e-8));
    CHECK(var * rx.grid.dt == doctest::Approx(0.06766764).epsilon(1e-6));
  }

  SUBCASE("vacuum occupations leave the statistics bit-identical") {
    StateSpec spec = standard_probe(30.0, 0.5);
    const ModeBasis basis = basis_for(spec, p);
    const ReceiverSetup rx = default_rx(0.9, 0.0, 0.01);
    const GaussianStats before = gaussian_stats(spec, basis, rx);
    spec.occupations.push_back({7, {0.0, 0.0}, 0.0, 0.0});
    ModeBasis wider = basis_for(spec, p);
    const GaussianStats after = gaussian_stats(spec, wider, rx);
    CHECK((before.mu - after.mu).cwiseAbs().maxCoeff() == 0.0);
    CHECK((before.sigma - after.sigma).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("mode-basis covariance") {
  const ModeParams p = default_params();

  SUBCASE("matched squeezed diagonal") {
    StateSpec spec;
    const double r = 0.9;
    spec.occupations.push_back({2, {0.0, 0.0}, r, 0.0});
    const ModeBasis basis = basis_for(spec, p);
    const ReceiverSetup rx = default_rx();
    const ModeBasisStats mb = mode_basis_covariance(spec, basis, rx);
    CHECK(mb.diag(2) * rx.grid.dt ==
          doctest::Approx(std::exp(-2.0 * r) / 2.0).epsilon(1e-12));
    CHECK(mb.off_diag.cwiseAbs().maxCoeff() == 0.0);  // delta_omega = 0
  }

  SUBCASE("conjugation oracle on the default setup") {
    const StateSpec spec = standard_probe(50.0, 0.75);
    const ModeBasis basis = basis_for(spec, p);
    const ReceiverSetup rx = default_rx(1.0, 0.0, 0.0);
    const ModeBasisStats mb = mode_basis_covariance(spec, basis, rx);
    const Eigen::MatrixXd sigma = covariance_matrix(spec, basis, rx);
    const Eigen::MatrixXd u = discretize_envelopes(basis, rx.grid);
    const Eigen::MatrixXd rotated = u * sigma * u.transpose();
    const double scale = mb.dense().cwiseAbs().maxCoeff();
    CHECK((rotated - mb.dense()).cwiseAbs().maxCoeff() < 1e-6 * scale);
  }

  SUBCASE("conjugation with small frequency detuning") {
    const StateSpec spec = standard_probe(50.0, 0.75);
    const ModeBasis basis = basis_for(spec, p);
    const double dw = 0.02;
    const ReceiverSetup rx = default_rx(1.0, dw, 0.01);
    const ModeBasisStats mb = mode_basis_covariance(spec, basis, rx);
    const Eigen::MatrixXd u = discretize_envelopes(basis, rx.grid);
    const Eigen::MatrixXd rotated =
        u * covariance_matrix(spec, basis, rx) * u.transpose();
    const double scale = mb.dense().cwiseAbs().maxCoeff();
    const double delta_t_probe = std::sqrt(3.0);
    const double bound = 10.0 * (dw * delta_t_probe) * (dw * delta_t_probe);
    CHECK((rotated - mb.dense()).cwiseAbs().maxCoeff() < bound * scale);
  }

  SUBCASE("homodyne condition enforced") {
    const StateSpec spec = standard_probe(50.0, 0.75);
    const ModeBasis basis = basis_for(spec, p);
    ReceiverSetup rx = default_rx(1.0, 0.5);
    CHECK_THROWS_AS(mode_basis_covariance(spec, basis, rx),
                    std::invalid_argument);
  }
}

TEST_CASE("first-order tridiagonal inverse") {
  const ModeParams p = default_params();
  const StateSpec spec = standard_probe(60.0, 0.7);
  const ModeBasis basis = basis_for(spec, p);

  SUBCASE("exact for zero detuning") {
    const ModeBasisStats mb = mode_basis_covariance(spec, basis, default_rx());
    const Eigen::MatrixXd inv = invert_mode_covariance_first_order(mb);
    const Eigen::MatrixXd prod = mb.dense() * inv;
    CHECK((prod - Eigen::MatrixXd::Identity(prod.rows(), prod.cols()))
              .cwiseAbs()
              .maxCoeff() < 1e-12);
  }

  SUBCASE("residual scales as the square of the detuning") {
    for (double dw : {1e-2, 1e-3}) {
      const ModeBasisStats mb =
          mode_basis_covariance(spec, basis, default_rx(1.0, dw));
      const Eigen::MatrixXd inv = invert_mode_covariance_first_order(mb);
      const Eigen::MatrixXd prod = mb.dense() * inv;
      const double resid =
          (prod - Eigen::MatrixXd::Identity(prod.rows(), prod.cols()))
              .cwiseAbs()
              .maxCoeff();
      CHECK(resid < 10.0 * dw * dw);
    }
  }

  SUBCASE("matches a dense solve to second order") {
    const double dw = 1e-2;
    const ModeBasisStats mb =
        mode_basis_covariance(spec, basis, default_rx(1.0, dw));
    const Eigen::MatrixXd dense_inv = mb.dense().inverse();
    const Eigen::MatrixXd first = invert_mode_covariance_first_order(mb);
    const double scale = dense_inv.cwiseAbs().maxCoeff();
    CHECK((dense_inv - first).cwiseAbs().maxCoeff() < 10.0 * dw * dw * scale);
  }
}

TEST_CASE("trace sampling") {
  const ModeParams p = default_params();

  SUBCASE("deterministic for a fixed seed") {
    const StateSpec spec = standard_probe(10.0, 0.5);
    TimeGrid grid;
    grid.n_bins = 24;
    grid.dt = 0.2;
    grid.t_start = -2.3;
    ReceiverSetup rx;
    rx.grid = grid;
    const GaussianStats stats = gaussian_stats(spec, basis_for(spec, p), rx);
    const Eigen::MatrixXd a = sample_traces(stats, 50, 42);
    const Eigen::MatrixXd b = sample_traces(stats, 50, 42);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::MatrixXd c = sample_traces(stats, 50, 43);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);
  }

  SUBCASE("vacuum moments match the law of large numbers") {
    GaussianStats stats;
    const int bins = 16;
    const double dt = 0.25;
    stats.mu = Eigen::VectorXd::Zero(bins);
    stats.sigma = Eigen::MatrixXd::Identity(bins, bins) / (2.0 * dt);
    const int m = 100000;
    const Eigen::MatrixXd traces = sample_traces(stats, m, 7);
    const double var0 = 1.0 / (2.0 * dt);
    const double se_mean = std::sqrt(var0 / m);
    const double se_var = var0 * std::sqrt(2.0 / m);
    for (int i = 0; i < bins; ++i) {
      const double mean = traces.col(i).mean();
      CHECK(std::abs(mean) < 5.0 * se_mean);
      const double var =
          (traces.col(i).array() - mean).square().sum() / (m - 1);
      CHECK(std::abs(var - var0) < 5.0 * se_var);
    }
  }

  SUBCASE("sample covariance approaches the model covariance") {
    const StateSpec spec = standard_probe(8.0, 0.6);
    TimeGrid grid;
    grid.n_bins = 20;
    grid.dt = 0.3;
    grid.t_start = -2.85;
    ReceiverSetup rx;
    rx.grid = grid;
    const GaussianStats stats = gaussian_stats(spec, basis_for(spec, p), rx);
    const int m = 100000;
    const Eigen::MatrixXd traces = sample_traces(stats, m, 11);
    const Eigen::MatrixXd centered =
        traces.rowwise() - traces.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / (m - 1);
    const double bound =
        5.0 * std::sqrt(2.0 / m) * stats.sigma.cwiseAbs().maxCoeff();
    CHECK((cov - stats.sigma).cwiseAbs().maxCoeff() < bound);
  }
}

TEST_CASE("stats CSV export") {
  const ModeParams p = default_params();
  const StateSpec spec = standard_probe(5.0, 0.5);
  TimeGrid grid;
  grid.n_bins = 8;
  grid.dt = 0.5;
  grid.t_start = -1.75;
  ReceiverSetup rx;
  rx.grid = grid;
  const GaussianStats stats = gaussian_stats(spec, basis_for(spec, p), rx);
  const std::string mean_path = "/tmp/qlidar_test_mean.csv";
  const std::string cov_path = "/tmp/qlidar_test_cov.csv";
  export_stats_csv(stats, grid, mean_path, cov_path);

  std::FILE* f = std::fopen(mean_path.c_str(), "r");
  REQUIRE(f != nullptr);
  char header[64];
  REQUIRE(std::fgets(header, sizeof header, f) != nullptr);
  CHECK(std::string(header) == "index,t,mu\n");
  int idx = 0;
  double t = 0, mu = 0;
  int rows = 0;
  while (std::fscanf(f, "%d,%lf,%lf", &idx, &t, &mu) == 3) {
    CHECK(t == grid.center(idx));
    CHECK(mu == stats.mu(idx));
    ++rows;
  }
  std::fclose(f);
  CHECK(rows == grid.n_bins);

  f = std::fopen(cov_path.c_str(), "r");
  REQUIRE(f != nullptr);
  REQUIRE(std::fgets(header, sizeof header, f) != nullptr);
  CHECK(std::string(header) == "i,j,value\n");
  int i = 0, j = 0, entries = 0;
  double v = 0;
  while (std::fscanf(f, "%d,%d,%lf", &i, &j, &v) == 3) {
    CHECK(j >= i);
    CHECK(v == stats.sigma(i, j));
    ++entries;
  }
  std::fclose(f);
  CHECK(entries == grid.n_bins * (grid.n_bins + 1) / 2);
}
