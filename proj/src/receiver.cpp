#include "qlidar/receiver.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "qlidar/errors.hpp"
#include "qlidar/numerics.hpp"

namespace qlidar {

void ReceiverSetup::validate() const {
  if (!(kappa >= 0.0 && kappa <= 1.0))
    throw std::invalid_argument("ReceiverSetup: kappa must be in [0, 1]");
  if (!std::isfinite(delta_omega) || !std::isfinite(delta_theta))
    throw std::invalid_argument("ReceiverSetup: detunings must be finite");
  grid.validate();
}

double GaussianStats::symmetry_error() const {
  return (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
}

double GaussianStats::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma,
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Eigen::MatrixXd ModeBasisStats::dense() const {
  const int n = static_cast<int>(diag.size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  m.diagonal() = diag;
  for (int i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = off_diag(i);
  return m;
}

namespace {

void check_resolution(const ModeBasis& basis, const ReceiverSetup& rx) {
  const double scale = std::max(basis.params.sigma, std::abs(rx.delta_omega));
  if (rx.grid.dt * scale > 0.5)
    throw std::invalid_argument(
        "receiver: grid too coarse, need dt*max(sigma, |delta_omega|) <= 0.5");
}

}  // namespace

Eigen::VectorXd mean_vector(const StateSpec& spec, const ModeBasis& basis,
                            const ReceiverSetup& rx) {
  spec.validate();
  basis.validate();
  rx.validate();
  check_resolution(basis, rx);

  const int m = rx.grid.n_bins;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(m);
  const double amp = std::sqrt(2.0 * rx.kappa);
  if (amp == 0.0) return mu;
  for (const auto& occ : spec.occupations) {
    if (std::abs(occ.alpha) == 0.0) continue;
    for (int i = 0; i < m; ++i) {
      const double t = rx.grid.center(i);
      const double phase = rx.delta_omega * t + rx.delta_theta;
      mu(i) += amp * mode_envelope(occ.n, t, basis.params) *
               (occ.alpha.real() * std::cos(phase) -
                occ.alpha.imag() * std::sin(phase));
    }
  }
  return mu;
}

Eigen::MatrixXd covariance_matrix(const StateSpec& spec, const ModeBasis& basis,
                                  const ReceiverSetup& rx) {
  spec.validate();
  basis.validate();
  rx.validate();
  check_resolution(basis, rx);

  const int m = rx.grid.n_bins;
  Eigen::MatrixXd sigma =
      Eigen::MatrixXd::Identity(m, m) / (2.0 * rx.grid.dt);
  if (rx.kappa == 0.0) return sigma;

  // Each populated mode contributes
  //   kappa * env_i env_j [N cos(dw (t_i - t_j))
  //                        - sqrt(N(N+1)) cos(dw (t_i + t_j) + 2 dth + phi)]
  // which splits into four symmetric rank-1 updates.
  Eigen::VectorXd ec(m), es(m), eck(m), esk(m);
  for (const auto& occ : spec.occupations) {
    const double s = std::sinh(occ.r);
    if (s == 0.0) continue;
    const double nsq = s * s;
    const double cs = s * std::cosh(occ.r);
    const double half_angle = rx.delta_theta + 0.5 * occ.phi;
    for (int i = 0; i < m; ++i) {
      const double t = rx.grid.center(i);
      const double env = mode_envelope(occ.n, t, basis.params);
      const double a = rx.delta_omega * t;
      ec(i) = env * std::cos(a);
      es(i) = env * std::sin(a);
      eck(i) = env * std::cos(a + half_angle);
      esk(i) = env * std::sin(a + half_angle);
    }
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(ec, rx.kappa * nsq);
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(es, rx.kappa * nsq);
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(eck, -rx.kappa * cs);
    sigma.selfadjointView<Eigen::Lower>().rankUpdate(esk, rx.kappa * cs);
  }
  sigma.triangularView<Eigen::Upper>() = sigma.transpose();
  return sigma;
}

GaussianStats gaussian_stats(const StateSpec& spec, const ModeBasis& basis,
                             const ReceiverSetup& rx) {
  return {mean_vector(spec, basis, rx), covariance_matrix(spec, basis, rx)};
}

ModeBasisStats mode_basis_covariance(const StateSpec& spec,
                                     const ModeBasis& basis,
                                     const ReceiverSetup& rx) {
  spec.validate();
  basis.validate();
  rx.validate();
  if (rx.delta_omega != 0.0 && !spec.is_vacuum()) {
    const DurationBandwidth db = duration_bandwidth(spec, basis);
    if (std::abs(rx.delta_omega) * db.delta_t >= 0.1)
      throw std::invalid_argument(
          "mode_basis_covariance: homodyne condition |delta_omega|*DeltaT < 0.1 "
          "violated");
  }

  const int dim = basis.n_max + 1;
  const double sigma = basis.params.sigma;
  const double tau = basis.params.tau;
  const double dt = rx.grid.dt;

  ModeBasisStats out;
  out.dt = dt;
  out.excess_var = Eigen::VectorXd::Zero(dim);
  out.mix_amp = Eigen::VectorXd::Zero(dim);
  for (const auto& occ : spec.occupations) {
    if (occ.n >= dim) continue;
    const double s = std::sinh(occ.r), c = std::cosh(occ.r);
    const double angle =
        2.0 * rx.delta_theta + 2.0 * rx.delta_omega * tau + occ.phi;
    out.excess_var(occ.n) = rx.kappa * (s * s - c * s * std::cos(angle));
    out.mix_amp(occ.n) = rx.kappa * c * s * std::sin(angle);
  }

  out.diag = (out.excess_var.array() + 0.5) / dt;
  out.off_diag = Eigen::VectorXd::Zero(std::max(dim - 1, 0));
  for (int n = 0; n + 1 < dim; ++n) {
    const double alpha_next = std::sqrt(n + 1.0) / sigma;  // sqrt((n+1)/2)/g
    const double beta_n = std::sqrt(n + 1.0) / sigma;
    out.off_diag(n) = rx.delta_omega *
                      (alpha_next * out.mix_amp(n + 1) + beta_n * out.mix_amp(n)) /
                      dt;
  }
  return out;
}

Eigen::MatrixXd invert_mode_covariance_first_order(const ModeBasisStats& stats) {
  const int dim = static_cast<int>(stats.diag.size());
  Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(dim, dim);
  for (int n = 0; n < dim; ++n)
    inv(n, n) = stats.dt / (stats.excess_var(n) + 0.5);
  for (int n = 0; n + 1 < dim; ++n) {
    const double v = -stats.dt * stats.off_diag(n) * stats.dt /
                     ((stats.excess_var(n) + 0.5) * (stats.excess_var(n + 1) + 0.5));
    inv(n, n + 1) = inv(n + 1, n) = v;
  }
  return inv;
}

Eigen::MatrixXd sample_traces(const GaussianStats& stats, int m,
                              std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample_traces: m must be >= 1");
  const int dim = static_cast<int>(stats.mu.size());
  if (stats.sigma.rows() != dim || stats.sigma.cols() != dim)
    throw std::invalid_argument("sample_traces: inconsistent stats dimensions");

  Eigen::LLT<Eigen::MatrixXd> llt(stats.sigma);
  if (llt.info() != Eigen::Success) {
    // Shot noise keeps sigma positive definite; rounding can still tip a
    // factorization, so retry once with a reported diagonal jitter.
    const double jitter = 1e-12 * stats.sigma.trace() / dim;
    Eigen::MatrixXd fixed = stats.sigma;
    fixed.diagonal().array() += jitter;
    llt.compute(fixed);
    if (llt.info() != Eigen::Success) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(stats.sigma,
                                                        Eigen::EigenvaluesOnly);
      const double lo = es.eigenvalues().minCoeff();
      const double hi = es.eigenvalues().maxCoeff();
      throw NumericalError(
          "sample_traces: covariance factorization failed, eigenvalue range [" +
          std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  }
  const Eigen::MatrixXd l = llt.matrixL();

  Eigen::MatrixXd traces(m, dim);
  Eigen::VectorXd z(dim);
  for (int k = 0; k < m; ++k) {
    GaussianSampler gauss(derived_seed(seed, static_cast<std::uint64_t>(k)));
    for (int i = 0; i < dim; ++i) z(i) = gauss();
    traces.row(k) = (stats.mu + l * z).transpose();
  }
  return traces;
}

void export_stats_csv(const GaussianStats& stats, const TimeGrid& grid,
                      const std::string& mean_path,
                      const std::string& cov_path) {
  std::ofstream mean_out(mean_path);
  if (!mean_out) throw std::runtime_error("cannot open " + mean_path);
  mean_out << "index,t,mu\n";
  char buf[64];
  for (int i = 0; i < stats.mu.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g", i, grid.center(i),
                  stats.mu(i));
    mean_out << buf << '\n';
  }

  std::ofstream cov_out(cov_path);
  if (!cov_out) throw std::runtime_error("cannot open " + cov_path);
  cov_out << "i,j,value\n";
  for (int i = 0; i < stats.sigma.rows(); ++i)
    for (int j = i; j < stats.sigma.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.17g", i, j, stats.sigma(i, j));
      cov_out << buf << '\n';
    }
}

}  // namespace qlidar
