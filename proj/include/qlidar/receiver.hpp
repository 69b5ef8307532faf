#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "qlidar/modes.hpp"
#include "qlidar/state.hpp"

namespace qlidar {

/// Receiver configuration. Detunings are relative to the returned signal's
/// carrier: delta_omega = omega_LO - omega, delta_theta = theta_LO - theta.
/// kappa is the round-trip transmissivity of the target channel.
struct ReceiverSetup {
  double delta_omega = 0.0;
  double delta_theta = 0.0;
  double kappa = 1.0;
  TimeGrid grid;

  void validate() const;
};

/// Mean vector and covariance matrix of the discretized homodyne record.
struct GaussianStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;

  double symmetry_error() const;
  double min_eigenvalue() const;
};

/// Covariance of the measurement record rotated to the mode basis, valid to
/// first order in the frequency detuning: tridiagonal with diagonal
/// (excess_var_n + 1/2)/dt and first off-diagonal proportional to
/// delta_omega. excess_var and mix_amp are the per-mode coefficients the
/// tridiagonal is assembled from.
struct ModeBasisStats {
  Eigen::VectorXd diag;      // (excess_var_n + 1/2)/dt
  Eigen::VectorXd off_diag;  // entry n couples modes n and n+1
  Eigen::VectorXd excess_var;  // A_n
  Eigen::VectorXd mix_amp;     // B_n
  double dt = 0.0;

  Eigen::MatrixXd dense() const;
};

/// mu_i = sqrt(2 kappa) Re[sum_n alpha_n env_n(t_i) e^{i(dw t_i + dth)}].
/// Requires dt*max(sigma, |delta_omega|) <= 0.5.
Eigen::VectorXd mean_vector(const StateSpec& spec, const ModeBasis& basis,
                            const ReceiverSetup& rx);

/// Shot noise I/(2 dt) plus the squeezing-induced terms of each populated
/// mode. Same resolution guard as mean_vector.
Eigen::MatrixXd covariance_matrix(const StateSpec& spec, const ModeBasis& basis,
                                  const ReceiverSetup& rx);

GaussianStats gaussian_stats(const StateSpec& spec, const ModeBasis& basis,
                             const ReceiverSetup& rx);

/// Mode-basis covariance; requires the homodyne condition
/// |delta_omega| * DeltaT < 0.1.
ModeBasisStats mode_basis_covariance(const StateSpec& spec,
                                     const ModeBasis& basis,
                                     const ReceiverSetup& rx);

/// Closed-form inverse of the tridiagonal mode-basis covariance, correct to
/// first order in delta_omega/sigma.
Eigen::MatrixXd invert_mode_covariance_first_order(const ModeBasisStats& stats);

/// m i.i.d. draws (one per row) from N(mu, sigma). Deterministic for a fixed
/// seed; trial row k uses derived_seed(seed, k) so sharding by row is safe.
Eigen::MatrixXd sample_traces(const GaussianStats& stats, int m,
                              std::uint64_t seed);

/// Debug export: mean.csv rows "index,t,mu"; cov.csv rows "i,j,value" for the
/// upper triangle.
void export_stats_csv(const GaussianStats& stats, const TimeGrid& grid,
                      const std::string& mean_path, const std::string& cov_path);

}  // namespace qlidar
