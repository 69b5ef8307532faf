#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace qlidar {

/// Parameters of the Hermite-Gaussian temporal mode family: center time,
/// carrier angular frequency, carrier phase, and the bandwidth parameter
/// sigma (1/time). Natural units fix sigma = 1.
struct ModeParams {
  double tau = 0.0;
  double omega = 0.0;
  double theta = 0.0;
  double sigma = 1.0;

  void validate() const;
};

/// Mode family together with a truncation order; n_max is the highest mode
/// index represented.
struct ModeBasis {
  ModeParams params;
  int n_max = 0;

  void validate() const;
};

/// Uniform time-bin grid. t_start is the center of the first bin; bin i is
/// centered at t_start + i*dt.
struct TimeGrid {
  double t_start = -10.0;
  double dt = 0.2;
  int n_bins = 100;

  double center(int i) const { return t_start + i * dt; }
  double last_center() const { return t_start + (n_bins - 1) * dt; }
  void validate() const;

  /// Grid of `n_bins` bins of width `dt/sigma` whose centers straddle
  /// tau +- half_span/sigma, mirroring the default measurement window.
  static TimeGrid spanning(const ModeParams& p, double half_span = 10.0,
                           double dt = 0.2);
};

/// Target range/velocity and the reflection phase picked up at the bounce.
struct TargetKinematics {
  double range = 0.0;
  double velocity = 0.0;
  double light_speed = 1.0;
  double reflection_phase = 0.0;

  void validate() const;  // rejects |v/c| >= 0.01 (non-relativistic model)
};

/// Real envelope of mode n at time t (the mode with the carrier factor
/// removed). The envelope is real for this family.
double mode_envelope(int n, double t, const ModeParams& p);

/// Full complex mode function: envelope * exp(-i(omega t + theta)).
std::complex<double> mode_value(int n, double t, const ModeParams& p);

/// Estimation parameters, in the fixed order used by all 3x3 matrices.
enum class Param { Tau = 0, Omega = 1, Theta = 2 };

struct DerivativeTerm {
  int n;
  std::complex<double> coeff;
};

/// Expansion of d(mode k)/d(param) over the mode basis. `truncated` is set
/// when a nonzero coefficient falls above n_max and was dropped.
struct DerivativeCoeffs {
  std::vector<DerivativeTerm> terms;
  bool truncated = false;
};

DerivativeCoeffs mode_derivative_coeffs(Param alpha, int k,
                                        const ModeBasis& basis);

/// Matrix U with U(n, i) = sqrt(dt) * envelope_n(t_i); rows are
/// near-orthonormal when the grid resolves and contains the modes.
/// Requires the grid to cover tau +- 8/sigma and dt*sigma <= 0.5.
Eigen::MatrixXd discretize_envelopes(const ModeBasis& basis,
                                     const TimeGrid& grid);

/// Parameter change induced by reflection off the target:
/// tau += 2R/c, omega *= 1 + 2v/c, theta += reflection phase.
ModeParams apply_target(const ModeParams& in, const TargetKinematics& kin);

/// Exact algebraic inverse of apply_target.
ModeParams unapply_target(const ModeParams& out, const TargetKinematics& kin);

struct TransformCheck {
  double max_residual = 0.0;
  Eigen::VectorXcd diagonal;  /// measured <phi_n(out), phi_n(in)> overlaps
};

/// Verifies the first-order mode-mixing rule for an infinitesimal parameter
/// shift (eps_tau, eps_omega, eps_theta) by comparing quadrature overlaps
/// between shifted and unshifted modes against the predicted nearest-neighbor
/// coefficients. The residual is O(eps^2).
TransformCheck infinitesimal_transform_check(const ModeBasis& basis,
                                             double eps_tau, double eps_omega,
                                             double eps_theta);

}  // namespace qlidar
