#include "qlidar/modes.hpp"

#include <cmath>
#include <stdexcept>

#include "qlidar/numerics.hpp"

namespace qlidar {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};

// Orthonormal Hermite function psi_n(x) = H_n(x) e^{-x^2/2} / sqrt(2^n n! sqrt(pi)),
// evaluated by the stable three-term recurrence. Overflow-free for n up to
// a few hundred.
double hermite_function(int n, double x) {
  const double psi0 = std::pow(M_PI, -0.25) * std::exp(-0.5 * x * x);
  if (n == 0) return psi0;
  double prev = psi0;
  double cur = std::sqrt(2.0) * x * psi0;
  for (int k = 1; k < n; ++k) {
    double next = std::sqrt(2.0 / (k + 1)) * x * cur -
                  std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
  }
  return cur;
}

}  // namespace

void ModeParams::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("ModeParams: sigma must be > 0");
  if (!std::isfinite(tau) || !std::isfinite(omega) || !std::isfinite(theta) ||
      !std::isfinite(sigma))
    throw std::invalid_argument("ModeParams: fields must be finite");
}

void ModeBasis::validate() const {
  params.validate();
  if (n_max < 0) throw std::invalid_argument("ModeBasis: n_max must be >= 0");
}

void TimeGrid::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be > 0");
  if (n_bins < 1) throw std::invalid_argument("TimeGrid: n_bins must be >= 1");
  if (!std::isfinite(t_start)) throw std::invalid_argument("TimeGrid: t_start must be finite");
}

TimeGrid TimeGrid::spanning(const ModeParams& p, double half_span, double dt) {
  p.validate();
  TimeGrid g;
  g.dt = dt / p.sigma;
  g.n_bins = static_cast<int>(std::lround(2.0 * half_span / dt));
  g.t_start = p.tau - half_span / p.sigma;
  return g;
}

void TargetKinematics::validate() const {
  if (!(light_speed > 0.0))
    throw std::invalid_argument("TargetKinematics: light_speed must be > 0");
  if (!std::isfinite(range) || !std::isfinite(velocity) ||
      !std::isfinite(reflection_phase))
    throw std::invalid_argument("TargetKinematics: fields must be finite");
  if (std::abs(velocity / light_speed) >= 0.01)
    throw std::invalid_argument(
        "TargetKinematics: |v/c| must be < 0.01 (non-relativistic model)");
}

double mode_envelope(int n, double t, const ModeParams& p) {
  if (n < 0) throw std::invalid_argument("mode index must be >= 0");
  const double x = p.sigma * (t - p.tau) / std::sqrt(2.0);
  return std::sqrt(p.sigma) * std::pow(2.0, -0.25) * hermite_function(n, x);
}

std::complex<double> mode_value(int n, double t, const ModeParams& p) {
  return mode_envelope(n, t, p) * std::exp(-kI * (p.omega * t + p.theta));
}

DerivativeCoeffs mode_derivative_coeffs(Param alpha, int k,
                                        const ModeBasis& basis) {
  basis.validate();
  if (k < 0 || k > basis.n_max)
    throw std::invalid_argument("mode_derivative_coeffs: k out of basis range");

  const double sigma = basis.params.sigma;
  const double tau = basis.params.tau;
  DerivativeCoeffs out;
  auto push = [&](int n, std::complex<double> c) {
    if (c == std::complex<double>{0.0, 0.0}) return;
    if (n > basis.n_max) {
      out.truncated = true;
      return;
    }
    out.terms.push_back({n, c});
  };

  switch (alpha) {
    case Param::Tau:
      push(k - 1, -0.5 * sigma * std::sqrt(static_cast<double>(k)));
      push(k + 1, 0.5 * sigma * std::sqrt(static_cast<double>(k + 1)));
      break;
    case Param::Omega:
      push(k - 1, -kI / sigma * std::sqrt(static_cast<double>(k)));
      push(k, -kI * tau);
      push(k + 1, -kI / sigma * std::sqrt(static_cast<double>(k + 1)));
      break;
    case Param::Theta:
      push(k, -kI);
      break;
  }
  return out;
}

Eigen::MatrixXd discretize_envelopes(const ModeBasis& basis,
                                     const TimeGrid& grid) {
  basis.validate();
  grid.validate();
  const double tau = basis.params.tau;
  const double sigma = basis.params.sigma;
  const double lo = grid.t_start - 0.5 * grid.dt;
  const double hi = grid.last_center() + 0.5 * grid.dt;
  if (lo > tau - 8.0 / sigma || hi < tau + 8.0 / sigma)
    throw std::invalid_argument(
        "discretize_envelopes: grid must span tau +- 8/sigma");
  if (grid.dt * sigma > 0.5)
    throw std::invalid_argument(
        "discretize_envelopes: dt*sigma must be <= 0.5 to resolve the modes");

  Eigen::MatrixXd u(basis.n_max + 1, grid.n_bins);
  const double root_dt = std::sqrt(grid.dt);
  for (int i = 0; i < grid.n_bins; ++i) {
    const double t = grid.center(i);
    for (int n = 0; n <= basis.n_max; ++n)
      u(n, i) = root_dt * mode_envelope(n, t, basis.params);
  }
  return u;
}

ModeParams apply_target(const ModeParams& in, const TargetKinematics& kin) {
  in.validate();
  kin.validate();
  ModeParams out = in;
  out.tau = in.tau + 2.0 * kin.range / kin.light_speed;
  out.omega = in.omega * (1.0 + 2.0 * kin.velocity / kin.light_speed);
  out.theta = in.theta + kin.reflection_phase;
  return out;
}

ModeParams unapply_target(const ModeParams& out, const TargetKinematics& kin) {
  out.validate();
  kin.validate();
  ModeParams in = out;
  in.tau = out.tau - 2.0 * kin.range / kin.light_speed;
  in.omega = out.omega / (1.0 + 2.0 * kin.velocity / kin.light_speed);
  in.theta = out.theta - kin.reflection_phase;
  return in;
}

TransformCheck infinitesimal_transform_check(const ModeBasis& basis,
                                             double eps_tau, double eps_omega,
                                             double eps_theta) {
  basis.validate();
  const ModeParams& pin = basis.params;
  if (std::abs(eps_tau * pin.sigma) >= 1e-3 ||
      std::abs(eps_omega / pin.sigma) >= 1e-3 || std::abs(eps_theta) >= 1e-3)
    throw std::invalid_argument(
        "infinitesimal_transform_check: eps parameters must be < 1e-3");

  ModeParams pout = pin;
  pout.tau += eps_tau;
  pout.omega += eps_omega;
  pout.theta += eps_theta;

  const double half = 12.0 / pin.sigma +
                      std::sqrt(2.0 * basis.n_max + 1.0) * std::sqrt(2.0) / pin.sigma;
  const int quad_n = 8000;

  // <phi_n(out), phi_m(in)> = int env_n(out) env_m(in) e^{i(eps_w t + eps_th)} dt
  auto overlap = [&](int n, int m) {
    auto re = [&](double t) {
      return mode_envelope(n, t, pout) * mode_envelope(m, t, pin) *
             std::cos(eps_omega * t + eps_theta);
    };
    auto im = [&](double t) {
      return mode_envelope(n, t, pout) * mode_envelope(m, t, pin) *
             std::sin(eps_omega * t + eps_theta);
    };
    const double a = pin.tau - half, b = pin.tau + half;
    return std::complex<double>(simpson(re, a, b, quad_n),
                                simpson(im, a, b, quad_n));
  };

  auto mix_coeff = [&](int n) {  // B_n
    return std::complex<double>(-eps_tau * pin.sigma * std::sqrt(n) / 2.0,
                                eps_omega * std::sqrt(n) / pin.sigma);
  };
  const std::complex<double> diag_pred =
      1.0 + kI * (eps_theta + eps_omega * pin.tau);  // A_n

  TransformCheck result;
  result.diagonal.resize(basis.n_max + 1);
  for (int n = 0; n <= basis.n_max; ++n) {
    const std::complex<double> cnn = overlap(n, n);
    result.diagonal(n) = cnn;
    double r = std::abs(cnn - diag_pred);
    if (n >= 1) r = std::max(r, std::abs(overlap(n, n - 1) - mix_coeff(n)));
    r = std::max(r, std::abs(overlap(n, n + 1) + std::conj(mix_coeff(n + 1))));
    result.max_residual = std::max(result.max_residual, r);
  }
  return result;
}

}  // namespace qlidar
