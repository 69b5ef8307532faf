#include "qlidar/benchmarks.hpp"

#include <stdexcept>

namespace qlidar {

namespace {

void require_positive_photons(double n) {
  if (!(n > 0.0)) throw std::invalid_argument("baseline: N must be > 0");
}

}  // namespace

VarPair cl_ultimate(double n_photons, double delta_t, double delta_omega) {
  require_positive_photons(n_photons);
  return {1.0 / (4.0 * delta_omega * delta_omega * n_photons),
          1.0 / (4.0 * delta_t * delta_t * n_photons)};
}

VarPair cl_heterodyne(double n_photons, double delta_t, double delta_omega) {
  require_positive_photons(n_photons);
  return {1.0 / (2.0 * delta_omega * delta_omega * n_photons),
          1.0 / (2.0 * delta_t * delta_t * n_photons)};
}

InfoMatrix cl_homodyne_fim(double n_photons, double delta_t, double delta_omega,
                           double tau, HomodynePhaseCase phase_case) {
  require_positive_photons(n_photons);
  const double n = n_photons;
  const double dw2 = delta_omega * delta_omega;
  const double dt2 = delta_t * delta_t;

  InfoMatrix f;
  switch (phase_case) {
    case HomodynePhaseCase::Matched:
      f.m(0, 0) = 4.0 * dw2 * n;
      break;
    case HomodynePhaseCase::Quarter:
      f.m(1, 1) = 4.0 * (dt2 + tau * tau) * n;
      break;
    case HomodynePhaseCase::MidPi4:
      f.m(0, 0) = 2.0 * dw2 * n;
      f.m(1, 1) = 2.0 * (dt2 + tau * tau) * n;
      f.m(0, 1) = f.m(1, 0) = n;
      f.m(2, 2) = 2.0 * n;
      f.m(1, 2) = f.m(2, 1) = 2.0 * n * tau;
      break;
  }
  return f;
}

QlHetReference ql_heterodyne_reference(QlHetVariant variant, double n_photons,
                                       double delta_t, double delta_omega) {
  require_positive_photons(n_photons);
  QlHetReference ref;
  const double dw2 = delta_omega * delta_omega;
  const double dt2 = delta_t * delta_t;
  switch (variant) {
    case QlHetVariant::Phi0Pi:
      ref.vars.var_tau = 1.0 / (4.0 * dw2 * n_photons);
      ref.vars.var_omega = 1.0 / ((3.0 / 4.0) * dt2 * n_photons);
      ref.omega_units_flagged = true;
      ref.tau_oracle_flagged = true;
      ref.note =
          "omega entry uses DeltaT^2 in place of the printed DeltaOmega^2; "
          "the tau entry disagrees with the time-bin oracle (factor ~2) for "
          "every reading of this variant";
      break;
    case QlHetVariant::Phi1Zero:
      ref.vars.var_tau = 1.0 / (dw2 * n_photons);
      ref.vars.var_omega = 1.0 / (3.0 * dt2 * n_photons);
      ref.omega_units_flagged = true;
      ref.note =
          "omega entry uses DeltaT^2 in place of the printed DeltaOmega^2; "
          "both entries agree with the time-bin oracle within 1%";
      break;
  }
  return ref;
}

}  // namespace qlidar
