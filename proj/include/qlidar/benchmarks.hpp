#pragma once

#include "qlidar/fim.hpp"

namespace qlidar {

struct VarPair {
  double var_tau = 0.0;
  double var_omega = 0.0;

  double product() const { return var_tau * var_omega; }
};

/// Quantum-optimal bounds of a coherent-state lidar; a caveat label is
/// attached in emitted metadata because no known measurement attains both
/// simultaneously.
VarPair cl_ultimate(double n_photons, double delta_t, double delta_omega);

inline constexpr const char* kClUltimateCaveat = "potentially unattainable";

/// Best-known coherent-state strategy (heterodyne reception); exactly twice
/// cl_ultimate componentwise.
VarPair cl_heterodyne(double n_photons, double delta_t, double delta_omega);

/// LO phase cases for coherent-state homodyne reception: Matched puts the
/// signal's derivative fully in the measured quadrature (singular in omega),
/// Quarter is the 90-degree offset (singular in tau), MidPi4 splits both.
enum class HomodynePhaseCase { Matched, Quarter, MidPi4 };

InfoMatrix cl_homodyne_fim(double n_photons, double delta_t, double delta_omega,
                           double tau, HomodynePhaseCase phase_case);

/// Squeezed-probe heterodyne reference points (kappa = 1). The omega entries
/// carry a units flag because the printed source expressions are
/// dimensionally inconsistent: the bandwidth factor was replaced by the
/// duration one, which the time-bin oracle confirms for Phi1Zero. The Phi0Pi
/// tau entry additionally failed its oracle check for every reading of the
/// variant and is flagged as such.
enum class QlHetVariant { Phi0Pi, Phi1Zero };

struct QlHetReference {
  VarPair vars;
  bool omega_units_flagged = false;
  bool tau_oracle_flagged = false;
  const char* note = "";
};

QlHetReference ql_heterodyne_reference(QlHetVariant variant, double n_photons,
                                       double delta_t, double delta_omega);

}  // namespace qlidar
