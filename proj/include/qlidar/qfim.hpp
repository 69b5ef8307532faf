#pragma once

#include <Eigen/Dense>

#include "qlidar/fim.hpp"
#include "qlidar/state.hpp"

namespace qlidar {

/// Quantum Fisher information over (tau, omega, theta) for the lossless
/// channel, with the quantum Cramer-Rao bounds from full 3x3 inversion.
struct QfimResult {
  Eigen::Matrix3d j = Eigen::Matrix3d::Zero();
  double qcrb_tau = 0.0;
  double qcrb_omega = 0.0;
};

/// QFIM of a displaced-squeezed probe, evaluated from the sparse
/// mode-derivative contractions over the populated modes. Lossless channel
/// only; there is no lossy extension here.
QfimResult displaced_squeezed_qfim(const StateSpec& spec, const ModeBasis& basis);

/// QFIM of a purely coherent probe via the closed forms in the pulse moments:
/// J_tt = 4 dW^2 N, J_ww = 4 (dT^2 + tau^2) N, J_thth = 4N, J_wth = 4 tau N,
/// J_tth = 0 and J_tw from the modulation overlap (zero for unmodulated
/// signals). Rejects specs with nonzero squeezing.
QfimResult coherent_qfim(const StateSpec& spec, const ModeBasis& basis);

struct GapReport {
  Eigen::Matrix3d gap = Eigen::Matrix3d::Zero();  // QFIM - FIM
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();
  double rel_gap_tau = 0.0;    // gap(0,0) / J(0,0)
  double rel_gap_omega = 0.0;  // gap(1,1) / J(1,1)
};

/// QFIM minus the analytic homodyne FIM; requires kappa = 1 and zero
/// detunings. Eigenvalues should be nonnegative (quantum CR inequality) and
/// the diagonal gaps vanish when homodyne is the optimal measurement.
GapReport qfim_vs_fim_gap(const StateSpec& spec, const ModeBasis& basis,
                          const ReceiverSetup& rx);

}  // namespace qlidar
