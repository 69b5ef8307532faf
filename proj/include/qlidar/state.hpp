#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "qlidar/modes.hpp"

namespace qlidar {

/// One populated mode of a displaced-squeezed probe: displacement amplitude
/// alpha (sqrt photons), squeezing magnitude r >= 0 and squeezing angle phi.
struct ModeOccupation {
  int n = 0;
  std::complex<double> alpha{0.0, 0.0};
  double r = 0.0;
  double phi = 0.0;
};

/// Sparse multi-mode probe state; unlisted modes are vacuum.
struct StateSpec {
  std::vector<ModeOccupation> occupations;

  void validate() const;  // indices distinct and >= 0, r >= 0
  bool is_vacuum() const;
  int max_index() const;  // -1 for vacuum

  std::string to_json() const;
  static StateSpec from_json(const std::string& text);
};

struct PhotonBudget {
  double n_total = 0.0;
  double n_coh = 0.0;  // sum |alpha_n|^2
  double n_sq = 0.0;   // sum sinh^2(r_n)
};

/// Mean photon numbers; n_total = n_coh + n_sq exactly.
PhotonBudget photon_budget(const StateSpec& spec);

struct DurationBandwidth {
  double delta_t = 0.0;
  double delta_omega = 0.0;
};

/// RMS duration and bandwidth of the probe's energy distribution. Each
/// squeezed mode n contributes (2/sigma^2)(n+1/2) in time and its dual in
/// frequency; the displacement signal contributes its quadrature moments.
/// The displacement signal must be centered on (tau, omega); off-center
/// signals are rejected. Vacuum returns (0, 0).
DurationBandwidth duration_bandwidth(const StateSpec& spec,
                                     const ModeBasis& basis);

/// Squeezing magnitude corresponding to a 20 dB noise reduction,
/// 10*log10(e^{2r}) = 20.
inline constexpr double kTwentyDbRCap = 2.302585092994046;

/// Three-mode probe: equal squeezing r on modes 0..2 with angles
/// (0, -pi/2, 0) and displacement sqrt(N - 3 sinh^2 r) e^{-i pi/4} on
/// mode 1. f_sq is the photon fraction assigned to squeezing; if r_cap is
/// given and the implied r exceeds it, r clips to r_cap and the remainder
/// goes to displacement.
StateSpec standard_probe(double n_photons, double f_sq,
                         std::optional<double> r_cap = std::nullopt);

/// Variants of the standard probe used as heterodyne references: Phi0Pi sets
/// the mode-0 squeezing angle to pi, Phi1Zero sets the mode-1 angle to 0.
enum class ProbeVariant { Standard, Phi0Pi, Phi1Zero };

StateSpec probe_variant(double n_photons, double f_sq, ProbeVariant variant,
                        std::optional<double> r_cap = std::nullopt);

/// Basis sized for the spec under the default truncation policy
/// (highest populated index + 5).
ModeBasis basis_for(const StateSpec& spec, const ModeParams& params);

}  // namespace qlidar
