#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qlidar/fim.hpp"

namespace qlidar {

inline constexpr const char* kVersion = "0.1.0";

enum class Experiment { PhotonSweep, KappaSweep, DetuningSweep, MleVerify };

struct GridOverride {
  double t_start = 0.0;
  double dt = 0.0;
  int n_bins = 0;
};

/// Configuration shared by the sweep experiments. Axis values are the swept
/// quantity: photon number, transmissivity or phase detuning depending on the
/// experiment. All quantities are in natural units (sigma = 1 by default);
/// `sigma_physical` rescales the emitted time/frequency columns.
struct SweepConfig {
  Experiment experiment = Experiment::PhotonSweep;

  double n_photons = 100.0;  // fixed N for kappa/detuning/mle experiments
  double f_sq = 0.75;
  bool optimize_f_sq = false;
  std::optional<double> r_cap;

  double kappa = 1.0;
  double delta_omega = 0.0;
  double delta_theta = 0.0;

  double sigma = 1.0;
  double tau = 0.0;
  double omega = 5.0;
  double theta = 0.0;
  std::optional<GridOverride> grid;
  std::optional<double> sigma_physical;

  std::vector<double> axis;
  std::string out;
  std::uint64_t seed = 1;
  int jobs = 1;
  int mle_trials = 2000;

  void validate() const;
  std::string to_json() const;
  static SweepConfig from_json(const std::string& text);

  /// Log-spaced axis helper, endpoints included.
  static std::vector<double> log_axis(double lo, double hi, int points);
};

struct SweepRow {
  double axis = 0.0;
  double var_tau = 0.0;
  double var_omega = 0.0;
  double product = 0.0;
  double cl_het_product = 0.0;
  double cl_ultimate_product = 0.0;
  double f_sq_used = 0.0;
  double r_used = 0.0;
  double threshold = 0.0;  // detuning sweep: 1/(N_sq + 1); zero elsewhere
  std::string status = "ok";
};

struct SweepTable {
  std::vector<std::string> header;
  std::vector<SweepRow> rows;

  static std::vector<std::string> default_header();
};

/// Var[tau]*Var[omega] of the three-mode probe versus photon number at fixed
/// receiver settings, next to the coherent-state baselines.
SweepTable photon_sweep(const SweepConfig& cfg);

/// Same product versus transmissivity at fixed N, optimizing the squeezing
/// fraction per point (coarse grid then golden-section refinement).
SweepTable kappa_sweep(const SweepConfig& cfg);

/// Product versus LO phase detuning at fixed N and kappa = 1; the emitted
/// status column carries the threshold 1/(N_sq + 1) of each row.
SweepTable detuning_sweep(const SweepConfig& cfg);

struct MleJobReport {
  MleReport coherent;  // unused entries zero when a case is skipped
  MleReport squeezed;
  bool ran_coherent = false;
  bool ran_squeezed = false;
};

/// Monte-Carlo CRB attainability job wrapping mle_verify.
MleJobReport mle_verify_job(const SweepConfig& cfg);

/// CSV emission: header row, 17 significant digits, plus a sidecar
/// "<path>.meta.json" with the full config, seed and code version.
void emit(const SweepTable& table, const std::string& path,
          const SweepConfig& cfg);

SweepTable parse_table(const std::string& path);

/// Linear fit of log(product) against log(axis) over rows with axis inside
/// [lo, hi]; used for scaling-exponent checks.
double fit_loglog_slope(const SweepTable& table, double lo, double hi);

/// Axis value where the QL product crosses the CL-ultimate product,
/// interpolated log-log between bracketing rows; NaN when no crossing.
double find_ultimate_crossing(const SweepTable& table);

}  // namespace qlidar
