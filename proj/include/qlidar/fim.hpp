#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>

#include "qlidar/receiver.hpp"
#include "qlidar/state.hpp"

namespace qlidar {

/// 3x3 symmetric information matrix over (tau, omega, theta), in that order.
struct InfoMatrix {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();

  static constexpr std::array<const char*, 3> labels{"tau", "omega", "theta"};

  double symmetry_error() const;
  double min_eigenvalue() const;
};

enum class CrbStatus { Ok, Singular, Pseudo };

/// Per-shot Cramer-Rao bounds for tau and omega with theta marginalized as a
/// nuisance (full 3x3 inversion).
struct CrbResult {
  double var_tau = 0.0;
  double var_omega = 0.0;
  CrbStatus status = CrbStatus::Ok;
  std::array<bool, 3> null_directions{false, false, false};
};

/// Map from the estimation parameters (tau, omega, theta) to the Gaussian
/// statistics of the measurement record. The receiver is fixed: detunings
/// given in `rx` are those seen at the reference point `params`, so moving
/// omega or theta shifts the effective detuning accordingly.
struct MeasurementModel {
  StateSpec spec;
  ModeParams params;  // reference parameter point
  ReceiverSetup rx;   // detunings quoted at the reference point
  int n_max = 0;

  static MeasurementModel make(StateSpec spec, ModeParams params,
                               ReceiverSetup rx);

  GaussianStats stats_at(double tau, double omega, double theta) const;
  GaussianStats stats() const;  // at the reference point
  bool has_squeezing() const;
};

/// Central-difference steps, parameter-adaptive defaults.
struct FdSteps {
  double h_tau = 1e-4;
  double h_omega = 1e-4;
  double h_theta = 1e-4;

  static FdSteps defaults(const ModeParams& p);
};

struct NumericFimResult {
  InfoMatrix fim;
  bool step_unstable = false;    // halving the steps moved an entry by > 1%
  double max_step_change = 0.0;  // largest relative change under halving
};

/// Gaussian-model Fisher information by central differences of the mean and
/// covariance; the covariance inverse is applied through Cholesky solves.
NumericFimResult numeric_fim(const MeasurementModel& model, const FdSteps& steps,
                             bool check_step_stability = true);

/// Closed-form homodyne Fisher information assembled in the mode basis from
/// the tridiagonal covariance; valid for |delta_omega|*DeltaT < 0.1 and
/// |delta_theta + delta_omega*tau| < 0.1, arbitrary kappa.
InfoMatrix analytic_homodyne_fim(const StateSpec& spec, const ModeBasis& basis,
                                 const ReceiverSetup& rx);

/// Invert the full 3x3 matrix and report the (tau, omega) diagonal. Condition
/// number above 1e12 yields status Singular with the zero-information
/// directions flagged; with allow_pseudo the pseudo-inverse diagonal is
/// returned instead and the status is Pseudo.
CrbResult crb(const InfoMatrix& fim, bool allow_pseudo = false);

/// Closed-form bounds in the displacement-dominant regime
/// (N_coh >> N_sq, three-mode probe shape), arbitrary kappa.
CrbResult displacement_dominant_crb(double n_coh, double r, double kappa,
                                    double delta_t, double delta_omega);

/// Maximum-likelihood fit of (tau, omega, theta) to a single trace by
/// Nelder-Mead on the exact Gaussian log-likelihood. Returns false when the
/// optimizer fails to converge.
bool mle_fit(const MeasurementModel& model, const Eigen::VectorXd& trace,
             const Eigen::Vector3d& start, Eigen::Vector3d& estimate);

struct MleReport {
  double mse_tau = 0.0;
  double mse_omega = 0.0;
  double crb_tau = 0.0;    // CRB at the fit's repetition count (per-shot / L)
  double crb_omega = 0.0;
  int traces_per_fit = 1;
  int trials = 0;
  int dropped = 0;  // non-converged trials, excluded from the MSE

  double ratio_tau() const { return mse_tau / crb_tau; }
  double ratio_omega() const { return mse_omega / crb_omega; }
};

/// Monte-Carlo check of CRB attainability: samples m traces at the reference
/// point, fits them by maximum likelihood in batches of `traces_per_fit`
/// (joint likelihood, start offset by 0.1 CRB standard deviations) and
/// reports empirical MSEs next to the CRB at that repetition count. Mean-
/// encoded models reach the bound with single traces; covariance-encoded
/// ones need several repetitions per fit to enter the asymptotic regime.
MleReport mle_verify(const MeasurementModel& model, int m, std::uint64_t seed,
                     int traces_per_fit = 1);

}  // namespace qlidar
