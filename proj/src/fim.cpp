#include "qlidar/fim.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>

#include "qlidar/errors.hpp"
#include "qlidar/numerics.hpp"

namespace qlidar {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};
constexpr double kSingularCondition = 1e12;

}  // namespace

double InfoMatrix::symmetry_error() const {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

double InfoMatrix::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

MeasurementModel MeasurementModel::make(StateSpec spec, ModeParams params,
                                        ReceiverSetup rx) {
  spec.validate();
  params.validate();
  rx.validate();
  MeasurementModel model;
  model.spec = std::move(spec);
  model.params = params;
  model.rx = rx;
  model.n_max = std::max(model.spec.max_index(), 0) + 5;
  return model;
}

GaussianStats MeasurementModel::stats_at(double tau, double omega,
                                         double theta) const {
  ModeParams p = params;
  p.tau = tau;
  ModeBasis basis{p, n_max};
  ReceiverSetup rx_eff = rx;
  rx_eff.delta_omega = rx.delta_omega - (omega - params.omega);
  rx_eff.delta_theta = rx.delta_theta - (theta - params.theta);
  return gaussian_stats(spec, basis, rx_eff);
}

GaussianStats MeasurementModel::stats() const {
  return stats_at(params.tau, params.omega, params.theta);
}

bool MeasurementModel::has_squeezing() const {
  for (const auto& occ : spec.occupations)
    if (occ.r > 0.0) return true;
  return false;
}

FdSteps FdSteps::defaults(const ModeParams& p) {
  FdSteps s;
  s.h_tau = 1e-4 / p.sigma * std::max(1.0, std::abs(p.tau) * p.sigma);
  s.h_omega = 1e-4 * p.sigma;
  s.h_theta = 1e-4;
  return s;
}

namespace {

InfoMatrix numeric_fim_once(const MeasurementModel& model, const FdSteps& steps) {
  const GaussianStats center = model.stats();
  Eigen::LLT<Eigen::MatrixXd> llt(center.sigma);
  if (llt.info() != Eigen::Success)
    throw NumericalError("numeric_fim: covariance factorization failed");

  const double t0 = model.params.tau, w0 = model.params.omega,
               th0 = model.params.theta;
  const std::array<double, 3> h{steps.h_tau, steps.h_omega, steps.h_theta};
  if (!(h[0] > 0 && h[1] > 0 && h[2] > 0))
    throw std::invalid_argument("numeric_fim: steps must be positive");

  std::array<Eigen::VectorXd, 3> dmu;
  std::array<Eigen::MatrixXd, 3> kmat;  // Sigma^{-1} dSigma
  for (int p = 0; p < 3; ++p) {
    double tp = t0, wp = w0, thp = th0, tm = t0, wm = w0, thm = th0;
    (p == 0 ? tp : p == 1 ? wp : thp) += h[p];
    (p == 0 ? tm : p == 1 ? wm : thm) -= h[p];
    const GaussianStats plus = model.stats_at(tp, wp, thp);
    const GaussianStats minus = model.stats_at(tm, wm, thm);
    dmu[p] = (plus.mu - minus.mu) / (2.0 * h[p]);
    kmat[p] = llt.solve((plus.sigma - minus.sigma) / (2.0 * h[p]));
  }

  InfoMatrix fim;
  for (int i = 0; i < 3; ++i) {
    const Eigen::VectorXd solved = llt.solve(dmu[i]);
    for (int j = i; j < 3; ++j) {
      const double mean_term = dmu[j].dot(solved);
      const double trace_term =
          0.5 * (kmat[i].array() * kmat[j].transpose().array()).sum();
      fim.m(i, j) = fim.m(j, i) = mean_term + trace_term;
    }
  }
  return fim;
}

}  // namespace

NumericFimResult numeric_fim(const MeasurementModel& model, const FdSteps& steps,
                             bool check_step_stability) {
  NumericFimResult result;
  result.fim = numeric_fim_once(model, steps);
  if (check_step_stability) {
    FdSteps halved = steps;
    halved.h_tau *= 0.5;
    halved.h_omega *= 0.5;
    halved.h_theta *= 0.5;
    const InfoMatrix refined = numeric_fim_once(model, halved);
    // Entries far below the matrix scale are physical zeros; measuring their
    // finite-difference noise against themselves would always trip the flag.
    const double scale = result.fim.m.cwiseAbs().maxCoeff();
    double worst = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const double denom =
            std::max(std::abs(result.fim.m(i, j)), 1e-3 * std::max(scale, 1e-300));
        worst = std::max(worst,
                         std::abs(refined.m(i, j) - result.fim.m(i, j)) / denom);
      }
    result.max_step_change = worst;
    result.step_unstable = worst > 0.01;
  }
  return result;
}

InfoMatrix analytic_homodyne_fim(const StateSpec& spec, const ModeBasis& basis,
                                 const ReceiverSetup& rx) {
  spec.validate();
  basis.validate();
  rx.validate();

  const double sigma = basis.params.sigma;
  const double tau = basis.params.tau;
  const double dt = rx.grid.dt;
  const double dw = rx.delta_omega;
  const double dth = rx.delta_theta;

  if (std::abs(dth + dw * tau) >= 0.1)
    throw std::invalid_argument(
        "analytic_homodyne_fim: requires |delta_theta + delta_omega*tau| < 0.1");
  if (dw != 0.0 && !spec.is_vacuum()) {
    const DurationBandwidth db = duration_bandwidth(spec, basis);
    if (std::abs(dw) * db.delta_t >= 0.1)
      throw std::invalid_argument(
          "analytic_homodyne_fim: homodyne condition |delta_omega|*DeltaT < 0.1 "
          "violated");
  }

  int max_sq = -1, max_disp = -1;
  for (const auto& occ : spec.occupations) {
    if (occ.r > 0.0) max_sq = std::max(max_sq, occ.n);
    if (std::abs(occ.alpha) > 0.0) max_disp = std::max(max_disp, occ.n);
  }
  const int top = std::max({max_sq + 1, max_disp + 2, 1});

  Eigen::VectorXd s = Eigen::VectorXd::Zero(top + 1);
  Eigen::VectorXd c = Eigen::VectorXd::Ones(top + 1);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(top + 1);
  Eigen::VectorXcd alpha = Eigen::VectorXcd::Zero(top + 1);
  for (const auto& occ : spec.occupations) {
    if (occ.n > top) continue;
    s(occ.n) = std::sinh(occ.r);
    c(occ.n) = std::cosh(occ.r);
    phi(occ.n) = occ.phi;
    alpha(occ.n) = occ.alpha;
  }

  // Per-mode covariance coefficients and their parameter derivatives.
  Eigen::VectorXd a_coef(top + 1), b_coef(top + 1), db_domega(top + 1);
  for (int n = 0; n <= top; ++n) {
    const double x = 2.0 * dth + 2.0 * dw * tau + phi(n);
    a_coef(n) = rx.kappa * (s(n) * s(n) - c(n) * s(n) * std::cos(x));
    b_coef(n) = rx.kappa * c(n) * s(n) * std::sin(x);
    db_domega(n) = -2.0 * tau * rx.kappa * c(n) * s(n) * std::cos(x);
  }
  // dA/d(tau, omega, theta); X depends on the true parameters through
  // delta_omega = w_LO - omega and delta_theta = th_LO - theta.
  auto da = [&](int p, int n) {
    if (p == 0) return 2.0 * dw * b_coef(n);
    if (p == 1) return -2.0 * tau * b_coef(n);
    return -2.0 * b_coef(n);
  };

  Eigen::VectorXd tdiag(top + 1), sdiag(top + 1);
  for (int n = 0; n <= top; ++n) {
    tdiag(n) = dt / (a_coef(n) + 0.5);
    sdiag(n) = (a_coef(n) + 0.5) / dt;
  }

  // dT_p(n) = d/dp of the inverse diagonal.
  Eigen::MatrixXd dtinv(3, top + 1);
  for (int p = 0; p < 3; ++p)
    for (int n = 0; n <= top; ++n) {
      const double ah = a_coef(n) + 0.5;
      dtinv(p, n) = -dt * da(p, n) / (ah * ah);
    }

  // V coefficients of the Y_n Y_{n+1} likelihood terms.
  Eigen::MatrixXd v(3, top);
  for (int n = 0; n < top; ++n) {
    v(0, n) = 0.5 * sigma * std::sqrt(n + 1.0) * (tdiag(n + 1) - tdiag(n));
    const double mix = std::sqrt(n + 1.0) / sigma *
                       (b_coef(n) + b_coef(n + 1));  // beta_n B_n + alpha_{n+1} B_{n+1}
    const double denom = (a_coef(n) + 0.5) * (a_coef(n + 1) + 0.5);
    const double q = mix / denom;
    const double dmix = std::sqrt(n + 1.0) / sigma *
                        (db_domega(n) + db_domega(n + 1));
    const double dq = dmix / denom -
                      q * (da(1, n) / (a_coef(n) + 0.5) +
                           da(1, n + 1) / (a_coef(n + 1) + 0.5));
    v(1, n) = -dt * q + dt * dw * dq;
    v(2, n) = 0.0;
  }

  InfoMatrix fim;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      double acc = 0.0;
      for (int n = 0; n < top; ++n)
        acc += sdiag(n) * sdiag(n + 1) * v(i, n) * v(j, n);
      for (int n = 0; n <= top; ++n)
        acc += 0.5 * sdiag(n) * sdiag(n) * dtinv(i, n) * dtinv(j, n);
      fim.m(i, j) = fim.m(j, i) = acc;
    }

  if (max_disp >= 0) {
    // Projections of the mean derivatives onto the mode envelopes, kept to
    // first order in delta_omega * (t - tau).
    auto t_op = [&](const Eigen::VectorXcd& vec) {
      Eigen::VectorXcd out = Eigen::VectorXcd::Zero(top + 1);
      for (int n = 0; n <= top; ++n) {
        std::complex<double> acc{0.0, 0.0};
        if (n + 1 <= top) acc += std::sqrt(n + 1.0) * vec(n + 1);
        if (n >= 1) acc += std::sqrt(static_cast<double>(n)) * vec(n - 1);
        out(n) = acc / sigma;
      }
      return out;
    };
    auto dtau_op = [&](const Eigen::VectorXcd& vec) {
      Eigen::VectorXcd out = Eigen::VectorXcd::Zero(top + 1);
      for (int n = 0; n <= top; ++n) {
        std::complex<double> acc{0.0, 0.0};
        if (n + 1 <= top) acc += std::sqrt(n + 1.0) * vec(n + 1);
        if (n >= 1) acc -= std::sqrt(static_cast<double>(n)) * vec(n - 1);
        out(n) = -0.5 * sigma * acc;
      }
      return out;
    };

    const std::complex<double> phase = std::exp(kI * (dw * tau + dth));
    const Eigen::VectorXcd g_tau = dtau_op(alpha);
    const Eigen::VectorXcd u_omega = t_op(alpha) + tau * alpha;
    std::array<Eigen::VectorXcd, 3> w;
    w[0] = phase * (g_tau + kI * dw * t_op(g_tau));
    w[1] = -kI * phase * (u_omega + kI * dw * t_op(u_omega));
    w[2] = -kI * phase * (alpha + kI * dw * t_op(alpha));

    const double amp = std::sqrt(2.0 * rx.kappa / dt);
    Eigen::MatrixXd d(3, top + 1);
    for (int p = 0; p < 3; ++p)
      for (int n = 0; n <= top; ++n) d(p, n) = amp * w[p](n).real();

    // First-order tridiagonal inverse of the mode-basis covariance.
    Eigen::VectorXd off(top);
    for (int n = 0; n < top; ++n) {
      const double mix = std::sqrt(n + 1.0) / sigma * (b_coef(n) + b_coef(n + 1));
      off(n) = -dt * dw * mix / ((a_coef(n) + 0.5) * (a_coef(n + 1) + 0.5));
    }
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        double acc = 0.0;
        for (int n = 0; n <= top; ++n) acc += d(i, n) * tdiag(n) * d(j, n);
        for (int n = 0; n < top; ++n)
          acc += off(n) * (d(i, n) * d(j, n + 1) + d(i, n + 1) * d(j, n));
        fim.m(i, j) += acc;
        if (i != j) fim.m(j, i) = fim.m(i, j);
      }
  }

  return fim;
}

CrbResult crb(const InfoMatrix& fim, bool allow_pseudo) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(fim.m);
  const Eigen::Vector3d evals = es.eigenvalues();
  const Eigen::Matrix3d evecs = es.eigenvectors();
  const double lmax = evals.cwiseAbs().maxCoeff();
  const double lmin = evals.minCoeff();

  CrbResult result;
  const bool singular = lmax == 0.0 || lmin <= 0.0 || lmax / lmin > kSingularCondition;
  if (!singular) {
    Eigen::Matrix3d inv = Eigen::Matrix3d::Zero();
    for (int k = 0; k < 3; ++k)
      inv += evecs.col(k) * evecs.col(k).transpose() / evals(k);
    result.var_tau = inv(0, 0);
    result.var_omega = inv(1, 1);
    result.status = CrbStatus::Ok;
    return result;
  }

  const double cut = lmax * (1.0 / kSingularCondition);
  Eigen::Matrix3d pinv = Eigen::Matrix3d::Zero();
  for (int k = 0; k < 3; ++k) {
    if (evals(k) > cut) {
      pinv += evecs.col(k) * evecs.col(k).transpose() / evals(k);
    } else {
      for (int p = 0; p < 3; ++p)
        if (evecs(p, k) * evecs(p, k) >= 0.25) result.null_directions[p] = true;
    }
  }
  if (allow_pseudo) {
    result.var_tau = pinv(0, 0);
    result.var_omega = pinv(1, 1);
    result.status = CrbStatus::Pseudo;
  } else {
    constexpr double inf = std::numeric_limits<double>::infinity();
    result.var_tau = result.null_directions[0] ? inf : pinv(0, 0);
    result.var_omega = result.null_directions[1] ? inf : pinv(1, 1);
    result.status = CrbStatus::Singular;
  }
  return result;
}

CrbResult displacement_dominant_crb(double n_coh, double r, double kappa,
                                    double delta_t, double delta_omega) {
  if (n_coh <= 0.0) throw std::invalid_argument("displacement_dominant_crb: n_coh must be > 0");
  if (r < 0.0) throw std::invalid_argument("displacement_dominant_crb: r must be >= 0");
  CrbResult result;
  if (kappa == 0.0) {
    result.status = CrbStatus::Singular;
    result.null_directions = {true, true, true};
    result.var_tau = result.var_omega = std::numeric_limits<double>::infinity();
    return result;
  }
  const double noise = 1.0 - kappa + kappa * std::exp(-2.0 * r);
  result.var_tau = (9.0 / 16.0) * noise / (delta_omega * delta_omega * kappa * n_coh);
  result.var_omega = (9.0 / 16.0) * noise / (delta_t * delta_t * kappa * n_coh);
  result.status = CrbStatus::Ok;
  return result;
}

namespace {

// Joint negative log-likelihood of a batch of traces (rows) under the model,
// up to a constant. With no squeezing the covariance is exactly shot noise
// and never depends on the parameters, so only the quadratic misfit matters.
class TraceObjective {
 public:
  TraceObjective(const MeasurementModel& model, const Eigen::MatrixXd& traces)
      : model_(model), traces_(traces), const_cov_(!model.has_squeezing()) {}

  double operator()(const Eigen::Vector3d& p) const {
    ModeParams mp = model_.params;
    mp.tau = p(0);
    ModeBasis basis{mp, model_.n_max};
    ReceiverSetup rx = model_.rx;
    rx.delta_omega = model_.rx.delta_omega - (p(1) - model_.params.omega);
    rx.delta_theta = model_.rx.delta_theta - (p(2) - model_.params.theta);

    const Eigen::VectorXd mu = mean_vector(model_.spec, basis, rx);
    if (const_cov_) {
      double acc = 0.0;
      for (int k = 0; k < traces_.rows(); ++k)
        acc += (traces_.row(k).transpose() - mu).squaredNorm();
      return model_.rx.grid.dt * acc;
    }

    const Eigen::MatrixXd sigma = covariance_matrix(model_.spec, basis, rx);
    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw NumericalError("mle: covariance factorization failed");
    double logdet = 0.0;
    const auto& l = llt.matrixLLT();
    for (int i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i));
    double acc = traces_.rows() * logdet;
    for (int k = 0; k < traces_.rows(); ++k) {
      const Eigen::VectorXd resid = traces_.row(k).transpose() - mu;
      acc += 0.5 * resid.dot(llt.solve(resid));
    }
    return acc;
  }

 private:
  const MeasurementModel& model_;
  const Eigen::MatrixXd& traces_;
  bool const_cov_;
};

// Plain Nelder-Mead in 3 dimensions.
bool nelder_mead(const TraceObjective& f, const Eigen::Vector3d& start,
                 const Eigen::Vector3d& step, Eigen::Vector3d& best) {
  constexpr int kMaxIter = 600;
  std::array<Eigen::Vector3d, 4> x;
  std::array<double, 4> fx;
  x[0] = start;
  for (int i = 0; i < 3; ++i) {
    x[i + 1] = start;
    x[i + 1](i) += step(i);
  }
  for (int i = 0; i < 4; ++i) fx[i] = f(x[i]);

  auto order = [&] {
    for (int i = 1; i < 4; ++i)
      for (int j = i; j > 0 && fx[j] < fx[j - 1]; --j) {
        std::swap(fx[j], fx[j - 1]);
        std::swap(x[j], x[j - 1]);
      }
  };

  for (int iter = 0; iter < kMaxIter; ++iter) {
    order();
    double spread = 0.0;
    for (int i = 0; i < 3; ++i)
      spread = std::max(spread, (x[3] - x[0]).cwiseAbs()(i) /
                                    std::max(1e-12, std::abs(step(i))));
    if (spread < 1e-7 &&
        std::abs(fx[3] - fx[0]) <= 1e-11 * (1.0 + std::abs(fx[0]))) {
      best = x[0];
      return true;
    }

    const Eigen::Vector3d centroid = (x[0] + x[1] + x[2]) / 3.0;
    const Eigen::Vector3d refl = centroid + (centroid - x[3]);
    const double frefl = f(refl);
    if (frefl < fx[0]) {
      const Eigen::Vector3d expand = centroid + 2.0 * (centroid - x[3]);
      const double fexp = f(expand);
      if (fexp < frefl) {
        x[3] = expand;
        fx[3] = fexp;
      } else {
        x[3] = refl;
        fx[3] = frefl;
      }
    } else if (frefl < fx[2]) {
      x[3] = refl;
      fx[3] = frefl;
    } else {
      const Eigen::Vector3d contract =
          frefl < fx[3] ? centroid + 0.5 * (refl - centroid)
                        : centroid + 0.5 * (x[3] - centroid);
      const double fcon = f(contract);
      if (fcon < std::min(frefl, fx[3])) {
        x[3] = contract;
        fx[3] = fcon;
      } else {
        for (int i = 1; i < 4; ++i) {
          x[i] = x[0] + 0.5 * (x[i] - x[0]);
          fx[i] = f(x[i]);
        }
      }
    }
  }
  return false;
}

}  // namespace

bool mle_fit(const MeasurementModel& model, const Eigen::VectorXd& trace,
             const Eigen::Vector3d& start, Eigen::Vector3d& estimate) {
  const Eigen::MatrixXd as_batch = trace.transpose();
  TraceObjective objective(model, as_batch);
  const Eigen::Vector3d step(1e-2 / model.params.sigma, 1e-2 * model.params.sigma,
                             1e-2);
  return nelder_mead(objective, start, step, estimate);
}

MleReport mle_verify(const MeasurementModel& model, int m, std::uint64_t seed,
                     int traces_per_fit) {
  if (m < 100) throw std::invalid_argument("mle_verify: need m >= 100");
  if (traces_per_fit < 1 || traces_per_fit > m)
    throw std::invalid_argument("mle_verify: traces_per_fit must be in [1, m]");

  const NumericFimResult nf = numeric_fim(model, FdSteps::defaults(model.params),
                                          /*check_step_stability=*/false);
  const CrbResult bound = crb(nf.fim);
  if (bound.status != CrbStatus::Ok)
    throw std::invalid_argument(
        "mle_verify: model FIM is singular, attainability undefined");

  const GaussianStats stats = model.stats();
  const Eigen::MatrixXd traces = sample_traces(stats, m, seed);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(nf.fim.m);
  Eigen::Matrix3d inv = Eigen::Matrix3d::Zero();
  for (int k = 0; k < 3; ++k)
    inv += es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose() /
           es.eigenvalues()(k);

  const int batch = traces_per_fit;
  const int fits = m / batch;
  const Eigen::Vector3d sd(std::sqrt(bound.var_tau / batch),
                           std::sqrt(bound.var_omega / batch),
                           std::sqrt(std::max(inv(2, 2), 0.0) / batch));
  const Eigen::Vector3d truth(model.params.tau, model.params.omega,
                              model.params.theta);

  MleReport report;
  report.traces_per_fit = batch;
  report.trials = fits;
  report.crb_tau = bound.var_tau / batch;
  report.crb_omega = bound.var_omega / batch;

  double acc_tau = 0.0, acc_omega = 0.0;
  int converged = 0;
  for (int k = 0; k < fits; ++k) {
    const Eigen::MatrixXd block = traces.middleRows(k * batch, batch);
    const Eigen::Vector3d start = truth + 0.1 * sd;
    Eigen::Vector3d est;
    TraceObjective objective(model, block);
    const Eigen::Vector3d step = sd.cwiseMax(1e-6);
    if (!nelder_mead(objective, start, step, est)) {
      ++report.dropped;
      continue;
    }
    acc_tau += (est(0) - truth(0)) * (est(0) - truth(0));
    acc_omega += (est(1) - truth(1)) * (est(1) - truth(1));
    ++converged;
  }
  if (converged == 0) throw NumericalError("mle_verify: no trial converged");
  report.mse_tau = acc_tau / converged;
  report.mse_omega = acc_omega / converged;
  return report;
}

}  // namespace qlidar
