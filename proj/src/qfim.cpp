#include "qlidar/qfim.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include "qlidar/numerics.hpp"

namespace qlidar {

namespace {

constexpr std::complex<double> kI{0.0, 1.0};
using cd = std::complex<double>;

// Untruncated derivative-expansion coefficients gamma_{alpha k n}:
// d(mode k)/d(param alpha) = sum_n gamma_{alpha k n} mode_n.
struct GammaRow {
  std::array<int, 3> idx{-1, -1, -1};
  std::array<cd, 3> val{};
  int count = 0;

  void push(int n, cd v) {
    if (n < 0 || v == cd{}) return;
    idx[count] = n;
    val[count] = v;
    ++count;
  }
  cd at(int n) const {
    for (int i = 0; i < count; ++i)
      if (idx[i] == n) return val[i];
    return {};
  }
};

GammaRow gamma_row(int alpha, int k, double sigma, double tau) {
  GammaRow row;
  switch (alpha) {
    case 0:  // tau
      row.push(k - 1, -0.5 * sigma * std::sqrt(static_cast<double>(k)));
      row.push(k + 1, 0.5 * sigma * std::sqrt(k + 1.0));
      break;
    case 1:  // omega
      row.push(k - 1, -kI / sigma * std::sqrt(static_cast<double>(k)));
      row.push(k, -kI * tau);
      row.push(k + 1, -kI / sigma * std::sqrt(k + 1.0));
      break;
    default:  // theta
      row.push(k, -kI);
      break;
  }
  return row;
}

struct ModeTables {
  Eigen::VectorXd s, c, phi;
  Eigen::VectorXcd alpha;
  std::vector<int> squeezed;   // indices with r > 0
  std::vector<int> displaced;  // indices with alpha != 0
  int top = 0;
};

ModeTables mode_tables(const StateSpec& spec) {
  ModeTables t;
  int max_pop = 0;
  for (const auto& occ : spec.occupations) max_pop = std::max(max_pop, occ.n);
  t.top = max_pop + 2;
  t.s = Eigen::VectorXd::Zero(t.top + 1);
  t.c = Eigen::VectorXd::Ones(t.top + 1);
  t.phi = Eigen::VectorXd::Zero(t.top + 1);
  t.alpha = Eigen::VectorXcd::Zero(t.top + 1);
  for (const auto& occ : spec.occupations) {
    t.s(occ.n) = std::sinh(occ.r);
    t.c(occ.n) = std::cosh(occ.r);
    t.phi(occ.n) = occ.phi;
    t.alpha(occ.n) = occ.alpha;
    if (occ.r > 0.0) t.squeezed.push_back(occ.n);
    if (std::abs(occ.alpha) > 0.0) t.displaced.push_back(occ.n);
  }
  return t;
}

void fill_qcrb(QfimResult& result) {
  InfoMatrix as_info;
  as_info.m = result.j;
  const CrbResult bounds = crb(as_info, /*allow_pseudo=*/true);
  result.qcrb_tau = bounds.var_tau;
  result.qcrb_omega = bounds.var_omega;
}

}  // namespace

QfimResult displaced_squeezed_qfim(const StateSpec& spec,
                                   const ModeBasis& basis) {
  spec.validate();
  basis.validate();
  const double sigma = basis.params.sigma;
  const double tau = basis.params.tau;
  const ModeTables t = mode_tables(spec);

  auto gam = [&](int p, int k) { return gamma_row(p, k, sigma, tau); };

  QfimResult result;
  for (int i = 0; i < 3; ++i)
    for (int j = i; j < 3; ++j) {
      cd acc{0.0, 0.0};

      // Squeezing-only terms.
      for (int k : t.squeezed) {
        const double sk2 = t.s(k) * t.s(k);
        const GammaRow gi = gam(i, k), gj = gam(j, k);
        for (int a = 0; a < gi.count; ++a) {
          const int n = gi.idx[a];
          if (n > t.top) continue;
          acc += std::conj(gi.val[a]) * gj.at(n) * t.c(n) * t.c(n) * sk2;
        }
        for (int n : t.squeezed) {
          const cd gink = gam(i, n).at(k);
          const cd gjkn = gj.at(n);
          if (gink == cd{} || gjkn == cd{}) continue;
          acc += std::conj(gink) * gjkn * t.c(k) * t.c(n) * t.s(k) * t.s(n) *
                 std::exp(kI * (t.phi(k) - t.phi(n)));
        }
      }

      // Displacement-squeezing cross terms and the pure displacement term.
      for (int k : t.squeezed) {
        const GammaRow gi = gam(i, k), gj = gam(j, k);
        const double sk2 = t.s(k) * t.s(k);
        for (int a = 0; a < gi.count; ++a)
          for (int b = 0; b < gj.count; ++b) {
            const int np = gi.idx[a], n = gj.idx[b];
            if (np > t.top || n > t.top) continue;
            acc += std::conj(gi.val[a]) * gj.val[b] * t.alpha(np) *
                   std::conj(t.alpha(n)) * sk2;
          }
        const double csk = t.c(k) * t.s(k);
        for (int kp = std::max(k - 1, 0); kp <= k + 1; ++kp) {
          const cd gikpk = gam(i, kp).at(k);
          if (gikpk == cd{} || kp > t.top) continue;
          for (int b = 0; b < gj.count; ++b) {
            const int n = gj.idx[b];
            if (n > t.top) continue;
            acc -= std::conj(gikpk) * gj.val[b] * std::conj(t.alpha(kp)) *
                   std::conj(t.alpha(n)) * csk * std::exp(kI * t.phi(k));
          }
        }
      }
      for (int n : t.squeezed) {
        const double csn = t.c(n) * t.s(n);
        const GammaRow gi = gam(i, n);
        for (int a = 0; a < gi.count; ++a) {
          const int np = gi.idx[a];
          if (np > t.top) continue;
          for (int k = std::max(n - 1, 0); k <= n + 1; ++k) {
            const cd gjkn = gam(j, k).at(n);
            if (gjkn == cd{} || k > t.top) continue;
            acc -= std::conj(gi.val[a]) * gjkn * t.alpha(np) * t.alpha(k) * csn *
                   std::exp(-kI * t.phi(n));
          }
        }
      }
      for (int k : t.displaced)
        for (int kp : t.displaced) {
          const GammaRow gj = gam(j, k), gi = gam(i, kp);
          for (int b = 0; b < gj.count; ++b) {
            const int n = gj.idx[b];
            if (n > t.top) continue;
            const cd gikpn = gi.at(n);
            if (gikpn == cd{}) continue;
            acc += std::conj(gikpn) * gj.val[b] * std::conj(t.alpha(kp)) *
                   t.alpha(k) * t.c(n) * t.c(n);
          }
        }

      result.j(i, j) = result.j(j, i) = 4.0 * acc.real();
    }

  fill_qcrb(result);
  return result;
}

QfimResult coherent_qfim(const StateSpec& spec, const ModeBasis& basis) {
  spec.validate();
  basis.validate();
  for (const auto& occ : spec.occupations)
    if (occ.r != 0.0)
      throw std::invalid_argument("coherent_qfim: spec must carry no squeezing");

  QfimResult result;
  if (spec.is_vacuum()) return result;

  const PhotonBudget budget = photon_budget(spec);
  const DurationBandwidth db = duration_bandwidth(spec, basis);
  const double n = budget.n_total;
  const double tau = basis.params.tau;

  // Modulation cross term 4 Re[i int t conj(env) d(env)/dtau dt]; the
  // tau-derivative of the envelope expands over neighbor modes.
  const ModeParams& p = basis.params;
  const int top = spec.max_index();
  const double half = (std::sqrt(2.0 * (top + 2) + 1.0) * std::sqrt(2.0) + 10.0) /
                      p.sigma;
  auto envelope_sum = [&](double time) {
    cd acc{0.0, 0.0};
    for (const auto& occ : spec.occupations)
      if (std::abs(occ.alpha) > 0.0)
        acc += occ.alpha * mode_envelope(occ.n, time, p);
    return acc;
  };
  auto envelope_dtau = [&](double time) {
    cd acc{0.0, 0.0};
    for (const auto& occ : spec.occupations) {
      if (std::abs(occ.alpha) == 0.0) continue;
      double v = 0.0;
      if (occ.n > 0)
        v -= 0.5 * p.sigma * std::sqrt(static_cast<double>(occ.n)) *
             mode_envelope(occ.n - 1, time, p);
      v += 0.5 * p.sigma * std::sqrt(occ.n + 1.0) *
           mode_envelope(occ.n + 1, time, p);
      acc += occ.alpha * v;
    }
    return acc;
  };
  const double j_tw =
      4.0 *
      std::real(kI * cd(simpson(
                           [&](double time) {
                             return std::real(
                                 cd(time) * std::conj(envelope_sum(time)) *
                                 envelope_dtau(time));
                           },
                           p.tau - half, p.tau + half, 6000),
                       simpson(
                           [&](double time) {
                             return std::imag(
                                 cd(time) * std::conj(envelope_sum(time)) *
                                 envelope_dtau(time));
                           },
                           p.tau - half, p.tau + half, 6000)));

  result.j(0, 0) = 4.0 * db.delta_omega * db.delta_omega * n;
  result.j(1, 1) = 4.0 * (db.delta_t * db.delta_t + tau * tau) * n;
  result.j(2, 2) = 4.0 * n;
  result.j(1, 2) = result.j(2, 1) = 4.0 * tau * n;
  result.j(0, 2) = result.j(2, 0) = 0.0;
  result.j(0, 1) = result.j(1, 0) = j_tw;

  fill_qcrb(result);
  return result;
}

GapReport qfim_vs_fim_gap(const StateSpec& spec, const ModeBasis& basis,
                          const ReceiverSetup& rx) {
  rx.validate();
  if (rx.kappa != 1.0 || rx.delta_omega != 0.0 || rx.delta_theta != 0.0)
    throw std::invalid_argument(
        "qfim_vs_fim_gap: requires kappa = 1 and zero detunings");

  const QfimResult q = displaced_squeezed_qfim(spec, basis);
  const InfoMatrix f = analytic_homodyne_fim(spec, basis, rx);

  GapReport report;
  report.gap = q.j - f.m;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(report.gap,
                                                    Eigen::EigenvaluesOnly);
  report.eigenvalues = es.eigenvalues();
  if (q.j(0, 0) != 0.0) report.rel_gap_tau = report.gap(0, 0) / q.j(0, 0);
  if (q.j(1, 1) != 0.0) report.rel_gap_omega = report.gap(1, 1) / q.j(1, 1);
  return report;
}

}  // namespace qlidar
