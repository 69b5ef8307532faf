#include "qlidar/state.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "qlidar/numerics.hpp"

namespace qlidar {

void StateSpec::validate() const {
  std::set<int> seen;
  for (const auto& occ : occupations) {
    if (occ.n < 0) throw std::invalid_argument("StateSpec: mode index must be >= 0");
    if (occ.r < 0.0) throw std::invalid_argument("StateSpec: squeezing magnitude must be >= 0");
    if (!std::isfinite(occ.r) || !std::isfinite(occ.phi) ||
        !std::isfinite(occ.alpha.real()) || !std::isfinite(occ.alpha.imag()))
      throw std::invalid_argument("StateSpec: fields must be finite");
    if (!seen.insert(occ.n).second)
      throw std::invalid_argument("StateSpec: mode indices must be distinct");
  }
}

bool StateSpec::is_vacuum() const {
  for (const auto& occ : occupations)
    if (occ.r > 0.0 || std::abs(occ.alpha) > 0.0) return false;
  return true;
}

int StateSpec::max_index() const {
  int m = -1;
  for (const auto& occ : occupations) m = std::max(m, occ.n);
  return m;
}

std::string StateSpec::to_json() const {
  nlohmann::json occs = nlohmann::json::array();
  for (const auto& occ : occupations) {
    occs.push_back({{"n", occ.n},
                    {"alpha_re", occ.alpha.real()},
                    {"alpha_im", occ.alpha.imag()},
                    {"r", occ.r},
                    {"phi", occ.phi}});
  }
  return nlohmann::json{{"occupations", occs}}.dump();
}

StateSpec StateSpec::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  StateSpec spec;
  for (const auto& o : j.at("occupations")) {
    ModeOccupation occ;
    occ.n = o.at("n").get<int>();
    occ.alpha = {o.at("alpha_re").get<double>(), o.at("alpha_im").get<double>()};
    occ.r = o.at("r").get<double>();
    occ.phi = o.at("phi").get<double>();
    spec.occupations.push_back(occ);
  }
  spec.validate();
  return spec;
}

PhotonBudget photon_budget(const StateSpec& spec) {
  spec.validate();
  PhotonBudget b;
  for (const auto& occ : spec.occupations) {
    b.n_coh += std::norm(occ.alpha);
    b.n_sq += std::sinh(occ.r) * std::sinh(occ.r);
  }
  b.n_total = b.n_coh + b.n_sq;
  return b;
}

namespace {

// Complex displacement envelope sum alpha_k env_k(t) and its time derivative
// (from the envelope recurrence, not finite differences).
std::complex<double> signal_envelope(const StateSpec& spec, double t,
                                     const ModeParams& p) {
  std::complex<double> s{0.0, 0.0};
  for (const auto& occ : spec.occupations)
    if (std::abs(occ.alpha) > 0.0) s += occ.alpha * mode_envelope(occ.n, t, p);
  return s;
}

std::complex<double> signal_envelope_deriv(const StateSpec& spec, double t,
                                           const ModeParams& p) {
  // d/dt env_k = (sigma/2)(sqrt(k) env_{k-1} - sqrt(k+1) env_{k+1})
  std::complex<double> d{0.0, 0.0};
  for (const auto& occ : spec.occupations) {
    if (std::abs(occ.alpha) == 0.0) continue;
    const int k = occ.n;
    double v = 0.0;
    if (k > 0) v += std::sqrt(static_cast<double>(k)) * mode_envelope(k - 1, t, p);
    v -= std::sqrt(k + 1.0) * mode_envelope(k + 1, t, p);
    d += occ.alpha * (0.5 * p.sigma) * v;
  }
  return d;
}

}  // namespace

DurationBandwidth duration_bandwidth(const StateSpec& spec,
                                     const ModeBasis& basis) {
  spec.validate();
  basis.validate();
  const PhotonBudget budget = photon_budget(spec);
  if (budget.n_total == 0.0) return {};

  const ModeParams& p = basis.params;
  const double sigma = p.sigma;

  double second_t = 0.0, second_w = 0.0;
  for (const auto& occ : spec.occupations) {
    const double nsq = std::sinh(occ.r) * std::sinh(occ.r);
    if (nsq == 0.0) continue;
    second_t += nsq * (2.0 / (sigma * sigma)) * (occ.n + 0.5);
    second_w += nsq * (sigma * sigma / 2.0) * (occ.n + 0.5);
  }

  if (budget.n_coh > 0.0) {
    const int top = spec.max_index();
    const double half =
        (std::sqrt(2.0 * (top + 2) + 1.0) * std::sqrt(2.0) + 10.0) / sigma;
    const double a = p.tau - half, b = p.tau + half;
    const int quad_n = 6000;

    const double center_t =
        simpson([&](double t) { return t * std::norm(signal_envelope(spec, t, p)); },
                a, b, quad_n) /
        budget.n_coh;

    second_t += simpson(
        [&](double t) {
          return (t - p.tau) * (t - p.tau) * std::norm(signal_envelope(spec, t, p));
        },
        a, b, quad_n);
    second_w += simpson(
        [&](double t) { return std::norm(signal_envelope_deriv(spec, t, p)); }, a,
        b, quad_n);

    // frequency first moment about omega: -Im int conj(env) env' dt
    const double m1 = -simpson(
        [&](double t) {
          return std::imag(std::conj(signal_envelope(spec, t, p)) *
                           signal_envelope_deriv(spec, t, p));
        },
        a, b, quad_n);

    const double dt_guess = std::sqrt(second_t / budget.n_total);
    if (std::abs(center_t - p.tau) > 1e-6 * dt_guess)
      throw std::invalid_argument(
          "duration_bandwidth: displacement signal is not centered on tau");
    const double dw_guess = std::sqrt(second_w / budget.n_total);
    if (std::abs(m1) > 1e-6 * dw_guess * budget.n_coh)
      throw std::invalid_argument(
          "duration_bandwidth: displacement signal is not centered on omega");
  }

  DurationBandwidth out;
  out.delta_t = std::sqrt(second_t / budget.n_total);
  out.delta_omega = std::sqrt(second_w / budget.n_total);
  return out;
}

StateSpec standard_probe(double n_photons, double f_sq,
                         std::optional<double> r_cap) {
  return probe_variant(n_photons, f_sq, ProbeVariant::Standard, r_cap);
}

StateSpec probe_variant(double n_photons, double f_sq, ProbeVariant variant,
                        std::optional<double> r_cap) {
  if (n_photons < 0.0) throw std::invalid_argument("probe: N must be >= 0");
  if (f_sq < 0.0 || f_sq > 1.0)
    throw std::invalid_argument("probe: f_sq must be in [0, 1]");
  if (n_photons == 0.0) return {};

  double r = std::asinh(std::sqrt(f_sq * n_photons / 3.0));
  if (r_cap && r > *r_cap) r = *r_cap;  // remainder routed to displacement
  const double n_sq = 3.0 * std::sinh(r) * std::sinh(r);
  const double n_coh = n_photons - n_sq;

  double phi0 = 0.0, phi1 = -M_PI_2, phi2 = 0.0;
  if (variant == ProbeVariant::Phi0Pi) phi0 = M_PI;
  if (variant == ProbeVariant::Phi1Zero) phi1 = 0.0;

  const std::complex<double> alpha1 =
      std::sqrt(std::max(n_coh, 0.0)) *
      std::exp(std::complex<double>(0.0, -M_PI_4));

  StateSpec spec;
  if (r > 0.0) {
    spec.occupations.push_back({0, {0.0, 0.0}, r, phi0});
    spec.occupations.push_back({1, alpha1, r, phi1});
    spec.occupations.push_back({2, {0.0, 0.0}, r, phi2});
  } else {
    spec.occupations.push_back({1, alpha1, 0.0, 0.0});
  }
  return spec;
}

ModeBasis basis_for(const StateSpec& spec, const ModeParams& params) {
  ModeBasis basis;
  basis.params = params;
  basis.n_max = std::max(spec.max_index(), 0) + 5;
  return basis;
}

}  // namespace qlidar
