#include <doctest.h>

#include <cmath>
#include <complex>

#include "qlidar/state.hpp"

using namespace qlidar;
using std::complex;

namespace {

// Oracle: energy-distribution moments by direct quadrature. The frequency
// side uses an explicit discrete Fourier transform of the time-domain signal,
// independent of the per-mode closed forms used by the implementation.
struct MomentOracle {
  double delta_t2 = 0.0;
  double delta_omega2 = 0.0;
};

MomentOracle quadrature_moments(const StateSpec& spec, const ModeParams& p) {
  const double half = 16.0 / p.sigma;
  const int nt = 4000;
  const double dt = 2.0 * half / nt;

  auto signal = [&](double t) {
    complex<double> s{0.0, 0.0};
    for (const auto& occ : spec.occupations)
      if (std::abs(occ.alpha) > 0.0)
        s += occ.alpha * mode_envelope(occ.n, t, p);
    return s;
  };
  auto mode_density = [&](double t) {
    double acc = 0.0;
    for (const auto& occ : spec.occupations) {
      const double s = std::sinh(occ.r);
      if (s != 0.0) {
        const double env = mode_envelope(occ.n, t, p);
        acc += s * s * env * env;
      }
    }
    return acc;
  };

  double n_total = 0.0, second_t = 0.0;
  for (int i = 0; i <= nt; ++i) {
    const double t = p.tau - half + i * dt;
    const double w = (i == 0 || i == nt) ? 0.5 : 1.0;
    const double density = mode_density(t) + std::norm(signal(t));
    n_total += w * density * dt;
    second_t += w * density * (t - p.tau) * (t - p.tau) * dt;
  }

  // |FT|^2 of the field-energy spectrum: per-mode spectra by DFT of each
  // populated envelope, plus the displacement spectrum.
  const double numax = 12.0 * p.sigma;
  const int nw = 1200;
  const double dw = 2.0 * numax / nw;
  double second_w = 0.0;
  for (int k = 0; k <= nw; ++k) {
    const double u = -numax + k * dw;  // offset from the carrier
    const double wk = (k == 0 || k == nw) ? 0.5 : 1.0;
    complex<double> ft_sig{0.0, 0.0};
    double ft_modes = 0.0;
    for (const auto& occ : spec.occupations) {
      const double s = std::sinh(occ.r);
      if (s == 0.0 && std::abs(occ.alpha) == 0.0) continue;
      complex<double> ft_env{0.0, 0.0};
      for (int i = 0; i <= nt; ++i) {
        const double t = p.tau - half + i * dt;
        const double w = (i == 0 || i == nt) ? 0.5 : 1.0;
        ft_env += w * mode_envelope(occ.n, t, p) *
                  std::exp(complex<double>(0.0, u * t)) * dt;
      }
      ft_env /= std::sqrt(2.0 * M_PI);
      ft_modes += s * s * std::norm(ft_env);
      ft_sig += occ.alpha * ft_env;
    }
    second_w += wk * (ft_modes + std::norm(ft_sig)) * u * u * dw;
  }

  return {second_t / n_total, second_w / n_total};
}

}  // namespace

TEST_CASE("photon budget") {
  SUBCASE("vacuum") {
    const PhotonBudget b = photon_budget(StateSpec{});
    CHECK(b.n_total == 0.0);
    CHECK(b.n_coh == 0.0);
    CHECK(b.n_sq == 0.0);
  }
  SUBCASE("single squeezed mode") {
    StateSpec spec;
    spec.occupations.push_back({0, {0.0, 0.0}, 0.5, 0.0});
    const PhotonBudget b = photon_budget(spec);
    CHECK(b.n_sq == doctest::Approx(0.2715403).epsilon(1e-6));
    CHECK(b.n_coh == 0.0);
  }
  SUBCASE("three-mode probe splits exactly") {
    const StateSpec spec = standard_probe(100.0, 0.6);
    const PhotonBudget b = photon_budget(spec);
    CHECK(b.n_total == b.n_coh + b.n_sq);  // exact identity
    CHECK(b.n_total == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(b.n_sq == doctest::Approx(60.0).epsilon(1e-12));
  }
  SUBCASE("round-tripped spec gives bit-identical totals") {
    const StateSpec spec = standard_probe(37.5, 0.42);
    const StateSpec round = StateSpec::from_json(spec.to_json());
    const PhotonBudget a = photon_budget(spec);
    const PhotonBudget b = photon_budget(round);
    CHECK(a.n_total == b.n_total);
    CHECK(a.n_coh == b.n_coh);
    CHECK(a.n_sq == b.n_sq);
  }
}

TEST_CASE("state JSON round trip") {
  StateSpec spec;
  spec.occupations.push_back({0, {0.1, -0.2}, 0.7, 1.3});
  spec.occupations.push_back({3, {2.0, 0.5}, 0.0, 0.0});
  const StateSpec round = StateSpec::from_json(spec.to_json());
  REQUIRE(round.occupations.size() == 2);
  CHECK(round.occupations[0].alpha == spec.occupations[0].alpha);
  CHECK(round.occupations[1].n == 3);
  CHECK(round.occupations[0].r == 0.7);
}

TEST_CASE("state validation") {
  StateSpec dup;
  dup.occupations.push_back({1, {1.0, 0.0}, 0.0, 0.0});
  dup.occupations.push_back({1, {0.0, 0.0}, 0.3, 0.0});
  CHECK_THROWS_AS(dup.validate(), std::invalid_argument);

  StateSpec neg;
  neg.occupations.push_back({0, {0.0, 0.0}, -0.1, 0.0});
  CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
}

TEST_CASE("duration and bandwidth of the three-mode probe") {
  ModeParams p;
  p.omega = 5.0;
  // DeltaT * DeltaOmega = 3/2 for every allocation split.
  double first_dt = 0.0, first_dw = 0.0;
  for (double f_sq : {0.0, 0.25, 0.75, 1.0}) {
    const StateSpec spec = standard_probe(50.0, f_sq);
    const DurationBandwidth db = duration_bandwidth(spec, basis_for(spec, p));
    CHECK(db.delta_t * db.delta_omega == doctest::Approx(1.5).epsilon(1e-9));
    if (f_sq == 0.0) {
      first_dt = db.delta_t;
      first_dw = db.delta_omega;
    } else {
      CHECK(db.delta_t == doctest::Approx(first_dt).epsilon(1e-9));
      CHECK(db.delta_omega == doctest::Approx(first_dw).epsilon(1e-9));
    }
  }
}

TEST_CASE("coherent pulse moments agree with direct quadrature") {
  ModeParams p;
  p.tau = 0.4;
  p.omega = 5.0;
  StateSpec spec;
  spec.occupations.push_back({0, {2.0, 0.0}, 0.0, 0.0});
  const DurationBandwidth db = duration_bandwidth(spec, basis_for(spec, p));
  CHECK(db.delta_t * db.delta_omega == doctest::Approx(0.5).epsilon(1e-8));
  const MomentOracle oracle = quadrature_moments(spec, p);
  CHECK(db.delta_t == doctest::Approx(std::sqrt(oracle.delta_t2)).epsilon(1e-8));
  CHECK(db.delta_omega ==
        doctest::Approx(std::sqrt(oracle.delta_omega2)).epsilon(1e-6));
}

TEST_CASE("squeezed-state moments agree with the spectral oracle") {
  ModeParams p;
  p.omega = 5.0;
  const StateSpec spec = standard_probe(20.0, 0.5);
  const DurationBandwidth db = duration_bandwidth(spec, basis_for(spec, p));
  const MomentOracle oracle = quadrature_moments(spec, p);
  CHECK(db.delta_t * db.delta_t ==
        doctest::Approx(oracle.delta_t2).epsilon(1e-6));
  CHECK(db.delta_omega * db.delta_omega ==
        doctest::Approx(oracle.delta_omega2).epsilon(1e-4));
}

TEST_CASE("index-shifted probe has time-bandwidth product K + 3/2") {
  ModeParams p;
  p.omega = 5.0;
  for (int shift : {1, 4}) {
    const double r = 0.8;
    StateSpec spec;
    spec.occupations.push_back({shift, {0.0, 0.0}, r, 0.0});
    spec.occupations.push_back({shift + 1, {3.0, 0.0}, r, M_PI_2});
    spec.occupations.push_back({shift + 2, {0.0, 0.0}, r, 0.0});
    const DurationBandwidth db = duration_bandwidth(spec, basis_for(spec, p));
    CHECK(db.delta_t * db.delta_omega ==
          doctest::Approx(shift + 1.5).epsilon(1e-9));
    const MomentOracle oracle = quadrature_moments(spec, p);
    CHECK(std::sqrt(oracle.delta_t2 * oracle.delta_omega2) ==
          doctest::Approx(shift + 1.5).epsilon(1e-4));
  }
}

TEST_CASE("duration_bandwidth rejects off-center signals") {
  ModeParams p;
  StateSpec spec;  // even+odd superposition shifts the energy centroid
  spec.occupations.push_back({0, {1.0, 0.0}, 0.0, 0.0});
  spec.occupations.push_back({1, {1.0, 0.0}, 0.0, 0.0});
  CHECK_THROWS_AS(duration_bandwidth(spec, basis_for(spec, p)),
                  std::invalid_argument);
}

TEST_CASE("standard probe construction") {
  SUBCASE("zero photons is the vacuum") {
    CHECK(standard_probe(0.0, 0.75).is_vacuum());
  }
  SUBCASE("N=100 at three-quarters squeezing") {
    const StateSpec spec = standard_probe(100.0, 0.75);
    REQUIRE(spec.occupations.size() == 3);
    const double r = spec.occupations[0].r;
    CHECK(r == doctest::Approx(std::asinh(5.0)).epsilon(1e-12));
    CHECK(r == doctest::Approx(2.3124).epsilon(1e-4));
    const complex<double> alpha1 = spec.occupations[1].alpha;
    CHECK(std::abs(alpha1) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(std::arg(alpha1) == doctest::Approx(-M_PI_4).epsilon(1e-12));
    CHECK(spec.occupations[0].phi == 0.0);
    CHECK(spec.occupations[1].phi == doctest::Approx(-M_PI_2));
    CHECK(spec.occupations[2].phi == 0.0);
  }
  SUBCASE("20 dB cap clips the squeezing and routes photons to displacement") {
    CHECK(kTwentyDbRCap == doctest::Approx(std::log(10.0)).epsilon(1e-15));
    const StateSpec spec = standard_probe(100.0, 0.75, kTwentyDbRCap);
    CHECK(spec.occupations[0].r == doctest::Approx(kTwentyDbRCap));
    const PhotonBudget b = photon_budget(spec);
    CHECK(b.n_total == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(b.n_sq < 75.0);
  }
  SUBCASE("negative photon number is rejected") {
    CHECK_THROWS_AS(standard_probe(-1.0, 0.5), std::invalid_argument);
  }
}

TEST_CASE("probe variants change only the stated angles") {
  const StateSpec a = probe_variant(50.0, 0.5, ProbeVariant::Phi0Pi);
  CHECK(a.occupations[0].phi == doctest::Approx(M_PI));
  CHECK(a.occupations[1].phi == doctest::Approx(-M_PI_2));
  const StateSpec b = probe_variant(50.0, 0.5, ProbeVariant::Phi1Zero);
  CHECK(b.occupations[0].phi == 0.0);
  CHECK(b.occupations[1].phi == 0.0);
}
