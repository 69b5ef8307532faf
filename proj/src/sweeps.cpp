#include "qlidar/sweeps.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "qlidar/benchmarks.hpp"
#include "qlidar/numerics.hpp"

namespace qlidar {

namespace {

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void run_indexed(int count, int jobs, const std::function<void(int)>& body) {
  jobs = std::max(1, jobs);
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int w = 0; w < jobs; ++w)
    pool.emplace_back([&, w] {
      for (int i = w; i < count; i += jobs) body(i);
    });
  for (auto& th : pool) th.join();
}

ModeParams params_from(const SweepConfig& cfg) {
  ModeParams p;
  p.tau = cfg.tau;
  p.omega = cfg.omega;
  p.theta = cfg.theta;
  p.sigma = cfg.sigma;
  return p;
}

TimeGrid grid_from(const SweepConfig& cfg) {
  if (cfg.grid) {
    TimeGrid g;
    g.t_start = cfg.grid->t_start;
    g.dt = cfg.grid->dt;
    g.n_bins = cfg.grid->n_bins;
    g.validate();
    return g;
  }
  return TimeGrid::spanning(params_from(cfg));
}

const char* status_name(CrbStatus s) {
  switch (s) {
    case CrbStatus::Ok: return "ok";
    case CrbStatus::Singular: return "singular";
    case CrbStatus::Pseudo: return "pseudo";
  }
  return "ok";
}

struct ProbeEval {
  CrbResult bounds;
  double r = 0.0;
};

ProbeEval eval_probe(const SweepConfig& cfg, double n_photons, double f_sq,
                     double kappa, double delta_theta) {
  const StateSpec spec = standard_probe(n_photons, f_sq, cfg.r_cap);
  const ModeBasis basis = basis_for(spec, params_from(cfg));
  ReceiverSetup rx;
  rx.kappa = kappa;
  rx.delta_omega = cfg.delta_omega;
  rx.delta_theta = delta_theta;
  rx.grid = grid_from(cfg);
  const InfoMatrix fim = analytic_homodyne_fim(spec, basis, rx);
  ProbeEval out;
  out.bounds = crb(fim);
  for (const auto& occ : spec.occupations) out.r = std::max(out.r, occ.r);
  return out;
}

DurationBandwidth probe_duration_bandwidth(const SweepConfig& cfg) {
  // The three-mode family has the same DeltaT, DeltaOmega for every
  // allocation split, so one representative probe suffices.
  const StateSpec probe = standard_probe(4.0, 0.5, std::nullopt);
  return duration_bandwidth(probe, basis_for(probe, params_from(cfg)));
}

}  // namespace

void SweepConfig::validate() const {
  if (axis.empty()) throw std::invalid_argument("config: axis must be non-empty");
  for (double v : axis) {
    if (!std::isfinite(v)) throw std::invalid_argument("config: axis values must be finite");
    if (experiment == Experiment::PhotonSweep && !(v > 0.0))
      throw std::invalid_argument("config: photon axis must be > 0");
    if (experiment == Experiment::KappaSweep && !(v > 0.0 && v <= 1.0))
      throw std::invalid_argument("config: kappa axis must be in (0, 1]");
  }
  if (!(n_photons >= 0.0)) throw std::invalid_argument("config: n_photons must be >= 0");
  if (f_sq < 0.0 || f_sq > 1.0) throw std::invalid_argument("config: f_sq must be in [0, 1]");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw std::invalid_argument("config: kappa must be in [0, 1]");
  if (!(sigma > 0.0)) throw std::invalid_argument("config: sigma must be > 0");
  if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
  if (mle_trials < 100) throw std::invalid_argument("config: mle_trials must be >= 100");
}

std::vector<double> SweepConfig::log_axis(double lo, double hi, int points) {
  if (!(lo > 0.0 && hi > lo && points >= 2))
    throw std::invalid_argument("log_axis: need 0 < lo < hi and points >= 2");
  std::vector<double> axis(points);
  const double step = (std::log(hi) - std::log(lo)) / (points - 1);
  for (int i = 0; i < points; ++i) axis[i] = std::exp(std::log(lo) + i * step);
  axis.front() = lo;
  axis.back() = hi;
  return axis;
}

std::string SweepConfig::to_json() const {
  nlohmann::json j;
  switch (experiment) {
    case Experiment::PhotonSweep: j["experiment"] = "photon_sweep"; break;
    case Experiment::KappaSweep: j["experiment"] = "kappa_sweep"; break;
    case Experiment::DetuningSweep: j["experiment"] = "detuning_sweep"; break;
    case Experiment::MleVerify: j["experiment"] = "mle_verify"; break;
  }
  j["probe"] = {{"n_photons", n_photons}, {"f_sq", f_sq},
                {"optimize_f_sq", optimize_f_sq}};
  if (r_cap) j["probe"]["r_cap"] = *r_cap;
  j["receiver"] = {{"kappa", kappa}, {"delta_omega", delta_omega},
                   {"delta_theta", delta_theta}};
  j["mode"] = {{"sigma", sigma}, {"tau", tau}, {"omega", omega}, {"theta", theta}};
  if (grid)
    j["grid"] = {{"t_start", grid->t_start}, {"dt", grid->dt},
                 {"n_bins", grid->n_bins}};
  if (sigma_physical) j["sigma_physical"] = *sigma_physical;
  j["axis"] = axis;
  j["out"] = out;
  j["seed"] = seed;
  j["jobs"] = jobs;
  j["mle_trials"] = mle_trials;
  return j.dump(2);
}

SweepConfig SweepConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  SweepConfig cfg;
  try {
    const std::string exp = j.value("experiment", "photon_sweep");
    if (exp == "photon_sweep") cfg.experiment = Experiment::PhotonSweep;
    else if (exp == "kappa_sweep") cfg.experiment = Experiment::KappaSweep;
    else if (exp == "detuning_sweep") cfg.experiment = Experiment::DetuningSweep;
    else if (exp == "mle_verify") cfg.experiment = Experiment::MleVerify;
    else throw std::invalid_argument("config: unknown experiment " + exp);

    if (j.contains("probe")) {
      const auto& p = j["probe"];
      cfg.n_photons = p.value("n_photons", cfg.n_photons);
      if (p.contains("f_sq") && p["f_sq"].is_string()) {
        if (p["f_sq"].get<std::string>() != "optimize")
          throw std::invalid_argument("config: f_sq must be a number or \"optimize\"");
        cfg.optimize_f_sq = true;
      } else {
        cfg.f_sq = p.value("f_sq", cfg.f_sq);
      }
      cfg.optimize_f_sq = p.value("optimize_f_sq", cfg.optimize_f_sq);
      if (p.contains("r_cap")) cfg.r_cap = p["r_cap"].get<double>();
      if (p.contains("r_cap_db"))
        cfg.r_cap = p["r_cap_db"].get<double>() / 20.0 * std::log(10.0);
    }
    if (j.contains("receiver")) {
      const auto& r = j["receiver"];
      cfg.kappa = r.value("kappa", cfg.kappa);
      cfg.delta_omega = r.value("delta_omega", cfg.delta_omega);
      cfg.delta_theta = r.value("delta_theta", cfg.delta_theta);
    }
    if (j.contains("mode")) {
      const auto& m = j["mode"];
      cfg.sigma = m.value("sigma", cfg.sigma);
      cfg.tau = m.value("tau", cfg.tau);
      cfg.omega = m.value("omega", cfg.omega);
      cfg.theta = m.value("theta", cfg.theta);
    }
    if (j.contains("grid")) {
      GridOverride g;
      g.t_start = j["grid"].at("t_start").get<double>();
      g.dt = j["grid"].at("dt").get<double>();
      g.n_bins = j["grid"].at("n_bins").get<int>();
      cfg.grid = g;
    }
    if (j.contains("sigma_physical"))
      cfg.sigma_physical = j["sigma_physical"].get<double>();
    if (j.contains("axis")) {
      if (j["axis"].is_object()) {
        const auto& a = j["axis"];
        if (a.contains("values")) {
          cfg.axis = a["values"].get<std::vector<double>>();
        } else {
          cfg.axis = log_axis(a.at("log_range")[0].get<double>(),
                              a.at("log_range")[1].get<double>(),
                              a.value("points", 41));
        }
      } else {
        cfg.axis = j["axis"].get<std::vector<double>>();
      }
    }
    cfg.out = j.value("out", cfg.out);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.mle_trials = j.value("mle_trials", cfg.mle_trials);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  return cfg;
}

std::vector<std::string> SweepTable::default_header() {
  return {"axis",   "var_tau", "var_omega", "product", "cl_het_product",
          "cl_ultimate_product", "f_sq", "r", "threshold", "status"};
}

SweepTable photon_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const DurationBandwidth db = probe_duration_bandwidth(cfg);

  SweepTable table;
  table.header = SweepTable::default_header();
  table.rows.resize(cfg.axis.size());
  run_indexed(static_cast<int>(cfg.axis.size()), cfg.jobs, [&](int i) {
    const double n = cfg.axis[i];
    SweepRow row;
    row.axis = n;
    const ProbeEval eval =
        eval_probe(cfg, n, cfg.f_sq, cfg.kappa, cfg.delta_theta);
    row.var_tau = eval.bounds.var_tau;
    row.var_omega = eval.bounds.var_omega;
    row.product = row.var_tau * row.var_omega;
    row.f_sq_used = cfg.f_sq;
    row.r_used = eval.r;
    row.status = status_name(eval.bounds.status);
    const double received = cfg.kappa * n;
    row.cl_het_product = cl_heterodyne(received, db.delta_t, db.delta_omega).product();
    row.cl_ultimate_product = cl_ultimate(received, db.delta_t, db.delta_omega).product();
    table.rows[i] = row;
  });
  return table;
}

SweepTable kappa_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const DurationBandwidth db = probe_duration_bandwidth(cfg);
  const double n = cfg.n_photons;

  SweepTable table;
  table.header = SweepTable::default_header();
  table.rows.resize(cfg.axis.size());
  run_indexed(static_cast<int>(cfg.axis.size()), cfg.jobs, [&](int i) {
    const double kappa = cfg.axis[i];
    auto product_at = [&](double f) {
      const CrbResult b = eval_probe(cfg, n, f, kappa, cfg.delta_theta).bounds;
      if (b.status != CrbStatus::Ok)
        return std::numeric_limits<double>::infinity();
      return b.var_tau * b.var_omega;
    };

    double best_f = cfg.f_sq;
    if (cfg.optimize_f_sq) {
      constexpr int kCoarse = 64;
      int best_idx = 0;
      double best_val = std::numeric_limits<double>::infinity();
      for (int k = 0; k <= kCoarse; ++k) {
        const double f = static_cast<double>(k) / kCoarse;
        const double val = product_at(f);
        if (val < best_val) {
          best_val = val;
          best_idx = k;
        }
      }
      const double lo = std::max(0.0, (best_idx - 1.0) / kCoarse);
      const double hi = std::min(1.0, (best_idx + 1.0) / kCoarse);
      best_f = golden_section_minimize(product_at, lo, hi, 1e-4);
    }

    const ProbeEval eval = eval_probe(cfg, n, best_f, kappa, cfg.delta_theta);
    SweepRow row;
    row.axis = kappa;
    row.var_tau = eval.bounds.var_tau;
    row.var_omega = eval.bounds.var_omega;
    row.product = row.var_tau * row.var_omega;
    row.f_sq_used = best_f;
    row.r_used = eval.r;
    row.status = status_name(eval.bounds.status);
    if (cfg.optimize_f_sq && (best_f < 1.0 / 64 || best_f > 1.0 - 1.0 / 64))
      row.status = "boundary";
    const double received = kappa * n;
    row.cl_het_product = cl_heterodyne(received, db.delta_t, db.delta_omega).product();
    row.cl_ultimate_product = cl_ultimate(received, db.delta_t, db.delta_omega).product();
    table.rows[i] = row;
  });
  return table;
}

SweepTable detuning_sweep(const SweepConfig& cfg) {
  cfg.validate();
  const DurationBandwidth db = probe_duration_bandwidth(cfg);
  const double n = cfg.n_photons;

  SweepTable table;
  table.header = SweepTable::default_header();
  table.rows.resize(cfg.axis.size());
  run_indexed(static_cast<int>(cfg.axis.size()), cfg.jobs, [&](int i) {
    const double dth = cfg.axis[i];
    const ProbeEval eval = eval_probe(cfg, n, cfg.f_sq, 1.0, dth);
    SweepRow row;
    row.axis = dth;
    row.var_tau = eval.bounds.var_tau;
    row.var_omega = eval.bounds.var_omega;
    row.product = row.var_tau * row.var_omega;
    row.f_sq_used = cfg.f_sq;
    row.r_used = eval.r;
    const double n_sq = 3.0 * std::sinh(eval.r) * std::sinh(eval.r);
    row.threshold = 1.0 / (n_sq + 1.0);
    row.status = status_name(eval.bounds.status);
    row.cl_het_product = cl_heterodyne(n, db.delta_t, db.delta_omega).product();
    row.cl_ultimate_product = cl_ultimate(n, db.delta_t, db.delta_omega).product();
    table.rows[i] = row;
  });
  return table;
}

MleJobReport mle_verify_job(const SweepConfig& cfg) {
  MleJobReport report;

  {
    // Coherent pulse under heterodyne reception.
    StateSpec spec;
    spec.occupations.push_back({0, {std::sqrt(50.0), 0.0}, 0.0, 0.0});
    ModeParams p = params_from(cfg);
    ReceiverSetup rx;
    rx.kappa = 1.0;
    rx.delta_omega = 20.0 * p.sigma;
    rx.delta_theta = 0.2;
    rx.grid = TimeGrid::spanning(p, 10.0, 0.02);
    report.coherent =
        mle_verify(MeasurementModel::make(spec, p, rx), cfg.mle_trials, cfg.seed);
    report.ran_coherent = true;
  }
  {
    // Squeezed probe under matched homodyne reception. The information here
    // is covariance-encoded, so each fit pools several repetitions to reach
    // the asymptotic regime of the repetition bound.
    const double n = cfg.n_photons > 0 ? cfg.n_photons : 20.0;
    const StateSpec spec = standard_probe(n, cfg.f_sq, cfg.r_cap);
    ModeParams p = params_from(cfg);
    ReceiverSetup rx;
    rx.kappa = cfg.kappa;
    rx.delta_omega = 0.0;
    rx.delta_theta = 0.0;
    rx.grid = grid_from(cfg);
    report.squeezed = mle_verify(MeasurementModel::make(spec, p, rx),
                                 cfg.mle_trials, cfg.seed + 1,
                                 /*traces_per_fit=*/10);
    report.ran_squeezed = true;
  }
  return report;
}

void emit(const SweepTable& table, const std::string& path,
          const SweepConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("emit: cannot open " + path);

  // Physical-units rescale: tau variances carry 1/sigma_phys^2, omega
  // variances sigma_phys^2; their product is scale-free.
  double tau_scale = 1.0, omega_scale = 1.0;
  if (cfg.sigma_physical) {
    tau_scale = 1.0 / (*cfg.sigma_physical * *cfg.sigma_physical);
    omega_scale = *cfg.sigma_physical * *cfg.sigma_physical;
  }

  for (size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    out << fmt17(row.axis) << ',' << fmt17(row.var_tau * tau_scale) << ','
        << fmt17(row.var_omega * omega_scale) << ',' << fmt17(row.product) << ','
        << fmt17(row.cl_het_product) << ',' << fmt17(row.cl_ultimate_product)
        << ',' << fmt17(row.f_sq_used) << ',' << fmt17(row.r_used) << ','
        << fmt17(row.threshold) << ',' << row.status << '\n';
  }
  out.close();
  if (!out) throw std::runtime_error("emit: write failed for " + path);

  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(cfg.to_json());
  meta["seed"] = cfg.seed;
  meta["version"] = kVersion;
  meta["cl_ultimate_caveat"] = kClUltimateCaveat;
  std::ofstream meta_out(path + ".meta.json");
  if (!meta_out) throw std::runtime_error("emit: cannot open " + path + ".meta.json");
  meta_out << meta.dump(2) << '\n';
}

SweepTable parse_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("parse_table: cannot open " + path);
  SweepTable table;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("parse_table: empty file " + path);
  std::stringstream header(line);
  std::string cell;
  while (std::getline(header, cell, ',')) table.header.push_back(cell);

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != table.header.size())
      throw std::runtime_error("parse_table: ragged row in " + path);
    SweepRow row;
    row.axis = std::strtod(cells[0].c_str(), nullptr);
    row.var_tau = std::strtod(cells[1].c_str(), nullptr);
    row.var_omega = std::strtod(cells[2].c_str(), nullptr);
    row.product = std::strtod(cells[3].c_str(), nullptr);
    row.cl_het_product = std::strtod(cells[4].c_str(), nullptr);
    row.cl_ultimate_product = std::strtod(cells[5].c_str(), nullptr);
    row.f_sq_used = std::strtod(cells[6].c_str(), nullptr);
    row.r_used = std::strtod(cells[7].c_str(), nullptr);
    row.threshold = std::strtod(cells[8].c_str(), nullptr);
    row.status = cells[9];
    table.rows.push_back(row);
  }
  return table;
}

double fit_loglog_slope(const SweepTable& table, double lo, double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int count = 0;
  for (const auto& row : table.rows) {
    if (row.axis < lo || row.axis > hi) continue;
    if (!(row.product > 0.0) || !std::isfinite(row.product)) continue;
    const double x = std::log(row.axis), y = std::log(row.product);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++count;
  }
  if (count < 2) throw std::invalid_argument("fit_loglog_slope: need >= 2 rows in range");
  return (count * sxy - sx * sy) / (count * sxx - sx * sx);
}

double find_ultimate_crossing(const SweepTable& table) {
  for (size_t i = 1; i < table.rows.size(); ++i) {
    const auto& a = table.rows[i - 1];
    const auto& b = table.rows[i];
    if (!(a.product > 0) || !(b.product > 0)) continue;
    const double ra = std::log(a.product / a.cl_ultimate_product);
    const double rb = std::log(b.product / b.cl_ultimate_product);
    if (ra == 0.0) return a.axis;
    if (ra > 0.0 && rb <= 0.0) {
      const double t = ra / (ra - rb);
      return std::exp(std::log(a.axis) + t * (std::log(b.axis) - std::log(a.axis)));
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace qlidar
