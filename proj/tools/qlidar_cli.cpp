// Command-line runner for the sweep experiments and one-off FIM/QFIM
// evaluations. Exit codes: 0 success, 2 configuration error, 3 numerical
// failure.

#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "qlidar/benchmarks.hpp"
#include "qlidar/errors.hpp"
#include "qlidar/qfim.hpp"
#include "qlidar/sweeps.hpp"

namespace {

using qlidar::SweepConfig;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  double n_photons = -1.0;
  double f_sq = -1.0;
  double kappa = -1.0;
  double delta_theta = std::numeric_limits<double>::quiet_NaN();
  double r_cap_db = -1.0;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "JSON config file");
  cmd->add_option("--out", opts.out, "output CSV path");
  cmd->add_option("--seed", opts.seed, "RNG seed")->each([&](const std::string&) {
    opts.seed_set = true;
  });
  cmd->add_option("--jobs", opts.jobs, "worker threads");
  cmd->add_option("--n", opts.n_photons, "photon number");
  cmd->add_option("--f-sq", opts.f_sq, "squeezing photon fraction");
  cmd->add_option("--kappa", opts.kappa, "round-trip transmissivity");
  cmd->add_option("--delta-theta", opts.delta_theta, "LO phase detuning");
  cmd->add_option("--r-cap-db", opts.r_cap_db, "per-mode squeezing cap in dB");
}

SweepConfig build_config(const CommonOpts& opts, qlidar::Experiment experiment) {
  SweepConfig cfg;
  if (!opts.config_path.empty())
    cfg = SweepConfig::from_json(read_file(opts.config_path));
  cfg.experiment = experiment;
  if (!opts.out.empty()) cfg.out = opts.out;
  if (opts.seed_set) cfg.seed = opts.seed;
  if (opts.jobs > 0) cfg.jobs = opts.jobs;
  if (opts.n_photons >= 0) cfg.n_photons = opts.n_photons;
  if (opts.f_sq >= 0) cfg.f_sq = opts.f_sq;
  if (opts.kappa >= 0) cfg.kappa = opts.kappa;
  if (!std::isnan(opts.delta_theta)) cfg.delta_theta = opts.delta_theta;
  if (opts.r_cap_db >= 0) cfg.r_cap = opts.r_cap_db / 20.0 * std::log(10.0);
  return cfg;
}

nlohmann::json matrix_json(const Eigen::Matrix3d& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 3; ++i)
    rows.push_back({m(i, 0), m(i, 1), m(i, 2)});
  return rows;
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << text << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qlidar: estimation bounds for a squeezed-light lidar"};
  app.require_subcommand(1);

  CommonOpts photon_opts, kappa_opts, detuning_opts, mle_opts, fim_opts,
      qfim_opts, modes_opts;

  auto* photon = app.add_subcommand("photon-sweep",
                                    "CRB product vs photon number");
  add_common(photon, photon_opts);
  auto* kappa = app.add_subcommand("kappa-sweep",
                                   "optimized CRB product vs transmissivity");
  add_common(kappa, kappa_opts);
  auto* detuning = app.add_subcommand("detuning-sweep",
                                      "CRB product vs LO phase detuning");
  add_common(detuning, detuning_opts);
  auto* mle = app.add_subcommand("mle-verify",
                                 "Monte-Carlo CRB attainability check");
  add_common(mle, mle_opts);
  int mle_trials = 0;
  mle->add_option("--trials", mle_trials, "MLE trials per case");

  auto* fim_cmd = app.add_subcommand("fim", "FIM and CRBs for one configuration");
  add_common(fim_cmd, fim_opts);
  auto* qfim_cmd = app.add_subcommand("qfim", "QFIM and QCRBs for one configuration");
  add_common(qfim_cmd, qfim_opts);

  auto* modes_cmd = app.add_subcommand("modes", "mode-family diagnostics");
  auto* modes_check = modes_cmd->add_subcommand("check",
                                                "orthonormality and derivative checks");
  add_common(modes_check, modes_opts);
  modes_cmd->require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (photon->parsed()) {
      SweepConfig cfg = build_config(photon_opts, qlidar::Experiment::PhotonSweep);
      if (cfg.axis.empty()) cfg.axis = SweepConfig::log_axis(0.1, 1e4, 51);
      cfg.validate();
      const qlidar::SweepTable table = qlidar::photon_sweep(cfg);
      if (cfg.out.empty()) throw std::invalid_argument("photon-sweep: --out required");
      qlidar::emit(table, cfg.out, cfg);
      std::cout << "wrote " << table.rows.size() << " rows to " << cfg.out << '\n';
    } else if (kappa->parsed()) {
      SweepConfig cfg = build_config(kappa_opts, qlidar::Experiment::KappaSweep);
      if (cfg.axis.empty())
        for (int i = 0; i <= 18; ++i) cfg.axis.push_back(0.1 + 0.05 * i);
      if (!cfg.r_cap) cfg.r_cap = qlidar::kTwentyDbRCap;
      cfg.optimize_f_sq = true;
      cfg.validate();
      const qlidar::SweepTable table = qlidar::kappa_sweep(cfg);
      if (cfg.out.empty()) throw std::invalid_argument("kappa-sweep: --out required");
      qlidar::emit(table, cfg.out, cfg);
      std::cout << "wrote " << table.rows.size() << " rows to " << cfg.out << '\n';
    } else if (detuning->parsed()) {
      SweepConfig cfg = build_config(detuning_opts, qlidar::Experiment::DetuningSweep);
      if (cfg.axis.empty()) cfg.axis = SweepConfig::log_axis(1e-4, 0.09, 25);
      cfg.validate();
      const qlidar::SweepTable table = qlidar::detuning_sweep(cfg);
      if (cfg.out.empty()) throw std::invalid_argument("detuning-sweep: --out required");
      qlidar::emit(table, cfg.out, cfg);
      std::cout << "wrote " << table.rows.size() << " rows to " << cfg.out << '\n';
    } else if (mle->parsed()) {
      SweepConfig cfg = build_config(mle_opts, qlidar::Experiment::MleVerify);
      if (cfg.n_photons == 100.0 && mle_opts.n_photons < 0) cfg.n_photons = 20.0;
      if (mle_trials > 0) cfg.mle_trials = mle_trials;
      if (cfg.axis.empty()) cfg.axis = {0.0};
      cfg.validate();
      const qlidar::MleJobReport report = qlidar::mle_verify_job(cfg);
      nlohmann::json j;
      j["version"] = qlidar::kVersion;
      j["seed"] = cfg.seed;
      j["trials"] = cfg.mle_trials;
      if (report.ran_coherent)
        j["coherent_heterodyne"] = {
            {"mse_tau", report.coherent.mse_tau},
            {"mse_omega", report.coherent.mse_omega},
            {"crb_tau", report.coherent.crb_tau},
            {"crb_omega", report.coherent.crb_omega},
            {"ratio_tau", report.coherent.ratio_tau()},
            {"ratio_omega", report.coherent.ratio_omega()},
            {"dropped", report.coherent.dropped}};
      if (report.ran_squeezed)
        j["squeezed_homodyne"] = {
            {"mse_tau", report.squeezed.mse_tau},
            {"mse_omega", report.squeezed.mse_omega},
            {"crb_tau", report.squeezed.crb_tau},
            {"crb_omega", report.squeezed.crb_omega},
            {"ratio_tau", report.squeezed.ratio_tau()},
            {"ratio_omega", report.squeezed.ratio_omega()},
            {"dropped", report.squeezed.dropped}};
      write_text(cfg.out, j.dump(2));
    } else if (fim_cmd->parsed() || qfim_cmd->parsed()) {
      const bool quantum = qfim_cmd->parsed();
      SweepConfig cfg = build_config(quantum ? qfim_opts : fim_opts,
                                     qlidar::Experiment::PhotonSweep);
      const qlidar::StateSpec spec =
          qlidar::standard_probe(cfg.n_photons, cfg.f_sq, cfg.r_cap);
      qlidar::ModeParams params;
      params.tau = cfg.tau;
      params.omega = cfg.omega;
      params.theta = cfg.theta;
      params.sigma = cfg.sigma;
      const qlidar::ModeBasis basis = qlidar::basis_for(spec, params);
      nlohmann::json j;
      j["version"] = qlidar::kVersion;
      j["probe"] = nlohmann::json::parse(spec.to_json());
      if (quantum) {
        const qlidar::QfimResult q = qlidar::displaced_squeezed_qfim(spec, basis);
        j["qfim"] = matrix_json(q.j);
        j["qcrb_tau"] = q.qcrb_tau;
        j["qcrb_omega"] = q.qcrb_omega;
      } else {
        qlidar::ReceiverSetup rx;
        rx.kappa = cfg.kappa;
        rx.delta_omega = cfg.delta_omega;
        rx.delta_theta = cfg.delta_theta;
        rx.grid = qlidar::TimeGrid::spanning(params);
        const qlidar::InfoMatrix analytic =
            qlidar::analytic_homodyne_fim(spec, basis, rx);
        const qlidar::MeasurementModel model =
            qlidar::MeasurementModel::make(spec, params, rx);
        const qlidar::NumericFimResult numeric =
            qlidar::numeric_fim(model, qlidar::FdSteps::defaults(params));
        const qlidar::CrbResult bounds = qlidar::crb(analytic);
        j["analytic_fim"] = matrix_json(analytic.m);
        j["numeric_fim"] = matrix_json(numeric.fim.m);
        j["numeric_step_unstable"] = numeric.step_unstable;
        j["crb_tau"] = bounds.var_tau;
        j["crb_omega"] = bounds.var_omega;
        j["crb_status"] = bounds.status == qlidar::CrbStatus::Ok ? "ok" : "singular";
      }
      write_text(cfg.out, j.dump(2));
    } else if (modes_check->parsed()) {
      qlidar::ModeParams params;
      qlidar::ModeBasis basis{params, 10};
      const qlidar::TimeGrid grid = qlidar::TimeGrid::spanning(params);
      const Eigen::MatrixXd u = qlidar::discretize_envelopes(basis, grid);
      const double ortho =
          (u * u.transpose() - Eigen::MatrixXd::Identity(11, 11))
              .cwiseAbs()
              .maxCoeff();
      const qlidar::TransformCheck tc =
          qlidar::infinitesimal_transform_check(basis, 1e-4, 1e-4, 1e-4);
      std::cout << "orthonormality residual (n<=10): " << ortho << '\n';
      std::cout << "infinitesimal transform residual: " << tc.max_residual << '\n';
      if (ortho > 1e-6 || tc.max_residual > 1e-6) {
        std::cerr << "modes check failed\n";
        return 3;
      }
      std::cout << "modes check ok\n";
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const qlidar::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
