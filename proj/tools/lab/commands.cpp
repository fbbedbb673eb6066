#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "acceptance/criteria.hpp"
#include "affine/forward.hpp"
#include "affine/io.hpp"
#include "affine/parallel.hpp"
#include "affine/wasserstein.hpp"

namespace affine::lab {
namespace {

namespace fs = std::filesystem;
using cd = std::complex<double>;

AdmissibleParams admissible(const ExperimentConfig& cfg) {
  AdmissibleParams p = params_from_json(read_text_file(cfg.model_path));
  if (!p.validate().all_pass()) {
    throw Error(ErrorCode::kNotValidated, cfg.model_path + " fails admissibility; see the validate command");
  }
  return p;
}

ConeElement start_state(const ExperimentConfig& cfg, int n) {
  const auto m = cfg.matrix("x0", n);
  return m ? ConeElement(*m) : ConeElement::identity(n);
}

// 0.01/delta when the drift is subcritical, else 0.01.
double default_dt(const AdmissibleParams& p) {
  try {
    return 0.01 / StationaryLaw(p).delta();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kNotSubcritical) throw;
    return 0.01;
  }
}

std::string cell(double x) { return format_double(x); }

std::string no_commas(std::string s) {
  for (char& c : s) {
    if (c == ',') c = ';';
  }
  return s;
}

int cmd_validate(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& out) {
  const AdmissibleParams p = params_from_json(read_text_file(cfg.model_path));
  const ValidationReport r =
      validate(p, static_cast<int>(cfg.count("n_probe", 100)), cfg.number("tol", 1e-10), cfg.seed_or(0x5eed));
  CsvWriter w(csv, cfg.hash(), {"condition", "pass", "automatic", "worst", "detail"});
  for (const auto& c : r.conditions) {
    w.row(std::vector<std::string>{no_commas(c.name), c.pass ? "1" : "0", c.automatic ? "1" : "0", cell(c.worst),
                                   no_commas(c.detail)});
    out << (c.pass ? "pass  " : "FAIL  ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << '\n';
  }
  return r.all_pass() ? kExitOk : kExitValidation;
}

int cmd_riccati(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& out) {
  const AdmissibleParams p = admissible(cfg);
  const int n = p.dim();
  const auto um = cfg.matrix("u", n);
  const ConeElement u = um ? ConeElement(*um) : ConeElement::identity(n);
  const double horizon = cfg.number("T", 5.0);
  std::vector<double> times;
  if (cfg.has("times")) {
    times = cfg.numbers("times", {});
  } else {
    for (int k = 0; k <= 20; ++k) times.push_back(horizon * k / 20.0);
  }
  double t_end = 0.0;
  for (double t : times) {
    require(t >= 0.0, ErrorCode::kInvalidArgument, "riccati times must be nonnegative");
    t_end = std::max(t_end, t);
  }
  const RiccatiSolution sol = solve_riccati(p, u, t_end, cfg.number("tol", kDefaultRiccatiTol), times);
  std::vector<std::string> header{"t", "phi"};
  for (int k = 0; k < sym_dim(n); ++k) header.push_back("psi_" + std::to_string(k));
  CsvWriter w(csv, cfg.hash(), header);
  for (double t : times) {
    std::vector<double> row{t, sol.phi_at(t)};
    const Vector psi = vec(sol.psi_at(t));
    row.insert(row.end(), psi.data(), psi.data() + psi.size());
    w.row(row);
  }
  out << "riccati: " << times.size() << " output times, " << sol.times.size() << " accepted steps\n";
  return kExitOk;
}

int cmd_stationary(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& out) {
  const AdmissibleParams p = admissible(cfg);
  const StationaryLaw law(p, cfg.number("tol", kDefaultRiccatiTol));
  const ConeElement x0 = start_state(cfg, p.dim());
  const double pexp = cfg.number("p", 2.0);
  CsvWriter w(csv, cfg.hash(), {"quantity", "i", "j", "t", "value"});
  w.row(std::vector<std::string>{"delta", "", "", "", cell(law.delta())});
  w.row(std::vector<std::string>{"M", "", "", "", cell(law.M())});
  const Matrix& mean = law.mean().matrix();
  for (int i = 0; i < mean.rows(); ++i) {
    for (int j = 0; j < mean.cols(); ++j) {
      w.row(std::vector<std::string>{"mean", std::to_string(i), std::to_string(j), "", cell(mean(i, j))});
    }
  }
  const Matrix& s = law.second_moment().matrix();
  for (int i = 0; i < s.rows(); ++i) {
    for (int j = 0; j < s.cols(); ++j) {
      w.row(std::vector<std::string>{"second_moment_vec", std::to_string(i), std::to_string(j), "", cell(s(i, j))});
    }
  }
  for (double t : cfg.numbers("times", {0.5, 1.0, 2.0, 4.0, 8.0})) {
    w.row(std::vector<std::string>{"wasserstein_bound", "", "", cell(t), cell(wasserstein_bound(law, x0, pexp, t))});
  }
  out << "stationary: delta " << law.delta() << ", M " << law.M() << ", E||X||^2 " << law.m2() << '\n';
  return kExitOk;
}

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& out) {
  const AdmissibleParams p = admissible(cfg);
  const ConeElement x0 = start_state(cfg, p.dim());
  const TimeGrid times = cfg.numbers("times", {0.5, 1.0, 2.0});
  auto sim = make_simulator(p, cfg.number("dt_max", default_dt(p)));
  const auto paths = simulate_paths(*sim, x0, times, cfg.seed_or(1), cfg.count("n_paths", 10000));
  const EnsembleStats st = ensemble_stats(paths);
  CsvWriter w(csv, cfg.hash(), {"t", "quantity", "i", "j", "value", "se"});
  for (std::size_t k = 0; k < st.times.size(); ++k) {
    const Vector m = vec(st.mean[k]);
    for (int i = 0; i < m.size(); ++i) {
      w.row(std::vector<std::string>{cell(st.times[k]), "mean_vec", std::to_string(i), "", cell(m(i)),
                                     cell(st.mean_se[k](i))});
    }
    const Matrix& s = st.second_moment[k].matrix();
    for (int i = 0; i < s.rows(); ++i) {
      for (int j = i; j < s.cols(); ++j) {
        w.row(std::vector<std::string>{cell(st.times[k]), "second_moment_vec", std::to_string(i), std::to_string(j),
                                       cell(s(i, j)), cell(st.second_moment_se[k](i, j))});
      }
    }
  }
  out << "simulate: " << st.n_paths << " paths, scheme " << to_string(sim->scheme()) << '\n';
  return kExitOk;
}

TransportResult transport(const ExperimentConfig& cfg, const Cloud& a, const Cloud& b, std::uint64_t seed) {
  const double pexp = cfg.number("p", 2.0);
  if (cfg.text("method", "exact") == "sinkhorn") return wp_sinkhorn(a, b, pexp, cfg.number("epsilon", 0.05));
  return wp_exact(a, b, pexp, static_cast<int>(cfg.count("n_boot", 20)), seed);
}

int cmd_wdist(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& out) {
  CsvWriter w(csv, cfg.hash(), {"t", "p", "method", "distance", "bootstrap_se", "bound"});
  const std::string method = cfg.text("method", "exact");
  const std::uint64_t seed = cfg.seed_or(1);
  if (cfg.has("a")) {
    const Cloud a = read_csv_rows(cfg.text("a", "")), b = read_csv_rows(cfg.text("b", ""));
    const TransportResult r = transport(cfg, a, b, seed);
    w.row(std::vector<std::string>{"", cell(r.p), method, cell(r.distance), cell(r.bootstrap_se), ""});
    out << "wdist: W_" << r.p << " = " << r.distance << '\n';
    return kExitOk;
  }
  const AdmissibleParams p = admissible(cfg);
  const StationaryLaw law(p);
  const ConeElement x0 = start_state(cfg, p.dim());
  const std::size_t n = cfg.count("n_paths", 1024);
  const TimeGrid times = cfg.numbers("times", {0.5, 1.0, 2.0, 4.0});
  const Cloud pi = to_cloud(stationary_sampler(p, 10.0 / law.delta(), 0.0, n, seed + 1).samples);
  auto sim = make_simulator(p, cfg.number("dt_max", 0.01 / law.delta()));
  const auto paths = simulate_paths(*sim, x0, times, seed, n);
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<ConeElement> xs;
    xs.reserve(paths.size());
    for (const auto& path : paths) xs.push_back(path.states[k]);
    const TransportResult r = transport(cfg, to_cloud(xs), pi, seed + 2 + k);
    const double bound = wasserstein_bound(law, x0, r.p, times[k]);
    w.row(std::vector<std::string>{cell(times[k]), cell(r.p), method, cell(r.distance), cell(r.bootstrap_se),
                                   cell(bound)});
    out << "wdist: t " << times[k] << " W_" << r.p << " " << r.distance << " bound " << bound << '\n';
  }
  return kExitOk;
}

PricingModel pricing_model(const ExperimentConfig& cfg) {
  PricingModel m = pricing_model_from_json(read_text_file(cfg.model_path));
  if (!m.spec.x_params.validate().all_pass()) {
    throw Error(ErrorCode::kNotValidated, cfg.model_path + ": x_params fail admissibility");
  }
  return m;
}

int cmd_price(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& out) {
  const PricingModel model = pricing_model(cfg);
  const double t = cfg.number("T", 0.5), th = cfg.number("T_hat", 1.5);
  const std::vector<double> ks = cfg.numbers("strikes", {0.8, 0.9, 1.0, 1.1, 1.25});
  PricingOptions po;
  po.seed = cfg.seed_or(1);
  po.n_paths = cfg.count("n_paths", po.n_paths);
  po.sim.dt = cfg.number("dt", po.sim.dt);
  po.sim.x_dt_max = cfg.number("x_dt_max", po.sim.x_dt_max);
  po.alpha = cfg.number("alpha", po.alpha);
  po.tol = cfg.number("tol", po.tol);
  const std::string regime = cfg.text("regime", "both"), method = cfg.text("method", "both");
  std::vector<std::pair<std::string, Regime>> regimes;
  if (regime != "stationary") regimes.emplace_back(model.start.stationary ? "stationary" : "start", model.start);
  if (regime != "start" && !(regime == "both" && model.start.stationary)) {
    regimes.emplace_back("stationary", Regime::invariant());
  }
  std::vector<PricingMethod> methods;
  if (method != "mc") methods.push_back(PricingMethod::kFourier);
  if (method != "fourier") methods.push_back(PricingMethod::kMonteCarlo);

  const StationaryLaw law(model.spec.x_params, po.tol);
  const Vector e = model.space.eval_vector(th - t);
  CsvWriter w(csv, cfg.hash(), {"regime", "method", "T", "T_hat", "K", "price", "se", "iv"});
  for (const auto& [name, reg] : regimes) {
    const double fwd = joint_transform(model.spec, reg, e.cast<cd>(), CVector::Zero(sym_dim(model.spec.n())), t,
                                       po.tol, &law)
                           .real();
    for (PricingMethod pm : methods) {
      const auto res = price_call_on_forward(model, t, th, ks, reg, pm, po);
      for (std::size_t i = 0; i < ks.size(); ++i) {
        double iv = std::numeric_limits<double>::quiet_NaN();
        try {
          iv = implied_vol(res[i].price, fwd, ks[i], t, 0.0);
        } catch (const Error& err) {
          if (err.code() != ErrorCode::kPriceOutOfBounds) throw;
        }
        w.row(std::vector<std::string>{name, to_string(res[i].method), cell(t), cell(th), cell(ks[i]),
                                       cell(res[i].price), cell(res[i].se), cell(iv)});
        out << name << ' ' << to_string(res[i].method) << " K " << ks[i] << ": " << res[i].price << " (se "
            << res[i].se << ", iv " << iv << ")\n";
      }
    }
  }
  return kExitOk;
}

int cmd_smile(const ExperimentConfig& cfg, std::ostream& csv, std::ostream& out) {
  const PricingModel model = pricing_model(cfg);
  PricingOptions po;
  po.seed = cfg.seed_or(1);
  po.n_outer = cfg.count("n_outer", po.n_outer);
  po.sim.x_dt_max = cfg.number("x_dt_max", 0.01);
  po.tol = cfg.number("tol", po.tol);
  std::vector<double> taus = cfg.numbers("taus", {});
  if (taus.empty()) {
    const double delta = StationaryLaw(model.spec.x_params, po.tol).delta();
    for (double c : cfg.numbers("tau_units", {1.0, 2.0, 4.0, 8.0})) taus.push_back(c / delta);
  }
  const SmileTable tab = smile_convergence(model, taus, cfg.number("T", 0.5), cfg.number("T_hat", 1.5),
                                           cfg.numbers("log_strikes", {-0.2, -0.1, 0.0, 0.1, 0.2}), po);
  CsvWriter w(csv, cfg.hash(), {"tau", "T", "T_hat", "K", "price", "iv", "se"});
  for (const SmileRow& r : tab.rows) w.row({r.tau, r.T, r.T_hat, r.K, r.price, r.implied_vol, r.se});
  out << "smile: " << tab.rows.size() << " rows, monotone within 3 se: " << (tab.monotone(3.0) ? "yes" : "no") << '\n';
  return kExitOk;
}

int cmd_reproduce_all(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& report,
                      std::ostream& out, std::ostream& err) {
  acceptance::Options opt;
  opt.data_dir = cfg.text("data_dir", AFFINE_DATA_DIR);
  opt.seed = cfg.seed_or(opt.seed);
  opt.threads = thread_count();
  if (cfg.has("threads_alt")) {
    opt.threads_alt.clear();
    for (double t : cfg.numbers("threads_alt", {})) {
      require(t >= 1.0 && t == std::floor(t), ErrorCode::kConfig, "threads_alt entries must be positive integers");
      opt.threads_alt.push_back(static_cast<int>(t));
    }
  }
  opt.log = &err;
  bool all = true;
  const auto results = acceptance::run_all(opt, [&](const acceptance::CriterionResult& r) {
    out << acceptance::format_line(r) << std::endl;
  });
  report << "# config-hash " << hex64(cfg.hash()) << '\n';
  for (const auto& r : results) {
    all &= r.pass;
    report << acceptance::format_line(r) << '\n';
    if (!r.artifact.empty()) {
      write_text_file((fs::path(out_dir) / ("criterion_" + std::to_string(r.id) + ".csv")).string(), r.artifact);
    }
  }
  report << (all ? "ALL PASS" : "SOME CRITERIA FAILED") << '\n';
  return all ? kExitOk : kExitNumeric;
}

void print_error(std::ostream& err, const std::string& code, const std::string& message, int exit_code) {
  nlohmann::json j = {{"error", code}, {"message", message}, {"exit_code", exit_code}};
  err << j.dump() << std::endl;
}

}  // namespace

std::string default_output(Command c) {
  if (c == Command::kReproduceAll) return "acceptance_report.txt";
  return std::string(to_string(c)) + ".csv";
}

int run(const ExperimentConfig& cfg, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  try {
    fs::create_directories(out_dir);
    const std::string path = (fs::path(out_dir) / (cfg.output.empty() ? default_output(cfg.command) : cfg.output)).string();
    std::ostringstream buf;
    int code = kExitOk;
    switch (cfg.command) {
      case Command::kValidate: code = cmd_validate(cfg, buf, out); break;
      case Command::kRiccati: code = cmd_riccati(cfg, buf, out); break;
      case Command::kStationary: code = cmd_stationary(cfg, buf, out); break;
      case Command::kSimulate: code = cmd_simulate(cfg, buf, out); break;
      case Command::kWdist: code = cmd_wdist(cfg, buf, out); break;
      case Command::kPrice: code = cmd_price(cfg, buf, out); break;
      case Command::kSmile: code = cmd_smile(cfg, buf, out); break;
      case Command::kReproduceAll: code = cmd_reproduce_all(cfg, out_dir, buf, out, err); break;
    }
    write_text_file(path, buf.str());
    out << "wrote " << path << '\n';
    return code;
  } catch (const Error& e) {
    const int code = is_validation_error(e.code()) ? kExitValidation : kExitNumeric;
    print_error(err, std::string(to_string(e.code())), e.what(), code);
    return code;
  } catch (const fs::filesystem_error& e) {
    print_error(err, "filesystem", e.what(), kExitValidation);
    return kExitValidation;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what(), kExitNumeric);
    return kExitNumeric;
  }
}

}  // namespace affine::lab
