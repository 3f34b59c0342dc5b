#include "nngp/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>

#include "nngp/errors.hpp"
#include "nngp/histogram.hpp"
#include "nngp/io.hpp"
#include "nngp/parallel.hpp"
#include "nngp/svg.hpp"

namespace nngp {

namespace fs = std::filesystem;

namespace {

class Stage {
 public:
  Stage(RunManifest& m, std::string name)
      : manifest_(m), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~Stage() {
    const double s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    manifest_.stage_seconds.emplace_back(name_, s);
  }

 private:
  RunManifest& manifest_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

// Wraps module errors with the stage they came from, keeping the category.
template <class F>
auto in_stage(RunManifest& m, const std::string& name, F&& body) {
  Stage timer(m, name);
  try {
    return body();
  } catch (const HypothesisViolation& e) {
    throw HypothesisViolation(name + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  } catch (const UnsupportedConfiguration& e) {
    throw UnsupportedConfiguration(name + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(name + ": " + e.what());
  } catch (const NumericalFailure& e) {
    throw NumericalFailure(name + ": " + e.what());
  }
}

void emit(RunManifest& m, const std::string& dir, const std::string& name, const std::string& text) {
  write_text((fs::path(dir) / name).string(), text);
  m.outputs.push_back(name);
}

void emit_table(RunManifest& m, const std::string& dir, const std::string& stem, const Table& t,
                OutputFormat format) {
  if (format == OutputFormat::csv)
    emit(m, dir, stem + ".csv", t.to_csv());
  else
    emit(m, dir, stem + ".json", t.to_json().dump(2) + "\n");
}

nlohmann::json finite_or_string(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

SpectrumEstimateParams spectrum_params(const ExperimentConfig& cfg) {
  SpectrumEstimateParams p;
  p.grid_points = cfg.mu_grid_points;
  p.estimate_n = cfg.mu_estimate_n;
  p.draws = cfg.mu_estimate_draws;
  p.quadrature_order = cfg.quadrature_order;
  p.rng = RngSpec{cfg.seed, 0x5eedULL};
  if (cfg.covariance != "isotropic")
    p.input_law = [cfg](int dim) { return cfg.make_teacher(dim); };
  return p;
}

}  // namespace

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["tool_version"] = tool_version;
  j["kind"] = kind;
  j["status"] = status;
  if (status != "ok") {
    j["error"] = {{"category", error_category}, {"message", error_message}};
  }
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& [name, s] : stage_seconds) stages.push_back({{"stage", name}, {"seconds", s}});
  j["stages"] = stages;
  j["outputs"] = outputs;
  j["summary"] = summary;
  return j;
}

std::string error_category(const std::exception& e) {
  if (dynamic_cast<const HypothesisViolation*>(&e)) return "hypothesis-violation";
  if (dynamic_cast<const ConfigError*>(&e)) return "config-error";
  if (dynamic_cast<const UnsupportedConfiguration*>(&e)) return "unsupported-configuration";
  if (dynamic_cast<const InvalidArgument*>(&e)) return "invalid-argument";
  if (dynamic_cast<const ConvergenceFailure*>(&e)) return "convergence-failure";
  if (dynamic_cast<const DegenerateKernel*>(&e)) return "degenerate-kernel";
  if (dynamic_cast<const NumericalFailure*>(&e)) return "numerical-failure";
  return "error";
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const HypothesisViolation*>(&e)) return 4;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const UnsupportedConfiguration*>(&e) ||
      dynamic_cast<const InvalidArgument*>(&e))
    return 2;
  return 3;
}

DescentTheoryInputs make_theory_inputs(const ExperimentConfig& cfg) {
  const Activation phi = cfg.make_activation();
  AbcMcParams mc;
  mc.ladder = cfg.abc_ladder;
  mc.samples = cfg.abc_samples;
  mc.quadrature_order = cfg.quadrature_order;
  mc.rng = RngSpec{cfg.seed, 0xabcULL};
  AbcConstants abc = abc_constants([&cfg](int dim) { return cfg.make_teacher(dim); }, phi,
                                   cfg.depth, cfg.psi(),
                                   cfg.abc_mode == "monte-carlo" ? AbcMode::monte_carlo
                                                                 : AbcMode::closed_form,
                                   mc);
  return DescentTheoryInputs{
      .psi = cfg.psi(),
      .activation = cfg.activation,
      .depth = cfg.depth,
      .sigma_eps = cfg.sigma_eps,
      .sigma_tau = cfg.sigma_tau,
      .limit_f2 = estimate_limit_f2(cfg.make_teacher(), cfg.f2_samples, RngSpec{cfg.seed, 0xf2ULL}),
      .abc = std::move(abc),
      .mu = limiting_kernel_spectrum(cfg.psi(), phi, cfg.depth, spectrum_params(cfg)),
  };
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                         OutputFormat format) {
  RunResult result;
  result.directory = out_dir;
  RunManifest& m = result.manifest;
  m.kind = std::string(to_string(cfg.kind));
  m.config_hash = cfg.hash();

  auto write_manifest = [&] {
    write_text((fs::path(out_dir) / "manifest.json").string(), m.to_json().dump(2) + "\n");
  };

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory '" + out_dir + "': " + ec.message());

  try {
    {
      Stage timer(m, "validate");
      cfg.validate();
    }
    emit(m, out_dir, "config.txt", cfg.to_text());
    switch (cfg.kind) {
      case ExperimentKind::spectrum: run_spectrum_experiment(cfg, out_dir, format, m); break;
      case ExperimentKind::descent: run_descent_experiment(cfg, out_dir, format, m); break;
      case ExperimentKind::variance: run_variance_scaling(cfg, out_dir, format, m); break;
      case ExperimentKind::limits: run_limits_check(cfg, out_dir, format, m); break;
    }
  } catch (const std::exception& e) {
    m.status = "error";
    m.error_category = error_category(e);
    m.error_message = e.what();
    write_manifest();
    throw;
  }
  write_manifest();
  return result;
}

void run_spectrum_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                             OutputFormat format, RunManifest& m) {
  const Activation phi = cfg.make_activation();
  const TeacherModel law = cfg.make_teacher();
  const double gamma = double(cfg.n) / double(cfg.width);
  const QuadratureRule quad(cfg.quadrature_order);

  std::vector<std::vector<double>> per_trial(static_cast<std::size_t>(cfg.trials));
  std::vector<double> zero_fraction(per_trial.size(), 0.0);
  in_stage(m, "sample", [&] {
    parallel_for(per_trial.size(), [&](std::size_t t) {
      Rng rng(RngSpec{cfg.seed, t});
      const Eigen::MatrixXd x = sample_inputs(law, cfg.n, rng);
      const KernelMatrix prev = preactivation_kernel(x, cfg.depth, phi, quad);
      const KernelMatrix k = sample_finite_width_kernel(prev, cfg.width, phi, rng);
      per_trial[t] = eigenvalues(k);
      const double top = per_trial[t].back();
      long zeros = 0;
      for (double v : per_trial[t])
        if (v <= 1e-8 * top) ++zeros;
      zero_fraction[t] = double(zeros) / double(per_trial[t].size());
    });
    return 0;
  });
  std::vector<double> pooled;
  for (const auto& v : per_trial) pooled.insert(pooled.end(), v.begin(), v.end());
  double zero_mass = 0.0;
  for (double z : zero_fraction) zero_mass += z / double(zero_fraction.size());

  const LimitingSpectrum mu = in_stage(
      m, "limiting-spectrum", [&] { return limiting_kernel_spectrum(cfg.psi(), phi, cfg.depth, spectrum_params(cfg)); });
  const SpectralMeasure theory =
      in_stage(m, "mp-map", [&] { return mp_map(mu.measure, cfg.mp_params(gamma)); });
  // Numerically-zero eigenvalues scatter around 0 at the 1e-13 level; snap
  // them onto the theory's atom (same threshold as the zero-mass count).
  std::vector<double> snapped;
  for (const auto& v : per_trial)
    for (double x : v) snapped.push_back(x <= 1e-8 * v.back() ? 0.0 : x);
  const double ks = ks_distance(snapped, theory);

  // Histogram of the strictly positive part; the zero mass is reported apart.
  std::vector<double> positive;
  for (const auto& v : per_trial) {
    const double top = v.back();
    for (double x : v)
      if (x > 1e-8 * top) positive.push_back(x);
  }
  const Histogram hist = make_histogram(positive.empty() ? pooled : positive, cfg.histogram_bins);

  {
    Stage timer(m, "write");
    emit_table(m, out_dir, "eigenvalues", eigenvalue_table(pooled), format);
    emit_table(m, out_dir, "histogram", histogram_table(hist), format);
    nlohmann::json meta = {{"gamma", gamma},
                           {"psi", cfg.psi()},
                           {"eval_offset_y", cfg.eval_offset_y},
                           {"mu_provenance", mu.provenance}};
    write_measure(theory, (fs::path(out_dir) / "theory_density.csv").string(),
                  (fs::path(out_dir) / "theory_density.json").string(), meta);
    m.outputs.push_back("theory_density.csv");
    m.outputs.push_back("theory_density.json");

    Series hist_series{"sampled eigenvalues", {}, {}, {}, SeriesStyle::step, "#7f7f7f"};
    const double scale = double(positive.size()) / double(pooled.size());
    for (std::size_t b = 0; b < hist.bins(); ++b) {
      const double width = hist.edges[b + 1] - hist.edges[b];
      hist_series.x.push_back(hist.edges[b]);
      hist_series.y.push_back(scale * double(hist.counts[b]) / (double(positive.size()) * width));
    }
    if (hist.bins() > 0) {
      hist_series.x.push_back(hist.edges.back());
      hist_series.y.push_back(hist_series.y.back());
    }
    Series theory_series{"MP map density", {}, {}, {}, SeriesStyle::line, "#d62728"};
    for (std::size_t i = 0; i < theory.grid().size(); ++i) {
      theory_series.x.push_back(theory.grid()[i]);
      theory_series.y.push_back(theory.density()[i]);
    }
    double y_hi = 0.0;
    for (double y : hist_series.y) y_hi = std::max(y_hi, y);
    PlotSpec spec{"Eigenvalue density: N=" + std::to_string(cfg.width) + ", n=" +
                      std::to_string(cfg.n) + ", d=" + std::to_string(cfg.d),
                  "lambda", "density", false, false, 0.0, 1.3 * y_hi};
    emit(m, out_dir, "overlay.svg", render_svg(spec, {hist_series, theory_series}));
  }

  m.summary = {{"ks_distance", ks},
               {"zero_mass", zero_mass},
               {"gamma", gamma},
               {"psi", cfg.psi()},
               {"trials", cfg.trials},
               {"eigenvalues", pooled.size()},
               {"histogram_bins", hist.bins()},
               {"theory_zero_atom", theory.zero_atom_weight()},
               {"mu_provenance", mu.provenance}};
}

void run_descent_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                            OutputFormat format, RunManifest& m) {
  const TeacherModel teacher = cfg.make_teacher();
  const GpConfig gp = cfg.gp_config();
  const DescentTheoryInputs inputs = in_stage(m, "theory-inputs", [&] { return make_theory_inputs(cfg); });
  TheoryOptions options;
  options.route = cfg.theory_route == "grid" ? TheoryRoute::grid : TheoryRoute::transform;
  options.divergence_ceiling = cfg.divergence_ceiling;
  options.mp = cfg.mp_params(1.0);

  std::vector<int> widths = cfg.widths;
  std::sort(widths.begin(), widths.end());
  widths.erase(std::unique(widths.begin(), widths.end()), widths.end());

  std::vector<ErrorEstimate> sims(widths.size());
  std::vector<TheoryPoint> theory(widths.size());
  in_stage(m, "simulate", [&] {
    for (std::size_t i = 0; i < widths.size(); ++i)
      sims[i] = empirical_generalisation_error(teacher, cfg.recipe(widths[i]), cfg.n, gp,
                                               cfg.n_test, cfg.trials,
                                               RngSpec{cfg.seed, 100 + std::uint64_t(widths[i])});
    return 0;
  });
  in_stage(m, "theory", [&] {
    for (std::size_t i = 0; i < widths.size(); ++i)
      theory[i] = theoretical_generalisation_error(inputs, double(cfg.n) / widths[i], options);
    return 0;
  });

  // Rows ordered by decreasing gamma (increasing 1/gamma) so gamma is monotone.
  Table curve{{"gamma", "inv_gamma", "eg_theory", "eg_sim_mean", "eg_sim_stderr", "diverged"}, {}};
  Table sim_rows{{"N", "gamma", "eg_mean", "eg_stderr", "trials"}, {}};
  std::size_t peak = 0;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const double gamma = double(cfg.n) / widths[i];
    curve.rows.push_back({gamma, 1.0 / gamma, theory[i].eg, sims[i].mean, sims[i].std_error,
                          theory[i].diverged ? 1.0 : 0.0});
    sim_rows.rows.push_back({double(widths[i]), gamma, sims[i].mean, sims[i].std_error,
                             double(sims[i].trials)});
    if (sims[i].mean > sims[peak].mean) peak = i;
  }

  {
    Stage timer(m, "write");
    emit_table(m, out_dir, "descent_curve", curve, format);
    emit_table(m, out_dir, "gp_results", sim_rows, format);

    Series sim{"simulated", {}, {}, {}, SeriesStyle::points, "#1f77b4"};
    Series th{"theory", {}, {}, {}, SeriesStyle::line, "#d62728"};
    double y_hi = 0.0;
    for (std::size_t i = 0; i < widths.size(); ++i) {
      const double x = double(widths[i]) / cfg.n;
      sim.x.push_back(x);
      sim.y.push_back(sims[i].mean);
      sim.y_err.push_back(sims[i].std_error);
      th.x.push_back(x);
      th.y.push_back(theory[i].diverged ? std::nan("") : theory[i].eg);
      y_hi = std::max(y_hi, sims[i].mean);
    }
    // The interpolation peak dwarfs everything else; cap the view at a few
    // times the largest off-peak error.
    double off_peak = 0.0;
    for (std::size_t i = 0; i < widths.size(); ++i)
      if (i != peak) off_peak = std::max(off_peak, sims[i].mean);
    const double cap = std::min(y_hi * 1.1, std::max(4.0 * off_peak, 1e-12));
    PlotSpec spec{"Generalisation error: n=" + std::to_string(cfg.n) + ", d=" + std::to_string(cfg.d),
                  "1/gamma = N/n", "E_g", true, false, 0.0, cap};
    emit(m, out_dir, "overlay.svg", render_svg(spec, {th, sim}));
  }

  nlohmann::json abc = {{"provenance", std::string(to_string(inputs.abc.provenance))},
                        {"A", inputs.abc.a},
                        {"B", inputs.abc.b},
                        {"C", inputs.abc.c},
                        {"A_se", inputs.abc.a_se},
                        {"B_se", inputs.abc.b_se},
                        {"C_se", inputs.abc.c_se}};
  nlohmann::json points = nlohmann::json::array();
  for (std::size_t i = 0; i < widths.size(); ++i)
    points.push_back({{"N", widths[i]},
                      {"g", finite_or_string(theory[i].g)},
                      {"g2", finite_or_string(theory[i].g2)},
                      {"non_integrable", theory[i].non_integrable}});
  m.summary = {{"peak_width", widths[peak]},
               {"peak_eg", sims[peak].mean},
               {"limit_f2", inputs.limit_f2},
               {"plateau", inputs.limit_f2 + inputs.sigma_tau * inputs.sigma_tau},
               {"abc", abc},
               {"mu_provenance", inputs.mu.provenance},
               {"non_integrable", !theory.empty() && theory.front().non_integrable},
               {"theory_points", points}};
}

void run_variance_scaling(const ExperimentConfig& cfg, const std::string& out_dir,
                          OutputFormat format, RunManifest& m) {
  const Activation phi = cfg.make_activation();
  const QuadratureRule quad(cfg.quadrature_order);
  const TeacherModel law = cfg.make_teacher();
  const int p = cfg.variance_points;
  const Eigen::MatrixXd x = sample_inputs(law, p, RngSpec{cfg.seed, 0x7a7ULL});
  const KernelMatrix prev = preactivation_kernel(x, cfg.depth, phi, quad);
  const KernelMatrix exact = conjugate_kernel_matrix(x, cfg.depth, phi, quad);

  std::vector<int> widths = cfg.widths;
  std::sort(widths.begin(), widths.end());
  const int entries = p * (p + 1) / 2;

  Table table{{"N", "mean_variance", "max_abs_z"}, {}};
  std::vector<double> log_n, log_v;
  std::vector<double> max_z(widths.size(), 0.0);
  in_stage(m, "sample", [&] {
    for (std::size_t w = 0; w < widths.size(); ++w) {
      std::vector<Eigen::MatrixXd> draws(static_cast<std::size_t>(cfg.trials));
      parallel_for(draws.size(), [&](std::size_t t) {
        draws[t] = sample_finite_width_kernel(prev, widths[w], phi,
                                              RngSpec{cfg.seed, w * 1000003ULL + t})
                       .entries;
      });
      double var_sum = 0.0;
      for (int i = 0; i < p; ++i)
        for (int j = i; j < p; ++j) {
          double mean = 0.0;
          for (const auto& k : draws) mean += k(i, j);
          mean /= double(draws.size());
          double ss = 0.0;
          for (const auto& k : draws) ss += (k(i, j) - mean) * (k(i, j) - mean);
          const double var = ss / double(draws.size() - 1);
          var_sum += var;
          const double se = std::sqrt(var / double(draws.size()));
          if (se > 0.0) max_z[w] = std::max(max_z[w], std::abs(mean - exact.entries(i, j)) / se);
        }
      const double mean_var = var_sum / entries;
      table.rows.push_back({double(widths[w]), mean_var, max_z[w]});
      log_n.push_back(std::log(double(widths[w])));
      log_v.push_back(std::log(mean_var));
    }
    return 0;
  });

  // Ordinary least squares of log variance on log N.
  const double k = double(log_n.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < log_n.size(); ++i) {
    mx += log_n[i] / k;
    my += log_v[i] / k;
  }
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < log_n.size(); ++i) {
    sxx += (log_n[i] - mx) * (log_n[i] - mx);
    sxy += (log_n[i] - mx) * (log_v[i] - my);
  }
  const double slope = sxy / sxx;
  double rss = 0;
  for (std::size_t i = 0; i < log_n.size(); ++i) {
    const double r = log_v[i] - (my + slope * (log_n[i] - mx));
    rss += r * r;
  }
  const double slope_se = log_n.size() > 2 ? std::sqrt(rss / (k - 2) / sxx) : 0.0;

  {
    Stage timer(m, "write");
    emit_table(m, out_dir, "variance_scaling", table, format);
    Series s{"mean entry variance", {}, {}, {}, SeriesStyle::points, "#1f77b4"};
    Series fit{"fit", {}, {}, {}, SeriesStyle::line, "#d62728"};
    for (std::size_t i = 0; i < widths.size(); ++i) {
      s.x.push_back(widths[i]);
      s.y.push_back(std::exp(log_v[i]));
      fit.x.push_back(widths[i]);
      fit.y.push_back(std::exp(my + slope * (log_n[i] - mx)));
    }
    PlotSpec spec{"Finite-width kernel variance (" + cfg.activation + ")", "N", "variance", true,
                  true};
    emit(m, out_dir, "variance.svg", render_svg(spec, {fit, s}));
  }

  m.summary = {{"slope", slope},
               {"slope_se", slope_se},
               {"slope_ci95", {slope - 1.96 * slope_se, slope + 1.96 * slope_se}},
               {"slope_pass", slope >= -1.1 && slope <= -0.9},
               {"unbiased_max_abs_z", max_z.empty() ? 0.0 : max_z.front()},
               {"unbiased_pass", !max_z.empty() && max_z.front() <= 3.0},
               {"activation", cfg.activation},
               {"trials", cfg.trials}};
}

void run_limits_check(const ExperimentConfig& cfg, const std::string& out_dir, OutputFormat,
                      RunManifest& m) {
  const DescentTheoryInputs inputs = in_stage(m, "theory-inputs", [&] { return make_theory_inputs(cfg); });
  const AsymptoticLimits lim = in_stage(m, "asymptotics", [&] { return asymptotic_limits(inputs); });
  TheoryOptions options;
  options.route = cfg.theory_route == "grid" ? TheoryRoute::grid : TheoryRoute::transform;
  options.divergence_ceiling = cfg.divergence_ceiling;
  options.mp = cfg.mp_params(1.0);
  const TheoryPoint over =
      in_stage(m, "theory", [&] { return theoretical_generalisation_error(inputs, 0.01, options); });
  const TheoryPoint under =
      in_stage(m, "theory", [&] { return theoretical_generalisation_error(inputs, 100.0, options); });

  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  const double under_rel = rel(under.eg, lim.underparam);
  const double over_rel = rel(over.eg, lim.overparam);
  nlohmann::json j = {{"underparam_limit", lim.underparam},
                      {"overparam_limit", lim.overparam},
                      {"int_inv_lambda", lim.m1},
                      {"int_inv_lambda_sq", lim.m2},
                      {"eg_gamma_100", under.eg},
                      {"eg_gamma_0.01", over.eg},
                      {"underparam_rel_error", under_rel},
                      {"overparam_rel_error", over_rel},
                      {"underparam_pass", under_rel <= 0.02},
                      {"overparam_pass", over_rel <= 0.02},
                      {"abc",
                       {{"provenance", std::string(to_string(inputs.abc.provenance))},
                        {"A", inputs.abc.a},
                        {"B", inputs.abc.b},
                        {"C", inputs.abc.c}}},
                      {"limit_f2", inputs.limit_f2}};
  {
    Stage timer(m, "write");
    emit(m, out_dir, "limits.json", j.dump(2) + "\n");
  }
  m.summary = j;
}

}  // namespace nngp
