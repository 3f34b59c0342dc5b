#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nngp/gp_regression.hpp"
#include "nngp/measures.hpp"
#include "nngp/theory.hpp"

namespace nngp {

enum class ExperimentKind { spectrum, descent, variance, limits };

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_kind(std::string_view text);

// Every experiment knob in one flat record. Serialises to `key = value` lines
// (comments start with #) and to an equivalent flat JSON object; both
// round-trip losslessly.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::spectrum;

  // network and data
  int depth = 2;
  std::string activation = "identity";
  int n = 200;
  int d = 400;
  int width = 300;           // N, spectrum experiment
  std::vector<int> widths;   // N sweep, descent and variance experiments
  double sigma_eps = 0.0;
  double sigma_tau = 0.1;
  std::string teacher = "linear";          // linear | zero
  std::string covariance = "isotropic";    // isotropic | two-point:<a>,<b>
  int trials = 20;
  int n_test = 200;
  std::uint64_t seed = 0;
  std::string cross_kernel = "shared";   // shared | exact

  // numerics
  int quadrature_order = 64;
  int grid_points = 2000;
  int mu_grid_points = 400;
  double eval_offset_y = 1e-3;
  int max_iters = 10000;
  double damping = 0.5;
  double tol = 1e-9;
  double pinv_rcond = 1e-10;
  int histogram_bins = 0;  // 0: Freedman-Diaconis

  // theory
  std::string abc_mode = "closed-form";  // closed-form | monte-carlo
  int abc_samples = 200000;
  std::vector<int> abc_ladder{100, 200, 400};
  int f2_samples = 200000;
  std::string theory_route = "transform";  // transform | grid
  double divergence_ceiling = 1e6;
  int mu_estimate_n = 1000;
  int mu_estimate_draws = 10;

  // variance experiment
  int variance_points = 4;  // number of inputs whose kernel entries are tracked

  std::string output_dir;

  void validate() const;

  std::map<std::string, std::string> to_map() const;
  // Keys absent from the input keep the defaults of the input's `kind` (or of
  // default_kind when no kind is given).
  static ExperimentConfig from_map(const std::map<std::string, std::string>& values,
                                   ExperimentKind default_kind = ExperimentKind::spectrum);

  std::string to_text() const;
  static ExperimentConfig from_text(const std::string& text,
                                    ExperimentKind default_kind = ExperimentKind::spectrum);

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j,
                                    ExperimentKind default_kind = ExperimentKind::spectrum);

  // Loads `key = value` text, or JSON when the file starts with '{'.
  static ExperimentConfig load(const std::string& path,
                               ExperimentKind default_kind = ExperimentKind::spectrum);

  // Sets one knob from its text form; throws ConfigError on unknown keys.
  void set(const std::string& key, const std::string& value);

  // Hash of the canonical (key-sorted) serialisation; the output directory is
  // excluded so relocating a run does not change its identity.
  std::string hash() const;

  // Derived objects.
  double psi() const { return double(n) / double(d); }
  TeacherModel make_teacher(int dim) const;
  TeacherModel make_teacher() const { return make_teacher(d); }
  Activation make_activation() const;
  MpMapParams mp_params(double gamma) const;
  GpConfig gp_config() const;
  KernelRecipe recipe(std::optional<int> finite_width) const;
};

// Built-in defaults for each experiment kind.
ExperimentConfig default_config(ExperimentKind kind);

}  // namespace nngp
