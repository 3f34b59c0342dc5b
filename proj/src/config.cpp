#include "nngp/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "nngp/errors.hpp"

namespace nngp {

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::spectrum: return "spectrum";
    case ExperimentKind::descent: return "descent";
    case ExperimentKind::variance: return "variance";
    case ExperimentKind::limits: return "limits";
  }
  return "spectrum";
}

ExperimentKind parse_kind(std::string_view text) {
  if (text == "spectrum") return ExperimentKind::spectrum;
  if (text == "descent") return ExperimentKind::descent;
  if (text == "variance" || text == "variance-scaling") return ExperimentKind::variance;
  if (text == "limits") return ExperimentKind::limits;
  throw ConfigError("unknown experiment kind '" + std::string(text) + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Shortest text that parses back to the same double.
std::string format_double(double v) {
  char buf[64];
  for (int precision = 6; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || !std::isfinite(v))
    throw ConfigError("'" + key + "' expects a finite number, got '" + text + "'");
  return v;
}

template <class Int>
Int parse_int(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  Int v{};
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
    throw ConfigError("'" + key + "' expects an integer, got '" + text + "'");
  return v;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_int<int>(key, item));
  }
  return out;
}

std::string format_int_list(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  enum class Json { number, integer, text, int_list } json = Json::text;
};

Field int_field(const char* key, int ExperimentConfig::*m) {
  return {key, [m](const ExperimentConfig& c) { return std::to_string(c.*m); },
          [m, key](ExperimentConfig& c, const std::string& v) { c.*m = parse_int<int>(key, v); },
          Field::Json::integer};
}

Field double_field(const char* key, double ExperimentConfig::*m) {
  return {key, [m](const ExperimentConfig& c) { return format_double(c.*m); },
          [m, key](ExperimentConfig& c, const std::string& v) { c.*m = parse_double(key, v); },
          Field::Json::number};
}

Field text_field(const char* key, std::string ExperimentConfig::*m) {
  return {key, [m](const ExperimentConfig& c) { return c.*m; },
          [m](ExperimentConfig& c, const std::string& v) { c.*m = trim(v); }, Field::Json::text};
}

Field list_field(const char* key, std::vector<int> ExperimentConfig::*m) {
  return {key, [m](const ExperimentConfig& c) { return format_int_list(c.*m); },
          [m, key](ExperimentConfig& c, const std::string& v) { c.*m = parse_int_list(key, v); },
          Field::Json::int_list};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back({"kind", [](const ExperimentConfig& c) { return std::string(to_string(c.kind)); },
                 [](ExperimentConfig& c, const std::string& v) { c.kind = parse_kind(trim(v)); },
                 Field::Json::text});
    f.push_back(int_field("depth", &ExperimentConfig::depth));
    f.push_back(text_field("activation", &ExperimentConfig::activation));
    f.push_back(int_field("n", &ExperimentConfig::n));
    f.push_back(int_field("d", &ExperimentConfig::d));
    f.push_back(int_field("width", &ExperimentConfig::width));
    f.push_back(list_field("widths", &ExperimentConfig::widths));
    f.push_back(double_field("sigma_eps", &ExperimentConfig::sigma_eps));
    f.push_back(double_field("sigma_tau", &ExperimentConfig::sigma_tau));
    f.push_back(text_field("teacher", &ExperimentConfig::teacher));
    f.push_back(text_field("covariance", &ExperimentConfig::covariance));
    f.push_back(int_field("trials", &ExperimentConfig::trials));
    f.push_back(int_field("n_test", &ExperimentConfig::n_test));
    f.push_back({"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
                 [](ExperimentConfig& c, const std::string& v) {
                   c.seed = parse_int<std::uint64_t>("seed", v);
                 },
                 Field::Json::integer});
    f.push_back(text_field("cross_kernel", &ExperimentConfig::cross_kernel));
    f.push_back(int_field("quadrature_order", &ExperimentConfig::quadrature_order));
    f.push_back(int_field("grid_points", &ExperimentConfig::grid_points));
    f.push_back(int_field("mu_grid_points", &ExperimentConfig::mu_grid_points));
    f.push_back(double_field("eval_offset_y", &ExperimentConfig::eval_offset_y));
    f.push_back(int_field("max_iters", &ExperimentConfig::max_iters));
    f.push_back(double_field("damping", &ExperimentConfig::damping));
    f.push_back(double_field("tol", &ExperimentConfig::tol));
    f.push_back(double_field("pinv_rcond", &ExperimentConfig::pinv_rcond));
    f.push_back(int_field("histogram_bins", &ExperimentConfig::histogram_bins));
    f.push_back(text_field("abc_mode", &ExperimentConfig::abc_mode));
    f.push_back(int_field("abc_samples", &ExperimentConfig::abc_samples));
    f.push_back(list_field("abc_ladder", &ExperimentConfig::abc_ladder));
    f.push_back(int_field("f2_samples", &ExperimentConfig::f2_samples));
    f.push_back(text_field("theory_route", &ExperimentConfig::theory_route));
    f.push_back(double_field("divergence_ceiling", &ExperimentConfig::divergence_ceiling));
    f.push_back(int_field("mu_estimate_n", &ExperimentConfig::mu_estimate_n));
    f.push_back(int_field("mu_estimate_draws", &ExperimentConfig::mu_estimate_draws));
    f.push_back(int_field("variance_points", &ExperimentConfig::variance_points));
    f.push_back(text_field("output_dir", &ExperimentConfig::output_dir));
    return f;
  }();
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields())
    if (key == f.key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

// Two-point covariance spec "two-point:a,b" -> (a, b).
std::pair<double, double> parse_two_point(const std::string& spec) {
  const std::string body = spec.substr(std::string("two-point:").size());
  const auto comma = body.find(',');
  if (comma == std::string::npos) throw ConfigError("two-point covariance needs 'two-point:a,b'");
  return {parse_double("covariance", body.substr(0, comma)),
          parse_double("covariance", body.substr(comma + 1))};
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

template <class F>
void require(bool ok, F&& message) {
  if (!ok) throw ConfigError(message());
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  field(trim(key)).set(*this, value);
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out[f.key] = f.get(*this);
  return out;
}

ExperimentConfig ExperimentConfig::from_map(const std::map<std::string, std::string>& values,
                                            ExperimentKind default_kind) {
  // The kind first so kind-specific defaults never overwrite explicit keys.
  auto it = values.find("kind");
  ExperimentConfig c =
      default_config(it != values.end() ? parse_kind(trim(it->second)) : default_kind);
  for (const auto& [k, v] : values) c.set(k, v);
  return c;
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text,
                                             ExperimentKind default_kind) {
  std::map<std::string, std::string> values;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (values.count(key)) throw ConfigError("duplicate config key '" + key + "'");
    field(key);  // reject unknown keys with the line's key
    values[key] = trim(line.substr(eq + 1));
  }
  return from_map(values, default_kind);
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : fields()) {
    switch (f.json) {
      case Field::Json::number: j[f.key] = parse_double(f.key, f.get(*this)); break;
      case Field::Json::integer:
        if (std::string(f.key) == "seed")
          j[f.key] = seed;
        else
          j[f.key] = parse_int<long long>(f.key, f.get(*this));
        break;
      case Field::Json::text: j[f.key] = f.get(*this); break;
      case Field::Json::int_list: j[f.key] = parse_int_list(f.key, f.get(*this)); break;
    }
  }
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j,
                                             ExperimentKind default_kind) {
  if (!j.is_object()) throw ConfigError("JSON config must be an object");
  std::map<std::string, std::string> values;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const Field& f = field(it.key());
    const auto& v = it.value();
    switch (f.json) {
      case Field::Json::number:
        if (!v.is_number()) throw ConfigError("'" + it.key() + "' must be a number");
        values[it.key()] = format_double(v.get<double>());
        break;
      case Field::Json::integer:
        if (!v.is_number_integer()) throw ConfigError("'" + it.key() + "' must be an integer");
        values[it.key()] = v.is_number_unsigned() ? std::to_string(v.get<std::uint64_t>())
                                                  : std::to_string(v.get<long long>());
        break;
      case Field::Json::text:
        if (!v.is_string()) throw ConfigError("'" + it.key() + "' must be a string");
        values[it.key()] = v.get<std::string>();
        break;
      case Field::Json::int_list: {
        if (!v.is_array()) throw ConfigError("'" + it.key() + "' must be an array");
        std::vector<int> list;
        for (const auto& e : v) {
          if (!e.is_number_integer()) throw ConfigError("'" + it.key() + "' must hold integers");
          list.push_back(e.get<int>());
        }
        values[it.key()] = format_int_list(list);
        break;
      }
    }
  }
  return from_map(values, default_kind);
}

ExperimentConfig ExperimentConfig::load(const std::string& path, ExperimentKind default_kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("invalid JSON config: " + std::string(e.what()));
    }
    return from_json(j, default_kind);
  }
  return from_text(text, default_kind);
}

std::string ExperimentConfig::hash() const {
  nlohmann::json j = to_json();
  j.erase("output_dir");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

void ExperimentConfig::validate() const {
  require(depth >= 2, [] { return "depth must be >= 2"; });
  try {
    Activation::from_name(activation);
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  require(n >= 1 && d >= 1, [] { return "n and d must be >= 1"; });
  require(sigma_eps >= 0.0, [] { return "sigma_eps must be >= 0"; });
  require(sigma_tau >= 0.0, [] { return "sigma_tau must be >= 0"; });
  require(teacher == "linear" || teacher == "zero",
          [&] { return "teacher must be 'linear' or 'zero', got '" + teacher + "'"; });
  require(covariance == "isotropic" || covariance.rfind("two-point:", 0) == 0,
          [&] { return "covariance must be 'isotropic' or 'two-point:a,b'"; });
  if (covariance != "isotropic") {
    const auto [a, b] = parse_two_point(covariance);
    require(a >= 0.0 && b >= 0.0, [] { return "covariance eigenvalues must be >= 0"; });
  }
  require(trials >= 1, [] { return "trials must be >= 1"; });
  require(n_test >= 1, [] { return "n_test must be >= 1"; });
  require(cross_kernel == "shared" || cross_kernel == "exact",
          [] { return "cross_kernel must be 'shared' or 'exact'"; });
  require(quadrature_order >= 2, [] { return "quadrature_order must be >= 2"; });
  require(grid_points >= 3 && mu_grid_points >= 3, [] { return "grids need >= 3 points"; });
  require(eval_offset_y > 0.0, [] { return "eval_offset_y must be > 0"; });
  require(max_iters >= 1, [] { return "max_iters must be >= 1"; });
  require(damping > 0.0 && damping <= 1.0, [] { return "damping must lie in (0, 1]"; });
  require(tol > 0.0, [] { return "tol must be > 0"; });
  require(pinv_rcond > 0.0, [] { return "pinv_rcond must be > 0"; });
  require(histogram_bins >= 0, [] { return "histogram_bins must be >= 0"; });
  require(abc_mode == "closed-form" || abc_mode == "monte-carlo",
          [] { return "abc_mode must be 'closed-form' or 'monte-carlo'"; });
  require(abc_samples >= 2, [] { return "abc_samples must be >= 2"; });
  require(!abc_ladder.empty(), [] { return "abc_ladder must not be empty"; });
  for (int v : abc_ladder) require(v >= 1, [] { return "abc_ladder entries must be >= 1"; });
  require(f2_samples >= 1, [] { return "f2_samples must be >= 1"; });
  require(theory_route == "transform" || theory_route == "grid",
          [] { return "theory_route must be 'transform' or 'grid'"; });
  require(divergence_ceiling > 0.0, [] { return "divergence_ceiling must be > 0"; });
  require(mu_estimate_n >= 2 && mu_estimate_draws >= 1,
          [] { return "mu_estimate_n must be >= 2 and mu_estimate_draws >= 1"; });

  switch (kind) {
    case ExperimentKind::spectrum:
      require(width >= 1, [] { return "width must be >= 1"; });
      break;
    case ExperimentKind::descent:
      require(!widths.empty(), [] { return "descent needs a non-empty widths list"; });
      for (int w : widths) require(w >= 1, [] { return "widths must be >= 1"; });
      break;
    case ExperimentKind::variance:
      require(!widths.empty(), [] { return "variance needs a non-empty widths list"; });
      require(widths.size() >= 2, [] { return "variance needs at least two widths"; });
      for (int w : widths) require(w >= 1, [] { return "widths must be >= 1"; });
      require(trials >= 10, [] {
        return "variance scaling needs trials >= 10 for a variance estimate";
      });
      require(variance_points >= 1, [] { return "variance_points must be >= 1"; });
      break;
    case ExperimentKind::limits:
      break;
  }
}

TeacherModel ExperimentConfig::make_teacher(int dim) const {
  TeacherModel t = teacher == "zero"
                       ? TeacherModel::zero(dim, sigma_tau)
                       : TeacherModel::linear_random(dim, sigma_tau, RngSpec{seed, 0xbe7aULL + dim});
  if (covariance != "isotropic") {
    const auto [a, b] = parse_two_point(covariance);
    Eigen::VectorXd diag(dim);
    for (int i = 0; i < dim; ++i) diag(i) = (2 * i < dim ? a : b) / dim;
    t.with_covariance(diag.asDiagonal().toDenseMatrix());
  }
  return t;
}

Activation ExperimentConfig::make_activation() const { return Activation::from_name(activation); }

MpMapParams ExperimentConfig::mp_params(double gamma) const {
  MpMapParams p;
  p.gamma = gamma;
  p.eval_offset_y = eval_offset_y;
  p.grid_points = grid_points;
  p.max_iters = max_iters;
  p.damping = damping;
  p.tol = tol;
  return p;
}

GpConfig ExperimentConfig::gp_config() const {
  GpConfig g;
  g.sigma_eps = sigma_eps;
  g.pinv_rcond = pinv_rcond;
  return g;
}

KernelRecipe ExperimentConfig::recipe(std::optional<int> finite_width) const {
  KernelRecipe r;
  r.depth = depth;
  r.activation = make_activation();
  r.order = quadrature_order;
  r.width = finite_width;
  r.cross = cross_kernel == "exact" ? CrossKernel::exact : CrossKernel::shared_features;
  return r;
}

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::spectrum:
      c.n = 200;
      c.d = 400;
      c.width = 300;
      c.trials = 20;
      break;
    case ExperimentKind::descent:
      c.n = 100;
      c.d = 200;
      c.widths = {5, 10, 25, 50, 80, 100, 125, 200, 400, 700, 1000};
      c.trials = 30;
      c.n_test = 200;
      break;
    case ExperimentKind::variance:
      c.n = 4;
      c.d = 8;
      c.widths = {50, 100, 200, 400, 800, 1600};
      c.trials = 1000;
      c.variance_points = 4;
      break;
    case ExperimentKind::limits:
      c.n = 100;
      c.d = 200;
      break;
  }
  return c;
}

}  // namespace nngp
