#include "nngp/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "nngp/errors.hpp"

namespace nngp {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string Table::to_csv() const {
  std::string out;
  for (std::size_t c = 0; c < columns.size(); ++c) out += (c ? "," : "") + columns[c];
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out += (c ? "," : "") + format_number(row[c]);
    out += "\n";
  }
  return out;
}

nlohmann::json Table::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& row : rows) {
    nlohmann::json r = nlohmann::json::object();
    for (std::size_t c = 0; c < columns.size() && c < row.size(); ++c) {
      if (std::isfinite(row[c]))
        r[columns[c]] = row[c];
      else
        r[columns[c]] = format_number(row[c]);
    }
    rows_json.push_back(std::move(r));
  }
  return rows_json;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

nlohmann::json measure_sidecar(const SpectralMeasure& m) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : m.atoms()) atoms.push_back({{"location", a.location}, {"weight", a.weight}});
  nlohmann::json j;
  j["atoms"] = atoms;
  j["grid_points"] = m.grid().size();
  if (m.has_density()) {
    j["grid_min"] = m.grid().front();
    j["grid_max"] = m.grid().back();
  }
  j["atom_mass"] = m.atom_mass();
  j["density_mass"] = m.density_mass();
  j["total_mass"] = m.total_mass();
  return j;
}

void write_measure(const SpectralMeasure& m, const std::string& csv_path,
                   const std::string& json_path, const nlohmann::json& metadata) {
  Table t{{"lambda", "density"}, {}};
  for (std::size_t i = 0; i < m.grid().size(); ++i) t.rows.push_back({m.grid()[i], m.density()[i]});
  write_text(csv_path, t.to_csv());
  nlohmann::json j = measure_sidecar(m);
  if (metadata.is_object())
    for (auto it = metadata.begin(); it != metadata.end(); ++it) j[it.key()] = it.value();
  write_text(json_path, j.dump(2) + "\n");
}

void write_kernel(const KernelMatrix& k, const std::string& csv_path, const std::string& json_path) {
  Table t{{"i", "j", "value"}, {}};
  for (Eigen::Index i = 0; i < k.n(); ++i)
    for (Eigen::Index j = i; j < k.n(); ++j) t.rows.push_back({double(i), double(j), k.entries(i, j)});
  write_text(csv_path, t.to_csv());
  nlohmann::json j;
  j["n"] = k.n();
  j["depth"] = k.depth;
  j["activation"] = k.activation;
  j["provenance"] = std::string(to_string(k.provenance));
  write_text(json_path, j.dump(2) + "\n");
}

Table eigenvalue_table(const std::vector<double>& values) {
  Table t{{"lambda"}, {}};
  t.rows.reserve(values.size());
  for (double v : values) t.rows.push_back({v});
  return t;
}

Table histogram_table(const Histogram& h) {
  Table t{{"bin_left", "bin_right", "count"}, {}};
  for (std::size_t b = 0; b < h.bins(); ++b)
    t.rows.push_back({h.edges[b], h.edges[b + 1], double(h.counts[b])});
  return t;
}

}  // namespace nngp
