#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "nngp/histogram.hpp"
#include "nngp/measures.hpp"
#include "nngp/nngp_kernel.hpp"

namespace nngp {

// A rectangular table of numbers; written as CSV or as a JSON array of row
// objects. Values are formatted with %.17g so files are byte-reproducible.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

std::string format_number(double v);

void write_text(const std::string& path, const std::string& text);

// Two-column (lambda, density) CSV plus a JSON sidecar with atoms and grid metadata.
void write_measure(const SpectralMeasure& m, const std::string& csv_path,
                   const std::string& json_path, const nlohmann::json& metadata = {});
nlohmann::json measure_sidecar(const SpectralMeasure& m);

// Upper triangle (i, j, value) CSV plus JSON metadata (n, depth, activation, provenance).
void write_kernel(const KernelMatrix& k, const std::string& csv_path, const std::string& json_path);

Table eigenvalue_table(const std::vector<double>& values);
Table histogram_table(const Histogram& h);

}  // namespace nngp
