#pragma once

#include "panto/analysis.hpp"
#include "panto/em_solver.hpp"
#include "panto/model.hpp"
#include "panto/stability.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace panto {

using Json = nlohmann::ordered_json;

/// Malformed configuration, model description or input file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

/// Model description:
///   {"builtin"?, "id"?, "dim", "brownian_dim", "theta_lower", "a", "b", "c",
///    "beta", "use_abs", "measure", "lambdas"?, "theta_upper"?}
/// measure is {"kind": "uniform", "support": [lo, hi], "n_atoms": n},
/// {"kind": "atoms", "support": [lo, hi], "atoms": [[theta, w], ...]} or
/// {"kind": "dirac", "theta": t}. With "builtin", the remaining keys
/// override that model's fields.
PantographIntegralModel<double> model_from_json(const Json& j);
Json model_to_json(const PantographIntegralModel<double>& model);

/// A builtin name, inline JSON (first non-space char '{') or a JSON file path.
PantographIntegralModel<double> load_model(const std::string& spec);

Json read_json_file(const std::string& path);

/// Finite values as numbers; inf and nan as the strings "inf", "-inf", "nan".
Json json_number(double x);
double number_from_json(const Json& j);

Json to_json(const StabilityReport& report);
Json to_json(const ErrorFit& fit);
Json to_json(const RateEstimate& rate);
Json to_json(const Window& window);

/// Shortest round-trip decimal form, '.' separator regardless of locale.
std::string format_double(double x);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);

/// Columns k, t, y_1..y_n.
void write_path_csv(std::ostream& out, const DiscretePath<double>& path);
DiscretePath<double> read_path_csv(std::istream& in);

/// Columns k, t, mean_sq.
void write_summary_csv(std::ostream& out, const EnsembleSummary<double>& summary);
/// The mean-square series as a one-path summary.
EnsembleSummary<double> read_summary_csv(std::istream& in);

/// Columns delta, error.
void write_ladder_csv(std::ostream& out, const std::vector<double>& deltas, const std::vector<double>& errors);
void read_ladder_csv(std::istream& in, std::vector<double>& deltas, std::vector<double>& errors);

}  // namespace panto
