#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fracinterp/kfunctional.hpp"
#include "fracinterp/model.hpp"
#include "fracinterp/seminorms.hpp"

namespace fracinterp::app {

/// Built-in domain names: square, slit, snowflake (p = 0.3, all bumps, four
/// generations), snowflake:<plan.json>; anything else is read as a domain
/// JSON file.
std::shared_ptr<const DomainModel> load_model(const std::string& name);

/// The snowflake used when no plan is given.
SnowflakePlan default_snowflake_plan();

/// Cover at refinement level L (element size 2^-L).
CoverFn level_cover(std::shared_ptr<const DomainModel> model);

/// Independent RNG seed for a named quantity derived from the run seed.
std::uint64_t substream(std::uint64_t seed, std::string_view name);

/// Smooth functions used by the equivalence experiments.
std::vector<std::string> smooth_suite();

struct ExperimentConfig {
  std::string id;  ///< slit | lipschitz-equivalence | snowflake-equivalence | custom
  std::vector<std::string> domains;
  /// Function ids per domain name; the key "*" applies to every domain.
  std::map<std::string, std::vector<std::string>> functions;
  std::vector<Exponents> exponents;
  int first_level = 2;
  int last_level = 5;
  bool full = true;    ///< compute the full seminorm
  bool interp = true;  ///< compute K profiles
  int grid_count = 6;
  double grid_ratio = 0.5;
  std::optional<double> tau;
  int extra_count = 0;  ///< also run a profile with grid_count + extra_count scales
  std::uint64_t oracle_samples = 0;
  std::uint64_t seed = 1;
  SeminormOptions seminorm;
  KOptions k;

  [[nodiscard]] std::vector<std::string> functions_for(const std::string& domain) const;
  /// Throws ValidationError for unknown ids, an empty suite or fewer than
  /// three levels.
  void validate() const;
};

ExperimentConfig default_config(const std::string& id);
/// Overlays the keys present in `j` on default_config(j["experiment"]).
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);

struct CaseRecord {
  std::string domain;
  std::string fn;
  Exponents exponents;
  std::vector<double> full_history;
  std::vector<double> restricted_history;
  bool full_diverging = false;
  bool restricted_diverging = false;
  double restricted_change = 0.0;  ///< relative change over the last two levels
  double lp = 0.0;
  std::optional<KProfile> profile;
  double interp_change = 0.0;  ///< relative change of interp_opt against the shorter grid
  bool interp_stable = false;
  std::optional<double> interp_extended;  ///< interp_opt with extra scales
  bool chain_holds = true;                ///< K_opt <= min(||f||_p, K_constructive) everywhere
  double c_interp_to_restricted = 0.0;    ///< restricted / (lp + interp_opt)
  double c_restricted_to_interp = 0.0;    ///< interp_constructive / (lp + restricted)
  double full_over_restricted = 0.0;
  std::optional<McResult> oracle_full;
  std::optional<McResult> oracle_restricted;
  std::string error;
};

struct Report {
  ExperimentConfig config;
  std::vector<CaseRecord> records;
  nlohmann::json summary;

  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string to_csv() const;
};

/// Runs every (domain, function) task of the configuration. A failing task
/// is kept in the report with its error message.
Report run_experiment(const ExperimentConfig& config, int threads);

/// report.json, results.csv, and SVG plots of seminorm-vs-level and
/// ell^-s K(ell) curves.
void write_report(const Report& report, const std::filesystem::path& dir);

nlohmann::json environment_stamp();

}  // namespace fracinterp::app
