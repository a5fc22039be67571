#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sslab/metrics.hpp"

namespace sslab {

struct BootstrapConfig {
  std::size_t B = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  double mu_ref = 0.5;

  void validate() const;
};

struct BootstrapReport {
  std::string name;
  double estimate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double p_empir = 1.0;
  std::optional<double> p_adj;
  std::size_t B = 0;
  double alpha = 0.05;
  std::size_t n = 0;

  /// Replicates dropped after exhausting redraws (single-class resamples).
  std::size_t skipped = 0;
  /// Total single-class resamples that were redrawn.
  std::size_t redraws = 0;
  /// True when no replicate fell at or below mu_ref, so p_empir is the floor
  /// 1/(B+1) and should be read as an upper bound.
  bool p_at_floor = false;
};

/// Percentile bootstrap of the AUC. Replicate b draws from its own stream
/// derive_seed(seed, {b}), so the result does not depend on scheduling.
/// p_empir = (1 + #{AUC* <= mu_ref}) / (B_used + 1).
BootstrapReport bootstrap_auc(std::span<const ScoreEntry> scores, const BootstrapConfig& cfg);

/// Serial version that materialises each resample and calls auc(); kept as
/// the reference the parallel path is tested against.
BootstrapReport bootstrap_auc_reference(std::span<const ScoreEntry> scores, const BootstrapConfig& cfg);

/// Linear-interpolation sample quantile (Hyndman-Fan type 7) of sorted data.
double quantile_sorted(std::span<const double> sorted, double q);

/// Step-up adjustment: sort ascending, adj_(i) = min(1, min_{j>=i} p_(j) m / j),
/// returned in input order.
std::vector<double> benjamini_hochberg(std::span<const double> pvals);

/// One bulk adjustment across all reports; fills p_adj.
void adjust_reports(std::vector<BootstrapReport>& reports);

/// "*" when p_adj < alpha, "#" when alpha <= p_adj < 0.1, else "".
std::string significance_marker(double p_adj, double alpha);

struct SignificanceRow {
  std::string name;
  double estimate = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::string p_empir;  ///< formatted; "<= 1/(B+1)" bound when at floor
  double p_adj = 1.0;
  std::string marker;
};

/// Requires p_adj on every report (see adjust_reports).
std::vector<SignificanceRow> significance_table(std::span<const BootstrapReport> reports, double alpha);

/// Fields exactly {name, estimate, ci_lo, ci_hi, p_empir, p_adj, B, alpha, n};
/// p_adj is null when not yet adjusted.
nlohmann::json report_to_json(const BootstrapReport& r);
BootstrapReport report_from_json(const nlohmann::json& j);

}  // namespace sslab
