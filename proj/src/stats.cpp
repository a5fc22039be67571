#include "sslab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sslab/rng.hpp"
#include "sslab/textutil.hpp"

namespace sslab {
namespace {

constexpr int kMaxRedraws = 100;

void check_input(std::span<const ScoreEntry> scores) {
  if (scores.size() < 2) throw MetricError("bootstrap_auc: need at least 2 samples");
  validate_scores(scores);
  bool pos = false, neg = false;
  for (const auto& e : scores) (e.label == 1 ? pos : neg) = true;
  if (!pos || !neg) throw MetricError("bootstrap_auc: degenerate input, only one class present");
}

// Draws one resample as per-sample multiplicities. Returns false when every
// attempt produced a single class.
bool draw_counts(Rng& rng, std::span<const ScoreEntry> scores, std::vector<std::uint32_t>& counts,
                 std::size_t& redraws) {
  const std::size_t n = scores.size();
  for (int attempt = 0; attempt <= kMaxRedraws; ++attempt) {
    std::fill(counts.begin(), counts.end(), 0u);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = static_cast<std::size_t>(rng.below(n));
      counts[i] += 1;
      pos += static_cast<std::size_t>(scores[i].label);
    }
    if (pos > 0 && pos < n) return true;
    ++redraws;
  }
  return false;
}

struct Replicates {
  std::vector<double> aucs;  // NaN marks a skipped replicate
  std::size_t redraws = 0;
};

BootstrapReport summarise(std::span<const ScoreEntry> scores, const BootstrapConfig& cfg, Replicates reps) {
  BootstrapReport r;
  r.estimate = auc(scores);
  r.B = cfg.B;
  r.alpha = cfg.alpha;
  r.n = scores.size();
  r.redraws = reps.redraws;
  std::vector<double> kept;
  kept.reserve(reps.aucs.size());
  for (double a : reps.aucs)
    if (!std::isnan(a)) kept.push_back(a);
  r.skipped = reps.aucs.size() - kept.size();
  if (kept.empty()) throw MetricError("bootstrap_auc: every replicate was single-class");
  std::sort(kept.begin(), kept.end());
  r.ci_lo = quantile_sorted(kept, cfg.alpha / 2.0);
  r.ci_hi = quantile_sorted(kept, 1.0 - cfg.alpha / 2.0);
  const auto at_or_below =
      static_cast<std::size_t>(std::upper_bound(kept.begin(), kept.end(), cfg.mu_ref) - kept.begin());
  r.p_empir = static_cast<double>(1 + at_or_below) / static_cast<double>(kept.size() + 1);
  r.p_at_floor = at_or_below == 0;
  return r;
}

}  // namespace

void BootstrapConfig::validate() const {
  if (B < 1) throw std::invalid_argument("bootstrap: B must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("bootstrap: alpha must be in (0,1)");
}

BootstrapReport bootstrap_auc(std::span<const ScoreEntry> scores, const BootstrapConfig& cfg) {
  cfg.validate();
  check_input(scores);
  const std::size_t n = scores.size();

  // Order samples by descending score once, grouping ties; every replicate
  // then computes its AUC from multiplicities in a single sweep.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a].score > scores[b].score; });
  std::vector<std::size_t> group_start{0};
  for (std::size_t k = 1; k < n; ++k)
    if (scores[order[k]].score != scores[order[k - 1]].score) group_start.push_back(k);
  group_start.push_back(n);

  Replicates reps;
  reps.aucs.assign(cfg.B, 0.0);
  std::size_t redraws = 0;
  const auto B = static_cast<std::ptrdiff_t>(cfg.B);

#pragma omp parallel reduction(+ : redraws)
  {
    std::vector<std::uint32_t> counts(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t b = 0; b < B; ++b) {
      Rng rng = Rng::substream(cfg.seed, {static_cast<std::uint64_t>(b)});
      if (!draw_counts(rng, scores, counts, redraws)) {
        reps.aucs[static_cast<std::size_t>(b)] = std::nan("");
        continue;
      }
      std::uint64_t tp = 0, fp = 0, num = 0;
      for (std::size_t g = 0; g + 1 < group_start.size(); ++g) {
        std::uint64_t gtp = 0, gfp = 0;
        for (std::size_t k = group_start[g]; k < group_start[g + 1]; ++k) {
          const std::size_t i = order[k];
          (scores[i].label == 1 ? gtp : gfp) += counts[i];
        }
        num += gfp * (2 * tp + gtp);
        tp += gtp;
        fp += gfp;
      }
      reps.aucs[static_cast<std::size_t>(b)] = static_cast<double>(num) / static_cast<double>(2 * tp * fp);
    }
  }
  reps.redraws = redraws;
  return summarise(scores, cfg, std::move(reps));
}

BootstrapReport bootstrap_auc_reference(std::span<const ScoreEntry> scores, const BootstrapConfig& cfg) {
  cfg.validate();
  check_input(scores);
  const std::size_t n = scores.size();
  Replicates reps;
  std::vector<std::uint32_t> counts(n);
  ScoreSet resample;
  for (std::size_t b = 0; b < cfg.B; ++b) {
    Rng rng = Rng::substream(cfg.seed, {static_cast<std::uint64_t>(b)});
    if (!draw_counts(rng, scores, counts, reps.redraws)) {
      reps.aucs.push_back(std::nan(""));
      continue;
    }
    resample.clear();
    for (std::size_t i = 0; i < n; ++i)
      for (std::uint32_t c = 0; c < counts[i]; ++c) resample.push_back(scores[i]);
    reps.aucs.push_back(auc(resample));
  }
  return summarise(scores, cfg, std::move(reps));
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> benjamini_hochberg(std::span<const double> pvals) {
  const std::size_t m = pvals.size();
  for (double p : pvals)
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("benjamini_hochberg: p-value out of (0,1]: " + format_double(p));
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pvals[a] < pvals[b]; });
  std::vector<double> adj(m);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    const double scaled = pvals[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1);
    running = std::min(running, scaled);
    adj[order[k]] = std::max(running, pvals[order[k]]);
  }
  return adj;
}

void adjust_reports(std::vector<BootstrapReport>& reports) {
  std::vector<double> p;
  p.reserve(reports.size());
  for (const auto& r : reports) p.push_back(r.p_empir);
  const auto adj = benjamini_hochberg(p);
  for (std::size_t i = 0; i < reports.size(); ++i) reports[i].p_adj = adj[i];
}

std::string significance_marker(double p_adj, double alpha) {
  if (p_adj < alpha) return "*";
  if (p_adj < 0.1) return "#";
  return "";
}

std::vector<SignificanceRow> significance_table(std::span<const BootstrapReport> reports, double alpha) {
  std::vector<SignificanceRow> rows;
  for (const auto& r : reports) {
    if (!r.p_adj) throw std::invalid_argument("significance_table: report '" + r.name + "' has no adjusted p-value");
    SignificanceRow row;
    row.name = r.name;
    row.estimate = r.estimate;
    row.ci_lo = r.ci_lo;
    row.ci_hi = r.ci_hi;
    row.p_empir = (r.p_at_floor ? "<= " : "") + format_double(r.p_empir);
    row.p_adj = *r.p_adj;
    row.marker = significance_marker(*r.p_adj, alpha);
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json report_to_json(const BootstrapReport& r) {
  nlohmann::json j;
  j["name"] = r.name;
  j["estimate"] = r.estimate;
  j["ci_lo"] = r.ci_lo;
  j["ci_hi"] = r.ci_hi;
  j["p_empir"] = r.p_empir;
  j["p_adj"] = r.p_adj ? nlohmann::json(*r.p_adj) : nlohmann::json(nullptr);
  j["B"] = r.B;
  j["alpha"] = r.alpha;
  j["n"] = r.n;
  return j;
}

BootstrapReport report_from_json(const nlohmann::json& j) {
  BootstrapReport r;
  r.name = j.at("name").get<std::string>();
  r.estimate = j.at("estimate").get<double>();
  r.ci_lo = j.at("ci_lo").get<double>();
  r.ci_hi = j.at("ci_hi").get<double>();
  r.p_empir = j.at("p_empir").get<double>();
  if (!j.at("p_adj").is_null()) r.p_adj = j.at("p_adj").get<double>();
  r.B = j.at("B").get<std::size_t>();
  r.alpha = j.at("alpha").get<double>();
  r.n = j.at("n").get<std::size_t>();
  r.p_at_floor = r.p_empir <= 1.0 / static_cast<double>(r.B + 1) + 1e-15;
  return r;
}

}  // namespace sslab
