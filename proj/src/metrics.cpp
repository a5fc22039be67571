#include "sslab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "sslab/textutil.hpp"

namespace sslab {

void validate_scores(std::span<const ScoreEntry> scores) {
  for (const auto& e : scores) {
    if (e.label != 0 && e.label != 1)
      throw MetricError("sample '" + e.id + "': label must be 0 or 1, got " + std::to_string(e.label));
    if (!std::isfinite(e.score) || e.score < 0.0 || e.score > 1.0)
      throw MetricError("sample '" + e.id + "': score must be in [0,1], got " + format_double(e.score));
  }
}

double accuracy(std::span<const ScoreEntry> scores, double threshold) {
  if (scores.empty()) throw MetricError("accuracy: empty score set");
  std::size_t correct = 0;
  for (const auto& e : scores) correct += ((e.score > threshold) == (e.label == 1)) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

namespace {

RocCurve roc_from_sorted(std::span<const int> labels, std::span<const double> scores,
                         std::span<const std::size_t> order) {
  RocCurve roc;
  for (int y : labels) (y == 1 ? roc.positives : roc.negatives) += 1;
  if (roc.positives == 0 || roc.negatives == 0)
    throw MetricError("ROC/AUC need both classes; got " + std::to_string(roc.positives) + " positives and " +
                      std::to_string(roc.negatives) + " negatives");

  // Walking scores from high to low, the threshold equal to a distinct score
  // counts everything strictly above it.
  std::uint64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    roc.thresholds.push_back(s);
    roc.true_positives.push_back(tp);
    roc.false_positives.push_back(fp);
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
  }
  roc.thresholds.push_back(-std::numeric_limits<double>::infinity());
  roc.true_positives.push_back(tp);
  roc.false_positives.push_back(fp);
  const double P = static_cast<double>(roc.positives), N = static_cast<double>(roc.negatives);
  for (std::size_t k = 0; k < roc.thresholds.size(); ++k) {
    roc.tpr.push_back(static_cast<double>(roc.true_positives[k]) / P);
    roc.fpr.push_back(static_cast<double>(roc.false_positives[k]) / N);
  }
  return roc;
}

std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

RocCurve roc_curve(std::span<const ScoreEntry> scores) {
  std::vector<int> labels;
  std::vector<double> values;
  labels.reserve(scores.size());
  values.reserve(scores.size());
  for (const auto& e : scores) {
    if (e.label != 0 && e.label != 1) throw MetricError("sample '" + e.id + "': label must be 0 or 1");
    if (!std::isfinite(e.score)) throw MetricError("sample '" + e.id + "': non-finite score");
    labels.push_back(e.label);
    values.push_back(e.score);
  }
  const auto order = descending_order(values);
  return roc_from_sorted(labels, values, order);
}

AucFraction auc_fraction(const RocCurve& roc) {
  // Trapezoid between consecutive points, in units of 1/(2|P||N|):
  // Δfp * (tp_prev + tp_next).
  std::uint64_t num = 0;
  for (std::size_t k = 1; k < roc.true_positives.size(); ++k) {
    const std::uint64_t dfp = roc.false_positives[k] - roc.false_positives[k - 1];
    num += dfp * (roc.true_positives[k - 1] + roc.true_positives[k]);
  }
  return {num, 2 * roc.positives * roc.negatives};
}

AucFraction auc_fraction(std::span<const ScoreEntry> scores) { return auc_fraction(roc_curve(scores)); }

double auc(std::span<const ScoreEntry> scores) { return auc_fraction(scores).value(); }

double auc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw MetricError("auc: labels and scores differ in length");
  for (int y : labels)
    if (y != 0 && y != 1) throw MetricError("auc: labels must be 0 or 1");
  const auto order = descending_order(scores);
  return auc_fraction(roc_from_sorted(labels, scores, order)).value();
}

void write_scores_csv(const std::filesystem::path& path, std::span<const ScoreEntry> scores) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "id,label,score\n";
  for (const auto& e : scores) os << e.id << ',' << e.label << ',' << format_double(e.score) << '\n';
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

ScoreSet read_scores_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || trim(line) != "id,label,score")
    throw MetricError(path.string() + ": expected header 'id,label,score'");
  ScoreSet out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(trim(line), ',');
    if (fields.size() != 3) throw MetricError(path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    ScoreEntry e;
    e.id = fields[0];
    e.label = static_cast<int>(parse_u64(fields[1], "label"));
    e.score = parse_double(fields[2], "score");
    out.push_back(std::move(e));
  }
  validate_scores(out);
  return out;
}

}  // namespace sslab
