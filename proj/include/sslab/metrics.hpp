#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sslab {

/// One scored sample: label 1 is class "M", 0 is class "F".
struct ScoreEntry {
  std::string id;
  int label = 0;
  double score = 0.0;

  friend bool operator==(const ScoreEntry&, const ScoreEntry&) = default;
};

using ScoreSet = std::vector<ScoreEntry>;

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Labels in {0,1}, scores finite and inside [0,1].
void validate_scores(std::span<const ScoreEntry> scores);

/// Fraction of samples with (score > threshold) == (label == 1). A score
/// exactly at the threshold predicts class 0.
double accuracy(std::span<const ScoreEntry> scores, double threshold = 0.5);

/// Points ordered by increasing threshold stringency reversed, i.e. by
/// nondecreasing fpr. Threshold i yields tpr = #{pos: score > θ_i} / |P| and
/// fpr likewise; the first threshold is the maximum score (giving (0,0)) and
/// the last is -inf (giving (1,1)).
struct RocCurve {
  std::vector<double> thresholds;
  std::vector<double> fpr;
  std::vector<double> tpr;
  std::vector<std::uint64_t> true_positives;
  std::vector<std::uint64_t> false_positives;
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
};

RocCurve roc_curve(std::span<const ScoreEntry> scores);

/// Trapezoidal ROC area as an exact fraction num / den with den = 2|P||N|.
/// Tied scores contribute half credit, matching linear interpolation on the
/// curve.
struct AucFraction {
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

AucFraction auc_fraction(const RocCurve& roc);
AucFraction auc_fraction(std::span<const ScoreEntry> scores);
double auc(std::span<const ScoreEntry> scores);

/// Same quantity from parallel label/score arrays; avoids building entries.
double auc(std::span<const int> labels, std::span<const double> scores);

/// Score interchange file: header `id,label,score`, one row per sample.
void write_scores_csv(const std::filesystem::path& path, std::span<const ScoreEntry> scores);
ScoreSet read_scores_csv(const std::filesystem::path& path);

}  // namespace sslab
