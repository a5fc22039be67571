#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sslab/image.hpp"
#include "sslab/preprocess.hpp"

namespace sslab {

enum class Partition { Train, Val, Test, Unassigned };

std::string partition_name(Partition p);
Partition parse_partition(const std::string& name);

/// Sex doubles as the class label: F = 0, M = 1.
enum class Sex { F = 0, M = 1 };

struct ManifestEntry {
  std::string patient_id;
  char eye = 'L';
  Sex sex = Sex::F;
  std::string image_path;
  Partition partition = Partition::Unassigned;
  /// Subset of {illumination, field_definition, artifacts, validity, compositeness}.
  std::vector<std::string> quality_flags;

  std::string sample_id() const { return patient_id + "_" + eye; }
  int label() const { return static_cast<int>(sex); }

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

using Manifest = std::vector<ManifestEntry>;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// (patient, eye) unique; eye L or R; known quality flags; each patient has a
/// single sex and a single partition.
void validate_manifest(const Manifest& m);

/// CSV with header `patient_id,eye,sex,image_path,partition,quality_flags`;
/// flags are joined with ';'.
void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

Manifest select_partition(const Manifest& m, Partition p);

struct PartitionSpec {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Patients per partition by largest remainder on n * proportion; equal
/// remainders go to train, then val, then test.
std::array<std::size_t, 3> partition_sizes(std::size_t n, const PartitionSpec& spec);

/// Patient-level split. Partition sizes come from `partition_sizes`; within
/// each partition the female count is the largest-remainder share of the
/// female total, so every partition tracks the aggregate sex ratio. Patients
/// are shuffled within sex (seeded) and sliced in train, val, test order.
Manifest split_patients(const Manifest& m, const PartitionSpec& spec);

/// Rows: images, female images, male images, patients, female patients,
/// male patients. Columns: train, val, test, unassigned, total.
struct DatasetStats {
  std::array<std::array<std::size_t, 5>, 6> counts{};

  std::size_t images(Partition p) const { return counts[0][static_cast<int>(p)]; }
  std::size_t patients(Partition p) const { return counts[3][static_cast<int>(p)]; }
  std::string to_csv() const;
};

DatasetStats dataset_stats(const Manifest& m);

struct SyntheticSpec {
  std::size_t n_patients = 200;
  /// Class-conditional mean shift of the planted statistic (unit variance).
  double separability_delta = 2.0;
  std::size_t image_size = 128;
  std::uint64_t seed = 0;
  double female_fraction = 0.5;
  /// 0: thin, smooth vessels. 1: a shifted domain with thicker, tortuous
  /// vessels and more sensor noise; the planted signal is unchanged.
  int texture = 0;
  /// Scale of the radial-falloff coefficient per unit of the statistic.
  double signal_gain = 0.1;

  void validate() const;
};

struct SyntheticSample {
  std::string sample_id;
  Sex sex;
  double statistic;
};

struct SyntheticDataset {
  Manifest manifest;
  std::vector<SyntheticSample> ground_truth;
};

/// Renders one fundus-like grey image: circular field with radial falloff
/// 1 - k (r/R)^2 where k = 0.45 + gain * statistic (clamped), an optic disc
/// blob on the nasal side (left for L, mirrored for R), random-walk vessels,
/// mild noise. Values in [0,1], three identical channels.
Image render_fundus(const SyntheticSpec& spec, double statistic, char eye, std::uint64_t stream_seed);

/// Writes `<root>/<patient_id>_<eye>.png`, `<root>/manifest.csv` and
/// `<root>/ground_truth.csv`. Patients are F for the first
/// round(n * female_fraction) draws, M otherwise, in a seeded order.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& root);

/// In-memory variant: same manifest and images, nothing written.
SyntheticDataset synthesize(const SyntheticSpec& spec, std::vector<Image>* images);

void write_ground_truth(const std::filesystem::path& path, const std::vector<SyntheticSample>& truth);
std::vector<SyntheticSample> read_ground_truth(const std::filesystem::path& path);

/// Decodes and standardises every manifest image (relative paths resolve
/// against `root`), in manifest order.
std::vector<Image> load_images(const Manifest& m, const std::filesystem::path& root, const PreprocessConfig& cfg);

}  // namespace sslab
