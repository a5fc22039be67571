#include "sslab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "sslab/rng.hpp"
#include "sslab/textutil.hpp"

namespace sslab {
namespace {

const std::set<std::string>& known_flags() {
  static const std::set<std::string> flags{"illumination", "field_definition", "artifacts", "validity",
                                           "compositeness"};
  return flags;
}

const char* kManifestHeader = "patient_id,eye,sex,image_path,partition,quality_flags";

// Largest-remainder apportionment of `total` by `weights`; equal remainders
// go to the lower index.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<double>& weights) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<std::size_t> out(weights.size());
  std::vector<double> rem(weights.size());
  std::size_t used = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double exact = static_cast<double>(total) * weights[k] / sum;
    out[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    rem[k] = exact - static_cast<double>(out[k]);
    used += out[k];
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b] + 1e-9; });
  for (std::size_t i = 0; used < total; ++i, ++used) out[order[i % order.size()]] += 1;
  return out;
}

std::string sex_name(Sex s) { return s == Sex::F ? "F" : "M"; }

Sex parse_sex(const std::string& s) {
  if (s == "F") return Sex::F;
  if (s == "M") return Sex::M;
  throw DataError("sex must be F or M, got '" + s + "'");
}

}  // namespace

std::string partition_name(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Val: return "val";
    case Partition::Test: return "test";
    case Partition::Unassigned: return "unassigned";
  }
  return "unassigned";
}

Partition parse_partition(const std::string& name) {
  if (name == "train") return Partition::Train;
  if (name == "val") return Partition::Val;
  if (name == "test") return Partition::Test;
  if (name == "unassigned" || name.empty()) return Partition::Unassigned;
  throw DataError("unknown partition '" + name + "'");
}

void validate_manifest(const Manifest& m) {
  std::set<std::pair<std::string, char>> seen;
  std::map<std::string, std::pair<Sex, Partition>> patients;
  for (const auto& e : m) {
    if (e.patient_id.empty()) throw DataError("manifest: empty patient_id");
    if (e.eye != 'L' && e.eye != 'R') throw DataError("manifest: patient " + e.patient_id + ": eye must be L or R");
    if (!seen.insert({e.patient_id, e.eye}).second)
      throw DataError("manifest: duplicate entry for " + e.sample_id());
    for (const auto& f : e.quality_flags)
      if (!known_flags().contains(f)) throw DataError("manifest: " + e.sample_id() + ": unknown quality flag '" + f + "'");
    auto [it, inserted] = patients.try_emplace(e.patient_id, e.sex, e.partition);
    if (!inserted && it->second.first != e.sex) throw DataError("manifest: patient " + e.patient_id + " has two sexes");
    if (!inserted && it->second.second != e.partition)
      throw DataError("manifest: patient " + e.patient_id + " straddles partitions");
  }
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  validate_manifest(m);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << kManifestHeader << '\n';
  for (const auto& e : m) {
    std::string flags;
    for (std::size_t i = 0; i < e.quality_flags.size(); ++i) flags += (i ? ";" : "") + e.quality_flags[i];
    os << e.patient_id << ',' << e.eye << ',' << sex_name(e.sex) << ',' << e.image_path << ','
       << partition_name(e.partition) << ',' << flags << '\n';
  }
  if (!os) throw DataError("failed writing " + path.string());
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read manifest " + path.string());
  std::string line;
  if (!std::getline(is, line) || trim(line) != kManifestHeader)
    throw DataError(path.string() + ": expected header '" + kManifestHeader + "'");
  Manifest m;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t(trim(line));
    if (t.empty()) continue;
    const auto f = split(t, ',');
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    if (f.size() != 6) throw DataError(where + "expected 6 fields, got " + std::to_string(f.size()));
    ManifestEntry e;
    e.patient_id = f[0];
    if (f[1].size() != 1) throw DataError(where + "eye must be L or R");
    e.eye = f[1][0];
    try {
      e.sex = parse_sex(f[2]);
      e.partition = parse_partition(f[4]);
    } catch (const DataError& err) {
      throw DataError(where + err.what());
    }
    e.image_path = f[3];
    if (!f[5].empty()) e.quality_flags = split(f[5], ';');
    m.push_back(std::move(e));
  }
  validate_manifest(m);
  return m;
}

Manifest select_partition(const Manifest& m, Partition p) {
  Manifest out;
  std::copy_if(m.begin(), m.end(), std::back_inserter(out), [p](const ManifestEntry& e) { return e.partition == p; });
  return out;
}

void PartitionSpec::validate() const {
  if (train < 0 || val < 0 || test < 0) throw DataError("partition proportions must be >= 0");
  if (std::abs(train + val + test - 1.0) > 1e-12) throw DataError("partition proportions must sum to 1");
}

std::array<std::size_t, 3> partition_sizes(std::size_t n, const PartitionSpec& spec) {
  spec.validate();
  const std::vector<double> w{spec.train, spec.val, spec.test};
  const auto sizes = apportion(n, w);
  for (std::size_t k = 0; k < 3; ++k)
    if (w[k] > 0.0 && sizes[k] == 0)
      throw DataError("partition proportions infeasible for " + std::to_string(n) + " patients: " +
                      partition_name(static_cast<Partition>(k)) + " would be empty");
  return {sizes[0], sizes[1], sizes[2]};
}

Manifest split_patients(const Manifest& m, const PartitionSpec& spec) {
  validate_manifest(m);
  std::map<std::string, Sex> sex_of;
  for (const auto& e : m) {
    if (e.partition != Partition::Unassigned)
      throw DataError("split_patients: manifest already partitioned (" + e.sample_id() + ")");
    sex_of.emplace(e.patient_id, e.sex);
  }
  std::array<std::vector<std::string>, 2> by_sex;
  for (const auto& [id, sex] : sex_of) by_sex[static_cast<int>(sex)].push_back(id);
  if (by_sex[0].empty() || by_sex[1].empty()) throw DataError("split_patients: need at least one patient of each sex");

  const auto sizes = partition_sizes(sex_of.size(), spec);
  const std::vector<double> shares(sizes.begin(), sizes.end());
  const auto females = apportion(by_sex[0].size(), shares);

  std::map<std::string, Partition> assigned;
  for (int s = 0; s < 2; ++s) {
    auto ids = by_sex[s];
    Rng rng = Rng::substream(spec.seed, {0x73706c6974ULL, static_cast<std::uint64_t>(s)});
    rng.shuffle(ids);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < 3; ++k) {
      const std::size_t take = s == 0 ? females[k] : sizes[k] - females[k];
      for (std::size_t i = 0; i < take; ++i) assigned[ids[pos++]] = static_cast<Partition>(k);
    }
  }
  Manifest out = m;
  for (auto& e : out) e.partition = assigned.at(e.patient_id);
  return out;
}

std::string DatasetStats::to_csv() const {
  static const char* rows[] = {"images", "female_images", "male_images", "patients", "female_patients", "male_patients"};
  std::ostringstream os;
  os << "row,train,val,test,unassigned,total\n";
  for (std::size_t r = 0; r < 6; ++r) {
    os << rows[r];
    for (std::size_t c = 0; c < 5; ++c) os << ',' << counts[r][c];
    os << '\n';
  }
  return os.str();
}

DatasetStats dataset_stats(const Manifest& m) {
  DatasetStats st;
  std::set<std::string> seen;
  for (const auto& e : m) {
    const auto p = static_cast<std::size_t>(e.partition);
    const std::size_t sx = e.sex == Sex::F ? 1 : 2;
    for (std::size_t col : {p, std::size_t{4}}) {
      st.counts[0][col] += 1;
      st.counts[sx][col] += 1;
    }
    if (seen.insert(e.patient_id).second)
      for (std::size_t col : {p, std::size_t{4}}) {
        st.counts[3][col] += 1;
        st.counts[3 + sx][col] += 1;
      }
  }
  return st;
}

void SyntheticSpec::validate() const {
  if (n_patients < 2) throw DataError("synthetic: need at least 2 patients");
  if (!(separability_delta >= 0.0)) throw DataError("synthetic: separability_delta must be >= 0");
  if (image_size < 16) throw DataError("synthetic: image_size must be >= 16");
  if (!(female_fraction > 0.0 && female_fraction < 1.0)) throw DataError("synthetic: female_fraction must be in (0,1)");
  const auto nf = static_cast<std::size_t>(std::llround(static_cast<double>(n_patients) * female_fraction));
  if (nf == 0 || nf == n_patients) throw DataError("synthetic: need at least one patient of each sex");
  if (texture != 0 && texture != 1) throw DataError("synthetic: texture must be 0 or 1");
  if (!(signal_gain > 0.0)) throw DataError("synthetic: signal_gain must be > 0");
}

Image render_fundus(const SyntheticSpec& spec, double statistic, char eye, std::uint64_t stream_seed) {
  Rng rng(stream_seed);
  const std::size_t S = spec.image_size;
  const double scale = static_cast<double>(S) / 128.0;
  const double c = (static_cast<double>(S) - 1) / 2.0, R = 0.45 * static_cast<double>(S);
  const double base = 0.62 * rng.uniform(0.95, 1.05);
  const double k = std::clamp(0.45 + spec.signal_gain * statistic, 0.02, 0.98);
  const double disc_x = eye == 'L' ? c - 0.5 * R : c + 0.5 * R, disc_y = c + rng.uniform(-0.05, 0.05) * R;
  const double disc_sigma = 0.07 * static_cast<double>(S);

  const bool shifted = spec.texture == 1;
  const int strokes = shifted ? 11 : 7;
  const double width = (shifted ? 1.6 : 0.9) * scale, turn = shifted ? 0.45 : 0.15, depth = shifted ? 0.35 : 0.25;
  const double noise = shifted ? 0.03 : 0.01;

  std::vector<double> dark(S * S, 0.0);
  const auto reach = static_cast<long>(std::ceil(3 * width));
  for (int v = 0; v < strokes; ++v) {
    double x = disc_x, y = disc_y, heading = rng.uniform(0.0, 2 * std::numbers::pi);
    const double step = scale;
    const int steps = static_cast<int>(1.2 * R / step);
    for (int t = 0; t < steps; ++t) {
      heading += rng.normal(0.0, turn);
      x += step * std::cos(heading);
      y += step * std::sin(heading);
      if (std::hypot(x - c, y - c) > R) break;
      const long cx = std::lround(x), cy = std::lround(y);
      for (long yy = cy - reach; yy <= cy + reach; ++yy)
        for (long xx = cx - reach; xx <= cx + reach; ++xx) {
          if (yy < 0 || xx < 0 || yy >= static_cast<long>(S) || xx >= static_cast<long>(S)) continue;
          const double d2 = (xx - x) * (xx - x) + (yy - y) * (yy - y);
          double& dv = dark[static_cast<std::size_t>(yy) * S + static_cast<std::size_t>(xx)];
          dv = std::max(dv, depth * std::exp(-d2 / (2 * width * width)));
        }
    }
  }

  Image img(S, S, 3, 0.0);
  for (std::size_t y = 0; y < S; ++y)
    for (std::size_t x = 0; x < S; ++x) {
      const double dy = static_cast<double>(y) - c, dx = static_cast<double>(x) - c;
      const double r = std::hypot(dx, dy);
      double v = 0.0;
      if (r <= R) {
        v = base * (1.0 - k * (r / R) * (r / R));
        const double ddx = static_cast<double>(x) - disc_x, ddy = static_cast<double>(y) - disc_y;
        v += 0.3 * std::exp(-(ddx * ddx + ddy * ddy) / (2 * disc_sigma * disc_sigma));
        v *= 1.0 - dark[y * S + x];
        v += rng.normal(0.0, noise);
      }
      v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
      for (std::size_t ch = 0; ch < 3; ++ch) img.at(ch, y, x) = v;
    }
  return img;
}

namespace {

SyntheticDataset synth_impl(const SyntheticSpec& spec, std::vector<Image>* images, const std::filesystem::path* root) {
  spec.validate();
  const std::size_t n = spec.n_patients;
  const auto nf = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.female_fraction));
  std::vector<Sex> sexes(n, Sex::M);
  std::fill_n(sexes.begin(), nf, Sex::F);
  Rng order_rng = Rng::substream(spec.seed, {0x736578ULL});
  order_rng.shuffle(sexes);

  SyntheticDataset ds;
  ds.manifest.resize(2 * n);
  ds.ground_truth.resize(2 * n);
  if (images) images->assign(2 * n, Image{});
  std::string failure;
  const auto N = static_cast<std::ptrdiff_t>(n);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t pi = 0; pi < N; ++pi) {
    const auto p = static_cast<std::uint64_t>(pi);
    const std::string pid = "p" + to_hex(derive_seed(spec.seed, {0x706964ULL, p})).substr(0, 12);
    const Sex sex = sexes[static_cast<std::size_t>(pi)];
    for (int e = 0; e < 2; ++e) {
      const char eye = e == 0 ? 'L' : 'R';
      Rng stat_rng = Rng::substream(spec.seed, {0x73746174ULL, p, static_cast<std::uint64_t>(e)});
      const double s = stat_rng.normal(sex == Sex::M ? spec.separability_delta : 0.0, 1.0);
      const std::size_t idx = 2 * static_cast<std::size_t>(pi) + static_cast<std::size_t>(e);
      ManifestEntry& me = ds.manifest[idx];
      me.patient_id = pid;
      me.eye = eye;
      me.sex = sex;
      me.image_path = pid + "_" + eye + ".png";
      ds.ground_truth[idx] = {me.sample_id(), sex, s};
      Image img = render_fundus(spec, s, eye, derive_seed(spec.seed, {0x696d67ULL, p, static_cast<std::uint64_t>(e)}));
      try {
        if (root) write_png(*root / me.image_path, img);
      } catch (const std::exception& ex) {
#pragma omp critical
        failure = ex.what();
      }
      if (images) (*images)[idx] = std::move(img);
    }
  }
  if (!failure.empty()) throw DataError(failure);
  validate_manifest(ds.manifest);
  return ds;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& root) {
  std::filesystem::create_directories(root);
  auto ds = synth_impl(spec, nullptr, &root);
  write_manifest(root / "manifest.csv", ds.manifest);
  write_ground_truth(root / "ground_truth.csv", ds.ground_truth);
  return ds;
}

SyntheticDataset synthesize(const SyntheticSpec& spec, std::vector<Image>* images) {
  return synth_impl(spec, images, nullptr);
}

void write_ground_truth(const std::filesystem::path& path, const std::vector<SyntheticSample>& truth) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << "id,sex,statistic\n";
  for (const auto& t : truth) os << t.sample_id << ',' << sex_name(t.sex) << ',' << format_double(t.statistic) << '\n';
}

std::vector<SyntheticSample> read_ground_truth(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read " + path.string());
  std::string line;
  std::getline(is, line);
  if (trim(line) != "id,sex,statistic") throw DataError(path.string() + ": expected header 'id,sex,statistic'");
  std::vector<SyntheticSample> out;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 3) throw DataError(path.string() + ": expected 3 fields");
    out.push_back({f[0], parse_sex(f[1]), parse_double(f[2], "statistic")});
  }
  return out;
}

std::vector<Image> load_images(const Manifest& m, const std::filesystem::path& root, const PreprocessConfig& cfg) {
  cfg.validate();
  std::vector<Image> out(m.size());
  std::string failure;
  const auto n = static_cast<std::ptrdiff_t>(m.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& e = m[static_cast<std::size_t>(i)];
      const std::filesystem::path p = root / e.image_path;
      out[static_cast<std::size_t>(i)] = standardize(read_png(p), cfg);
    } catch (const std::exception& ex) {
#pragma omp critical
      if (failure.empty()) failure = ex.what();
    }
  }
  if (!failure.empty()) throw DataError(failure);
  return out;
}

}  // namespace sslab
