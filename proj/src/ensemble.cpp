#include "sslab/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "sslab/metrics.hpp"
#include "sslab/rng.hpp"
#include "sslab/stats.hpp"
#include "sslab/textutil.hpp"

namespace sslab {
namespace {

double safe_auc(std::span<const int> labels, std::span<const double> probs) {
  const auto pos = std::count(labels.begin(), labels.end(), 1);
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) return 0.5;
  return auc(labels, probs);
}

double acc_at_half(std::span<const int> labels, std::span<const double> probs) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) ok += (probs[i] >= 0.5 ? 1 : 0) == labels[i];
  return labels.empty() ? 0.0 : static_cast<double>(ok) / static_cast<double>(labels.size());
}

LabeledImages take_rows(const LabeledImages& s, std::span<const std::size_t> rows) {
  LabeledImages out;
  for (std::size_t r : rows) {
    out.images.push_back(s.images[r]);
    out.labels.push_back(s.labels[r]);
    out.ids.push_back(s.ids[r]);
  }
  return out;
}

// Splits the dev rows of one member; returns (train rows, val rows).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_rows(std::span<const std::string> groups,
                                                                          double val_fraction, std::uint64_t seed) {
  std::vector<std::string> uniq(groups.begin(), groups.end());
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
  if (uniq.size() < 2) throw EnsembleError("reshuffle: need at least two groups in the development set");
  Rng rng(seed);
  rng.shuffle(uniq);
  auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(uniq.size())));
  n_val = std::clamp<std::size_t>(n_val, 1, uniq.size() - 1);
  const std::set<std::string> val_groups(uniq.begin(), uniq.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr, va;
  for (std::size_t i = 0; i < groups.size(); ++i) (val_groups.count(groups[i]) ? va : tr).push_back(i);
  return {tr, va};
}

}  // namespace

void EnsembleSpec::validate() const {
  if (ell < 1) throw EnsembleError("ensemble: ell must be >= 1");
  if (ell > L) throw EnsembleError("ensemble: ell (" + std::to_string(ell) + ") exceeds L (" + std::to_string(L) + ")");
  if (members.size() != L)
    throw EnsembleError("ensemble: expected " + std::to_string(L) + " members, got " + std::to_string(members.size()));
  std::set<std::string> ids;
  for (const auto& m : members)
    if (!ids.insert(m.id).second) throw EnsembleError("ensemble: duplicate member id '" + m.id + "'");
}

std::vector<std::size_t> EnsembleSpec::ranking() const {
  std::vector<std::size_t> idx(members.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (members[a].val_auc != members[b].val_auc) return members[a].val_auc > members[b].val_auc;
    return members[a].id < members[b].id;
  });
  return idx;
}

std::vector<std::size_t> EnsembleSpec::selected() const {
  validate();
  auto idx = ranking();
  idx.resize(ell);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return members[a].id < members[b].id; });
  return idx;
}

std::vector<double> mean_probabilities(std::span<const std::vector<double>> member_probs) {
  if (member_probs.empty()) throw EnsembleError("ensemble: no members");
  const std::size_t n = member_probs[0].size();
  for (const auto& p : member_probs)
    if (p.size() != n) throw EnsembleError("ensemble: members scored different numbers of samples");
  std::vector<double> out(n);
  const double k = static_cast<double>(member_probs.size());
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0, lo = member_probs[0][i], hi = lo;
    for (const auto& p : member_probs) {
      s += p[i];
      lo = std::min(lo, p[i]);
      hi = std::max(hi, p[i]);
    }
    out[i] = std::clamp(s / k, lo, hi);
  }
  return out;
}

std::vector<double> ensemble_predict(const EnsembleSpec& spec, std::span<const std::vector<double>> member_probs) {
  if (member_probs.size() != spec.members.size())
    throw EnsembleError("ensemble: " + std::to_string(member_probs.size()) + " prediction vectors for " +
                        std::to_string(spec.members.size()) + " members");
  std::vector<std::vector<double>> chosen;
  for (std::size_t i : spec.selected()) chosen.push_back(member_probs[i]);
  return mean_probabilities(chosen);
}

std::vector<double> ensemble_predict(const EnsembleSpec& spec, std::span<const std::filesystem::path> checkpoints,
                                     std::span<const Image> images, const AugmentPreset& preset,
                                     const NormalizationParams& norm) {
  if (checkpoints.size() != spec.members.size())
    throw EnsembleError("ensemble: " + std::to_string(checkpoints.size()) + " checkpoints for " +
                        std::to_string(spec.members.size()) + " members");
  const auto views = eval_views(images, preset, norm);
  std::vector<std::vector<double>> chosen;
  for (std::size_t i : spec.selected()) {
    if (!std::filesystem::exists(checkpoints[i]))
      throw EnsembleError("ensemble: missing checkpoint " + checkpoints[i].string());
    chosen.push_back(predict_views(load_checkpoint(checkpoints[i]).model, views));
  }
  return mean_probabilities(chosen);
}

std::pair<LabeledImages, LabeledImages> reshuffle_split(const LabeledImages& dev, std::span<const std::string> groups,
                                                        double val_fraction, std::uint64_t seed) {
  if (groups.size() != dev.size()) throw EnsembleError("reshuffle: one group per development row required");
  const auto [tr, va] = split_rows(groups, val_fraction, seed);
  return {take_rows(dev, tr), take_rows(dev, va)};
}

void ReshuffleConfig::validate() const {
  if (n_models < 1) throw EnsembleError("reshuffle: n_models must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw EnsembleError("reshuffle: val_fraction must be in (0,1)");
  for (std::size_t s : sizes)
    if (s < 1 || s > n_models)
      throw EnsembleError("reshuffle: ensemble size " + std::to_string(s) + " outside [1, " +
                          std::to_string(n_models) + "]");
  if (trials < 1) throw EnsembleError("reshuffle: trials must be >= 1");
  if (!(ci > 0.0 && ci < 1.0)) throw EnsembleError("reshuffle: ci must be in (0,1)");
}

std::vector<ReshuffledMember> train_reshuffled_members(const TrainConfig& base, const LabeledImages& dev,
                                                       std::span<const std::string> dev_groups,
                                                       const LabeledImages& test, const ReshuffleConfig& cfg) {
  cfg.validate();
  if (dev_groups.size() != dev.size()) throw EnsembleError("reshuffle: one group per development row required");
  std::vector<ReshuffledMember> out;
  for (std::size_t j = 0; j < cfg.n_models; ++j) {
    const std::uint64_t seed = derive_seed(cfg.seed, {j});
    const auto [tr_rows, va_rows] = split_rows(dev_groups, cfg.val_fraction, derive_seed(seed, {0x73706c6974ULL}));
    TrainConfig tc = base;
    tc.seed = seed;
    tc.model.seed = derive_seed(seed, {0x696e6974ULL});
    const auto val_set = take_rows(dev, va_rows);
    const auto res = train(tc, take_rows(dev, tr_rows), val_set);
    ReshuffledMember m;
    m.id = "m" + std::to_string(j);
    m.best_epoch = res.best_epoch;
    m.val_indices = va_rows;
    m.val_probs = predict_images(res.best, val_set.images, tc.augment, tc.norm);
    m.val_auc = safe_auc(val_set.labels, m.val_probs);
    m.val_acc = acc_at_half(val_set.labels, m.val_probs);
    m.test_probs = predict_images(res.best, test.images, tc.augment, tc.norm);
    out.push_back(std::move(m));
  }
  return out;
}

SweepResult ensemble_size_sweep(std::span<const ReshuffledMember> members, std::span<const int> test_labels,
                                std::span<const int> dev_labels, const ReshuffleConfig& cfg) {
  cfg.validate();
  if (members.size() != cfg.n_models)
    throw EnsembleError("sweep: expected " + std::to_string(cfg.n_models) + " members, got " +
                        std::to_string(members.size()));
  std::vector<std::size_t> sizes = cfg.sizes;
  if (sizes.empty())
    for (std::size_t s = 1; s <= cfg.n_models; ++s) sizes.push_back(s);

  // Row position of each dev sample within every member's validation set.
  std::vector<std::vector<std::ptrdiff_t>> pos(members.size(), std::vector<std::ptrdiff_t>(dev_labels.size(), -1));
  for (std::size_t j = 0; j < members.size(); ++j)
    for (std::size_t k = 0; k < members[j].val_indices.size(); ++k) {
      const std::size_t row = members[j].val_indices[k];
      if (row >= dev_labels.size()) throw EnsembleError("sweep: validation index out of range");
      pos[j][row] = static_cast<std::ptrdiff_t>(k);
    }

  SweepResult res;
  res.trials.resize(sizes.size() * cfg.trials);
  const auto total = static_cast<std::ptrdiff_t>(res.trials.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < total; ++t) {
    const std::size_t size = sizes[static_cast<std::size_t>(t) / cfg.trials];
    const std::size_t trial = static_cast<std::size_t>(t) % cfg.trials;
    Rng rng = Rng::substream(cfg.seed, {0x7377656570ULL, size, trial});
    std::vector<std::size_t> pick(members.size());
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    for (std::size_t i = 0; i < size; ++i)
      std::swap(pick[i], pick[i + static_cast<std::size_t>(rng.below(pick.size() - i))]);
    pick.resize(size);
    std::sort(pick.begin(), pick.end());

    SweepTrial& st = res.trials[static_cast<std::size_t>(t)];
    st.size = size;
    st.trial = trial;
    st.members = pick;
    std::vector<std::vector<double>> probs;
    double lo = 1.0, hi = 0.0, sum = 0.0;
    for (std::size_t j : pick) {
      probs.push_back(members[j].test_probs);
      lo = std::min(lo, members[j].val_auc);
      hi = std::max(hi, members[j].val_auc);
      sum += members[j].val_auc;
    }
    st.test_auc = safe_auc(test_labels, mean_probabilities(probs));
    st.min_val_auc = lo;
    st.max_val_auc = hi;
    st.mean_val_auc = sum / static_cast<double>(size);

    std::vector<int> vl;
    std::vector<double> vp;
    for (std::size_t row = 0; row < dev_labels.size(); ++row) {
      double s = 0.0;
      std::size_t c = 0;
      for (std::size_t j : pick)
        if (pos[j][row] >= 0) {
          s += members[j].val_probs[static_cast<std::size_t>(pos[j][row])];
          ++c;
        }
      if (c == 0) continue;
      vl.push_back(dev_labels[row]);
      vp.push_back(s / static_cast<double>(c));
    }
    st.val_auc = safe_auc(vl, vp);
    st.val_acc = acc_at_half(vl, vp);
  }

  for (std::size_t si = 0; si < sizes.size(); ++si) {
    std::vector<double> a;
    for (std::size_t k = 0; k < cfg.trials; ++k) a.push_back(res.trials[si * cfg.trials + k].test_auc);
    SweepPoint p;
    p.size = sizes[si];
    p.mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    std::sort(a.begin(), a.end());
    p.ci_lo = quantile_sorted(a, (1.0 - cfg.ci) / 2.0);
    p.ci_hi = quantile_sorted(a, 1.0 - (1.0 - cfg.ci) / 2.0);
    res.points.push_back(p);
  }
  return res;
}

void write_sweep_csv(const std::filesystem::path& path, std::span<const SweepTrial> trials) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "size,trial,test_auc\n";
  for (const auto& t : trials) os << t.size << ',' << t.trial << ',' << format_double(t.test_auc) << '\n';
}

RegressionFit fit_linear(std::span<const std::vector<double>> xs, std::span<const double> ys,
                         std::vector<std::string> names) {
  const std::size_t p = xs.size(), n = ys.size();
  if (p == 0) throw EnsembleError("fit_linear: no predictors");
  if (names.empty())
    for (std::size_t k = 0; k < p; ++k) names.push_back("x" + std::to_string(k));
  if (names.size() != p) throw EnsembleError("fit_linear: one name per predictor required");
  for (const auto& x : xs)
    if (x.size() != n) throw EnsembleError("fit_linear: predictor and response lengths differ");
  if (n < p + 2)
    throw EnsembleError("fit_linear: need at least " + std::to_string(p + 2) + " observations, got " +
                        std::to_string(n));

  const double ybar = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(n);
  std::vector<double> xbar(p);
  std::vector<std::vector<double>> c(p, std::vector<double>(n));
  for (std::size_t k = 0; k < p; ++k) {
    xbar[k] = std::accumulate(xs[k].begin(), xs[k].end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      c[k][i] = xs[k][i] - xbar[k];
      ss += c[k][i] * c[k][i];
    }
    if (!(ss > 0.0)) throw EnsembleError("fit_linear: predictor '" + names[k] + "' has zero variance");
  }

  // Normal equations on centred data, solved by Cholesky.
  std::vector<std::vector<double>> a(p, std::vector<double>(p));
  std::vector<double> b(p);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t k = 0; k <= j; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += c[j][i] * c[k][i];
      a[j][k] = a[k][j] = s;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += c[j][i] * (ys[i] - ybar);
    b[j] = s;
  }
  std::vector<std::vector<double>> l(p, std::vector<double>(p));
  for (std::size_t j = 0; j < p; ++j) {
    double d = a[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
    if (!(d > 1e-12 * a[j][j]))
      throw EnsembleError("fit_linear: predictor '" + names[j] + "' is collinear with earlier predictors");
    l[j][j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < p; ++i) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      l[i][j] = s / l[j][j];
    }
  }
  std::vector<double> z(p), beta(p);
  for (std::size_t j = 0; j < p; ++j) {
    double s = b[j];
    for (std::size_t k = 0; k < j; ++k) s -= l[j][k] * z[k];
    z[j] = s / l[j][j];
  }
  for (std::size_t j = p; j-- > 0;) {
    double s = z[j];
    for (std::size_t k = j + 1; k < p; ++k) s -= l[k][j] * beta[k];
    beta[j] = s / l[j][j];
  }

  RegressionFit f;
  f.predictors = std::move(names);
  f.coefficients = beta;
  f.n = n;
  f.intercept = ybar;
  for (std::size_t k = 0; k < p; ++k) f.intercept -= beta[k] * xbar[k];
  double ss_res = 0.0, ss_tot = 0.0, abs_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double fitted = ybar;
    for (std::size_t k = 0; k < p; ++k) fitted += beta[k] * c[k][i];
    const double r = ys[i] - fitted;
    ss_res += r * r;
    abs_res += std::abs(r);
    ss_tot += (ys[i] - ybar) * (ys[i] - ybar);
  }
  f.r2 = ss_tot > 0.0 ? std::min(1.0, 1.0 - ss_res / ss_tot) : 0.0;
  f.adjusted_r2 = 1.0 - (1.0 - f.r2) * static_cast<double>(n - 1) / static_cast<double>(n - p - 1);
  f.mae = abs_res / static_cast<double>(n);
  return f;
}

RegressionFit fit_linear(std::span<const double> x, std::span<const double> ys) {
  const std::vector<std::vector<double>> xs{std::vector<double>(x.begin(), x.end())};
  return fit_linear(xs, ys, {"x"});
}

std::vector<std::vector<std::string>> predictor_sets() {
  return {{"AUC_val"},
          {"ACC_val"},
          {"minAUC_val"},
          {"maxAUC_val"},
          {"meanAUC_val"},
          {"minAUC_val", "maxAUC_val"},
          {"minAUC_val", "maxAUC_val", "meanAUC_val"},
          {"AUC_val", "ACC_val", "minAUC_val", "maxAUC_val"}};
}

std::vector<RegressionFit> predictor_study(std::span<const SweepTrial> trials) {
  auto column = [&](const std::string& name) {
    std::vector<double> v;
    for (const auto& t : trials) {
      if (name == "AUC_val") v.push_back(t.val_auc);
      else if (name == "ACC_val") v.push_back(t.val_acc);
      else if (name == "minAUC_val") v.push_back(t.min_val_auc);
      else if (name == "maxAUC_val") v.push_back(t.max_val_auc);
      else v.push_back(t.mean_val_auc);
    }
    return v;
  };
  std::vector<double> ys;
  for (const auto& t : trials) ys.push_back(t.test_auc);
  std::vector<RegressionFit> out;
  for (const auto& set : predictor_sets()) {
    std::vector<std::vector<double>> xs;
    for (const auto& name : set) xs.push_back(column(name));
    out.push_back(fit_linear(xs, ys, set));
  }
  return out;
}

void write_fits_csv(const std::filesystem::path& path, std::span<const RegressionFit> fits) {
  static const std::vector<std::string> cols{"AUC_val", "ACC_val", "minAUC_val", "maxAUC_val", "meanAUC_val"};
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "row";
  for (const auto& c : cols) os << ',' << c;
  os << ",intercept,r2,adjusted_r2,mae\n";
  for (std::size_t r = 0; r < fits.size(); ++r) {
    os << r;
    for (const auto& c : cols) {
      os << ',';
      const auto it = std::find(fits[r].predictors.begin(), fits[r].predictors.end(), c);
      if (it != fits[r].predictors.end())
        os << format_double(fits[r].coefficients[static_cast<std::size_t>(it - fits[r].predictors.begin())]);
    }
    os << ',' << format_double(fits[r].intercept) << ',' << format_double(fits[r].r2) << ','
       << format_double(fits[r].adjusted_r2) << ',' << format_double(fits[r].mae) << '\n';
  }
}

}  // namespace sslab
