#include "sslab/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "sslab/metrics.hpp"
#include "sslab/rng.hpp"
#include "sslab/textutil.hpp"

namespace sslab {
namespace {

constexpr const char* kMetricsHeader = "epoch,train_acc,train_bce,train_auc,val_acc,val_bce,val_auc,lr";

void check_set(const LabeledImages& s, const char* name) {
  if (s.images.empty()) throw TrainingError(std::string(name) + " partition is empty");
  if (s.labels.size() != s.images.size() || s.ids.size() != s.images.size())
    throw TrainingError(std::string(name) + " partition: images, labels and ids differ in length");
}

struct Scores {
  double acc, bce, auc;
};

Scores evaluate(std::span<const double> probs, std::span<const int> labels, const LossConfig& loss) {
  ScoreSet s;
  s.reserve(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) s.push_back({"", labels[i], probs[i]});
  LossConfig bce = loss;
  bce.kind = LossKind::Bce;
  bool both = std::any_of(labels.begin(), labels.end(), [](int y) { return y == 1; }) &&
              std::any_of(labels.begin(), labels.end(), [](int y) { return y == 0; });
  return {accuracy(s), mean_loss(probs, labels, bce), both ? auc(s) : 0.5};
}

}  // namespace

void EarlyStopPolicy::validate() const {
  if (monitor != "val_auc" && monitor != "val_acc")
    throw std::invalid_argument("early stopping: monitor must be val_auc or val_acc, got '" + monitor + "'");
  if (min_epochs < 1) throw std::invalid_argument("early stopping: min_epochs must be >= 1");
  if (patience < 1) throw std::invalid_argument("early stopping: patience must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("early stopping: max_epochs must be >= 1");
}

double EpochRecord::metric(const std::string& name) const {
  if (name == "val_auc") return val_auc;
  if (name == "val_acc") return val_acc;
  throw std::invalid_argument("unknown metric '" + name + "'");
}

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  optim.validate();
  stop.validate();
  augment.validate();
  norm.validate();
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (belief_bins < 1) throw std::invalid_argument("belief_bins must be >= 1");
  if (augment.crop_size != model.input_size)
    throw std::invalid_argument("augment crop size " + std::to_string(augment.crop_size) +
                                " differs from model input size " + std::to_string(model.input_size));
  if (norm.mean.size() != model.channels)
    throw std::invalid_argument("normalization has " + std::to_string(norm.mean.size()) + " channels, model expects " +
                                std::to_string(model.channels));
}

std::vector<Image> eval_views(std::span<const Image> images, const AugmentPreset& preset,
                              const NormalizationParams& norm) {
  std::vector<Image> out(images.size());
  const auto n = static_cast<std::ptrdiff_t>(images.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = eval_transform(images[static_cast<std::size_t>(i)], preset, norm);
  return out;
}

std::vector<double> predict_views(const Model& model, std::span<const Image> views, std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(views.size());
  for (std::size_t start = 0; start < views.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, views.size() - start);
    const auto p = predict_proba(model, to_batch(views.subspan(start, len)));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<double> predict_images(const Model& model, std::span<const Image> images, const AugmentPreset& preset,
                                   const NormalizationParams& norm, std::size_t batch_size) {
  const auto views = eval_views(images, preset, norm);
  return predict_views(model, views, batch_size);
}

BeliefHistogram record_beliefs(std::span<const double> probs, std::span<const int> labels, std::size_t epoch,
                               std::size_t n_bins) {
  if (n_bins < 1) throw std::invalid_argument("record_beliefs: n_bins must be >= 1");
  BeliefHistogram h{epoch, std::vector<std::size_t>(n_bins), std::vector<std::size_t>(n_bins)};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto b = std::min(n_bins - 1, static_cast<std::size_t>(std::max(0.0, probs[i]) * static_cast<double>(n_bins)));
    (labels[i] == 1 ? h.class1 : h.class0)[b] += 1;
  }
  return h;
}

TrainResult train(const TrainConfig& cfg, const LabeledImages& train_set, const LabeledImages& val_set,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  check_set(train_set, "train");
  check_set(val_set, "val");

  Model model = build_model(cfg.model);
  Sgd opt(cfg.optim);
  const auto train_views = eval_views(train_set.images, cfg.augment, cfg.norm);
  const auto val_views = eval_views(val_set.images, cfg.augment, cfg.norm);

  TrainResult result;
  result.best = model;
  bool have_best = false;
  std::size_t since_best = 0;
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::vector<Image> batch_images;
  std::vector<int> batch_labels;

  for (std::size_t epoch = 1; epoch <= cfg.stop.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = Rng::substream(cfg.seed, {0x7368756666ULL, epoch});
    shuffle_rng.shuffle(order);
    const double lr = lr_at(cfg.optim, epoch - 1);

    for (std::size_t start = 0, b = 0; start < n; start += cfg.batch_size, ++b) {
      const std::size_t len = std::min(cfg.batch_size, n - start);
      batch_images.assign(len, Image{});
      batch_labels.resize(len);
      const auto L = static_cast<std::ptrdiff_t>(len);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t k = 0; k < L; ++k) {
        const std::size_t idx = order[start + static_cast<std::size_t>(k)];
        batch_images[static_cast<std::size_t>(k)] = augment(train_set.images[idx], cfg.augment, cfg.norm, cfg.seed, epoch, idx);
      }
      for (std::size_t k = 0; k < len; ++k) batch_labels[k] = train_set.labels[order[start + k]];

      Tape tape;
      Rng dropout_rng = Rng::substream(cfg.seed, {0x64726f70ULL, epoch, b});
      const Tensor probs = model.forward(tape, to_batch(batch_images), Mode::Train, &dropout_rng);
      const Tensor loss = batch_loss(tape, probs, batch_labels, cfg.loss);
      if (!std::isfinite(loss.item()))
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b + 1));
      const auto grads = tape.backpropagate(loss);
      opt.step(model.params(), grads, epoch - 1);
      for (const auto& [name, t] : model.params())
        if (!t.all_finite())
          throw TrainingError("non-finite parameter '" + name + "' after epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b + 1));
    }

    const auto train_probs = predict_views(model, train_views);
    const auto val_probs = predict_views(model, val_views);
    const Scores tr = evaluate(train_probs, train_set.labels, cfg.loss);
    const Scores va = evaluate(val_probs, val_set.labels, cfg.loss);
    const EpochRecord rec{epoch, tr.acc, tr.bce, tr.auc, va.acc, va.bce, va.auc, lr};
    result.records.push_back(rec);
    if (cfg.belief_every > 0 && epoch % cfg.belief_every == 0)
      result.beliefs.push_back(record_beliefs(val_probs, val_set.labels, epoch, cfg.belief_bins));

    const double m = rec.metric(cfg.stop.monitor);
    const bool improved = !have_best || m > result.best_metric;
    if (improved) {
      result.best = model;
      result.best_epoch = epoch;
      result.best_metric = m;
      have_best = true;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (on_epoch) on_epoch(rec, improved);
    if (epoch >= cfg.stop.min_epochs && since_best >= cfg.stop.patience) break;
  }
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochRecord> records) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << kMetricsHeader << '\n';
  for (const auto& r : records)
    os << r.epoch << ',' << format_double(r.train_acc) << ',' << format_double(r.train_bce) << ','
       << format_double(r.train_auc) << ',' << format_double(r.val_acc) << ',' << format_double(r.val_bce) << ','
       << format_double(r.val_auc) << ',' << format_double(r.lr) << '\n';
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

std::vector<EpochRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  if (!std::getline(is, line) || trim(line) != kMetricsHeader)
    throw std::runtime_error(path.string() + ": expected header '" + kMetricsHeader + "'");
  std::vector<EpochRecord> out;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(trim(line), ',');
    if (f.size() != 8) throw std::runtime_error(path.string() + ": expected 8 fields");
    EpochRecord r;
    r.epoch = static_cast<std::size_t>(parse_u64(f[0], "epoch"));
    double* fields[] = {&r.train_acc, &r.train_bce, &r.train_auc, &r.val_acc, &r.val_bce, &r.val_auc, &r.lr};
    for (std::size_t k = 0; k < 7; ++k) *fields[k] = parse_double(f[k + 1], "metric");
    out.push_back(r);
  }
  return out;
}

void write_beliefs_csv(const std::filesystem::path& path, const BeliefHistogram& h) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "bin_lo,bin_hi,class0,class1\n";
  const double n = static_cast<double>(h.class0.size());
  for (std::size_t b = 0; b < h.class0.size(); ++b)
    os << format_double(static_cast<double>(b) / n) << ',' << format_double(static_cast<double>(b + 1) / n) << ','
       << h.class0[b] << ',' << h.class1[b] << '\n';
}

std::vector<ProbeRow> bce_increase_probe(double r, std::span<const double> confidences, std::size_t n) {
  if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("bce_increase_probe: error rate must be in [0,1]");
  if (n == 0) throw std::invalid_argument("bce_increase_probe: need at least one sample");
  const auto wrong = static_cast<std::size_t>(std::llround(r * static_cast<double>(n)));
  const LossConfig bce;
  std::vector<ProbeRow> rows;
  for (double c : confidences) {
    if (!(c >= 0.0 && c <= 1.0)) throw std::invalid_argument("bce_increase_probe: confidence must be in [0,1]");
    double sb = 0.0, sc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const int y = static_cast<int>(i % 2);  // balanced labels
      const double on_truth = i < wrong ? 1.0 - c : c;
      const double p = y == 1 ? on_truth : 1.0 - on_truth;
      sb += bce_loss(p, y, bce);
      sc += balanced_loss(p, y);
    }
    rows.push_back({c, sb / static_cast<double>(n), sc / static_cast<double>(n)});
  }
  return rows;
}

}  // namespace sslab
