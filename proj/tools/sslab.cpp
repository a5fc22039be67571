#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "sslab/config.hpp"
#include "sslab/data.hpp"
#include "sslab/ensemble.hpp"
#include "sslab/metrics.hpp"
#include "sslab/plots.hpp"
#include "sslab/stats.hpp"
#include "sslab/textutil.hpp"
#include "sslab/train.hpp"

namespace fs = std::filesystem;
using namespace sslab;

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

bool non_empty_dir(const fs::path& p) { return fs::exists(p) && (!fs::is_directory(p) || !fs::is_empty(p)); }

// Output directory that only appears under its final name once complete.
class StagedDir {
 public:
  StagedDir(fs::path final_dir, bool force) : final_(std::move(final_dir)), stage_(final_.string() + ".partial") {
    if (non_empty_dir(final_) && !force)
      throw UsageError(final_.string() + " exists and is not empty; pass --force to overwrite");
    fs::remove_all(stage_);
    fs::create_directories(stage_);
  }
  ~StagedDir() {
    if (!done_) {
      std::error_code ec;
      fs::remove_all(stage_, ec);
    }
  }
  const fs::path& path() const { return stage_; }
  void commit() {
    fs::remove_all(final_);
    fs::rename(stage_, final_);
    done_ = true;
  }

 private:
  fs::path final_, stage_;
  bool done_ = false;
};

LabeledImages load_set(const Manifest& m, const fs::path& root, const PreprocessConfig& pc) {
  LabeledImages s;
  s.images = load_images(m, root, pc);
  for (const auto& e : m) {
    s.labels.push_back(e.label());
    s.ids.push_back(e.sample_id());
  }
  return s;
}

Manifest require_manifest(const ExperimentConfig& cfg) {
  if (cfg.manifest.empty()) throw ConfigError("data.manifest is not set");
  if (!fs::exists(cfg.manifest_path())) throw std::runtime_error("manifest not found: " + cfg.manifest);
  return read_manifest(cfg.manifest_path());
}

Manifest require_partition(const Manifest& m, Partition p) {
  auto sel = select_partition(m, p);
  if (sel.empty()) throw DataError("manifest has no " + partition_name(p) + " rows");
  return sel;
}

ScoreSet to_scores(const LabeledImages& s, std::span<const double> probs) {
  ScoreSet out;
  for (std::size_t i = 0; i < s.size(); ++i) out.push_back({s.ids[i], s.labels[i], probs[i]});
  return out;
}

void print_table(const std::vector<BootstrapReport>& reports, double alpha) {
  std::printf("%-16s %8s %8s %8s %10s %8s %s\n", "name", "AUC", "ci_lo", "ci_hi", "p_empir", "p_adj", "");
  for (const auto& r : significance_table(reports, alpha))
    std::printf("%-16s %8.4f %8.4f %8.4f %10s %8.4f %s\n", r.name.c_str(), r.estimate, r.ci_lo, r.ci_hi,
                r.p_empir.c_str(), r.p_adj, r.marker.c_str());
}

// ---- synth ------------------------------------------------------------------

struct SynthOpts {
  SyntheticSpec spec;
  fs::path out;
  bool force = false;
  bool split = true;
  PartitionSpec partition;
};

int cmd_synth(const SynthOpts& o) {
  if (non_empty_dir(o.out) && !o.force)
    throw UsageError(o.out.string() + " exists and is not empty; pass --force to overwrite");
  o.spec.validate();
  if (o.split) o.partition.validate();
  if (o.spec.separability_delta == 0.0)
    std::cerr << "warning: delta = 0 plants no signal; expect chance-level AUC\n";
  if (o.force) fs::remove_all(o.out);
  fs::create_directories(o.out);
  auto ds = generate_synthetic(o.spec, o.out);
  if (o.split) {
    PartitionSpec ps = o.partition;
    ps.seed = o.spec.seed;
    ds.manifest = split_patients(ds.manifest, ps);
    write_manifest(o.out / "manifest.csv", ds.manifest);
  }
  write_text(o.out / "stats.csv", dataset_stats(ds.manifest).to_csv());
  std::cout << "wrote " << ds.manifest.size() << " images for " << o.spec.n_patients << " patients to "
            << o.out.string() << "\n";
  return 0;
}

// ---- train ------------------------------------------------------------------

struct TrainOpts {
  fs::path config;
  std::vector<std::string> set;
  bool force = false;
  bool quiet = false;
};

ExperimentConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  std::string text = ss.str();
  std::set<std::string> overridden;
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    overridden.insert(std::string(trim(std::string_view(kv).substr(0, eq))));
  }
  // Drop lines for overridden keys, then append the overrides.
  std::string merged;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    const auto t = trim(line);
    const auto eq = t.find('=');
    if (!t.empty() && t.front() != '#' && eq != std::string_view::npos &&
        overridden.count(std::string(trim(t.substr(0, eq)))))
      continue;
    merged += line + "\n";
  }
  for (const auto& kv : overrides) merged += kv + "\n";
  try {
    auto cfg = ExperimentConfig::parse(merged);
    // Relative data paths in a config file resolve against its directory.
    const auto base = path.parent_path();
    if (!cfg.manifest.empty() && fs::path(cfg.manifest).is_relative() && !fs::exists(cfg.manifest))
      cfg.manifest = (base / cfg.manifest).lexically_normal().string();
    if (!cfg.root.empty() && fs::path(cfg.root).is_relative() && !fs::exists(cfg.root))
      cfg.root = (base / cfg.root).lexically_normal().string();
    return cfg;
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

int cmd_train(const TrainOpts& o) {
  const auto cfg = load_config(o.config, o.set);
  const auto manifest = require_manifest(cfg);
  const auto tr_m = require_partition(manifest, Partition::Train);
  const auto va_m = require_partition(manifest, Partition::Val);
  StagedDir dir(fs::path(cfg.out_dir) / cfg.name, o.force);

  const auto tr = load_set(tr_m, cfg.image_root(), cfg.preprocess);
  const auto va = load_set(va_m, cfg.image_root(), cfg.preprocess);
  cfg.save(dir.path() / "resolved.cfg");
  const auto tc = cfg.train_config();
  const auto res = train(tc, tr, va, [&](const EpochRecord& r, bool improved) {
    if (!o.quiet)
      std::fprintf(stderr, "epoch %4zu  lr %.3g  train bce %.4f auc %.4f  val bce %.4f acc %.4f auc %.4f%s\n", r.epoch,
                   r.lr, r.train_bce, r.train_auc, r.val_bce, r.val_acc, r.val_auc, improved ? "  *" : "");
  });

  write_metrics_csv(dir.path() / "metrics.csv", res.records);
  const auto& best = res.records[res.best_epoch - 1];
  save_checkpoint(res.best, {static_cast<std::uint32_t>(res.best_epoch), best.val_auc}, dir.path() / "best.ckpt");
  for (const auto& h : res.beliefs) {
    char name[32];
    std::snprintf(name, sizeof name, "beliefs_e%04zu.csv", h.epoch);
    write_beliefs_csv(dir.path() / name, h);
  }
  fs::create_directories(dir.path() / "plots");
  write_text(dir.path() / "plots" / "training_curves.svg", training_curves_svg(res.records, res.best_epoch, cfg.name));
  dir.commit();
  std::cout << "best epoch " << res.best_epoch << " of " << res.records.size() << ", val AUC "
            << format_double(best.val_auc) << "\n";
  return 0;
}

// ---- eval / crosstest -------------------------------------------------------

struct EvalOpts {
  fs::path run;
  fs::path checkpoint;
  std::string partition = "test";
  std::optional<std::size_t> B;
};

ExperimentConfig run_config(const fs::path& run) {
  const auto p = run / "resolved.cfg";
  if (!fs::exists(p)) throw UsageError(run.string() + " is not a run directory (no resolved.cfg)");
  return ExperimentConfig::load(p);
}

Model run_model(const fs::path& run, const fs::path& override_ckpt) {
  const auto p = override_ckpt.empty() ? run / "best.ckpt" : override_ckpt;
  if (!fs::exists(p)) throw std::runtime_error("checkpoint not found: " + p.string());
  return load_checkpoint(p).model;
}

BootstrapReport score_and_report(const std::string& name, const Model& model, const ExperimentConfig& cfg,
                                 const Manifest& m, const fs::path& root, std::size_t B, const fs::path& scores_path) {
  const auto set = load_set(m, root, cfg.preprocess);
  const auto probs = predict_images(model, set.images, cfg.augment_preset(), cfg.normalization());
  const auto scores = to_scores(set, probs);
  write_scores_csv(scores_path, scores);
  auto bc = cfg.bootstrap;
  bc.B = B;
  auto r = bootstrap_auc(scores, bc);
  r.name = name;
  return r;
}

int cmd_eval(const EvalOpts& o) {
  const auto cfg = run_config(o.run);
  const auto model = run_model(o.run, o.checkpoint);
  const auto manifest = require_manifest(cfg);
  std::vector<Partition> parts;
  if (o.partition == "all") parts = {Partition::Val, Partition::Test};
  else if (o.partition == "val" || o.partition == "test" || o.partition == "train") parts = {parse_partition(o.partition)};
  else throw UsageError("--partition must be train, val, test or all");
  const std::size_t B = o.B.value_or(cfg.bootstrap.B);
  if (B < 1) throw UsageError("--B must be >= 1");

  std::vector<BootstrapReport> reports;
  for (auto p : parts) {
    const auto name = partition_name(p);
    reports.push_back(score_and_report(name, model, cfg, require_partition(manifest, p), cfg.image_root(), B,
                                       o.run / ("scores_" + name + ".csv")));
  }
  adjust_reports(reports);
  for (const auto& r : reports) write_json(o.run / ("report_" + r.name + ".json"), report_to_json(r));
  print_table(reports, cfg.bootstrap.alpha);
  return 0;
}

struct CrossOpts {
  fs::path run;
  fs::path manifest;
  fs::path root;
  std::string tag = "external";
  std::optional<std::size_t> B;
};

int cmd_crosstest(const CrossOpts& o) {
  const auto cfg = run_config(o.run);
  const auto model = run_model(o.run, {});
  if (!fs::exists(o.manifest)) throw std::runtime_error("manifest not found: " + o.manifest.string());
  const auto ext = read_manifest(o.manifest);
  if (ext.empty()) throw DataError("external manifest is empty");
  std::set<std::string> own;
  for (const auto& e : require_manifest(cfg)) own.insert(e.sample_id());
  for (const auto& e : ext)
    if (own.count(e.sample_id())) throw DataError("sample id '" + e.sample_id() + "' appears in both manifests");

  const std::size_t B = o.B.value_or(cfg.bootstrap.B);
  const fs::path root = o.root.empty() ? o.manifest.parent_path() : o.root;
  std::vector<BootstrapReport> reports{
      score_and_report("cross_" + o.tag, model, cfg, ext, root, B, o.run / ("scores_cross_" + o.tag + ".csv"))};
  adjust_reports(reports);
  write_json(o.run / ("report_cross_" + o.tag + ".json"), report_to_json(reports[0]));
  print_table(reports, cfg.bootstrap.alpha);
  return 0;
}

// ---- ensemble ---------------------------------------------------------------

struct EnsembleOpts {
  std::vector<fs::path> runs;
  std::size_t ell = 0;
  std::size_t L = 0;
  std::string partition = "test";
  fs::path out;
  std::optional<std::size_t> B;
  bool force = false;
};

std::string data_signature(const ExperimentConfig& c) {
  std::string s;
  std::istringstream is(c.serialize());
  for (std::string line; std::getline(is, line);)
    if (line.rfind("data.", 0) == 0 || line.rfind("preprocess.", 0) == 0) s += line + "\n";
  return s;
}

int cmd_ensemble(const EnsembleOpts& o) {
  if (o.runs.empty()) throw UsageError("no member runs given");
  const std::size_t L = o.L ? o.L : o.runs.size();
  if (o.runs.size() < L)
    throw UsageError("ensemble needs L = " + std::to_string(L) + " member runs, got " + std::to_string(o.runs.size()));
  if (o.runs.size() > L)
    throw UsageError("got " + std::to_string(o.runs.size()) + " member runs for L = " + std::to_string(L));
  const std::size_t ell = o.ell ? o.ell : L;

  std::vector<ExperimentConfig> cfgs;
  EnsembleSpec spec;
  spec.ell = ell;
  spec.L = L;
  for (const auto& r : o.runs) {
    cfgs.push_back(run_config(r));
    if (data_signature(cfgs.back()) != data_signature(cfgs.front()))
      throw UsageError(r.string() + " was trained on different data or preprocessing than " + o.runs[0].string());
    const auto ck = r / "best.ckpt";
    if (!fs::exists(ck)) throw std::runtime_error("checkpoint not found: " + ck.string());
    spec.members.push_back({r.filename().string(), load_checkpoint(ck).metadata.val_auc});
  }
  try {
    spec.validate();
  } catch (const EnsembleError& e) {
    throw UsageError(e.what());
  }

  const auto& cfg = cfgs.front();
  const auto part = parse_partition(o.partition);
  const auto set = load_set(require_partition(require_manifest(cfg), part), cfg.image_root(), cfg.preprocess);
  std::vector<std::vector<double>> probs;
  for (std::size_t i = 0; i < L; ++i) {
    const auto model = load_checkpoint(o.runs[i] / "best.ckpt").model;
    probs.push_back(predict_images(model, set.images, cfgs[i].augment_preset(), cfgs[i].normalization()));
  }
  const auto ens = ensemble_predict(spec, probs);

  StagedDir dir(o.out, o.force);
  auto bc = cfg.bootstrap;
  bc.B = o.B.value_or(cfg.bootstrap.B);
  std::vector<BootstrapReport> reports;
  for (std::size_t i = 0; i <= L; ++i) {
    const auto scores = to_scores(set, i < L ? probs[i] : ens);
    auto r = bootstrap_auc(scores, bc);
    r.name = i < L ? spec.members[i].id : "E*";
    if (i == L) write_scores_csv(dir.path() / ("scores_" + o.partition + ".csv"), scores);
    reports.push_back(r);
  }
  adjust_reports(reports);

  const auto selected = spec.selected();
  std::ofstream os(dir.path() / "members.csv");
  os << "name,val_auc,selected,auc,ci_lo,ci_hi,p_empir,p_adj,marker\n";
  const auto rows = significance_table(reports, bc.alpha);
  nlohmann::json j = nlohmann::json::array();
  for (std::size_t i = 0; i <= L; ++i) {
    const bool sel = i < L && std::find(selected.begin(), selected.end(), i) != selected.end();
    os << rows[i].name << ',' << (i < L ? format_double(spec.members[i].val_auc) : "") << ','
       << (i < L ? (sel ? "1" : "0") : "") << ',' << format_double(rows[i].estimate) << ','
       << format_double(rows[i].ci_lo) << ',' << format_double(rows[i].ci_hi) << ',' << rows[i].p_empir << ','
       << format_double(rows[i].p_adj) << ',' << rows[i].marker << '\n';
    j.push_back(report_to_json(reports[i]));
  }
  os.close();
  write_json(dir.path() / "report_ensemble.json", {{"ell", ell}, {"L", L}, {"partition", o.partition}, {"rows", j}});
  dir.commit();
  print_table(reports, bc.alpha);
  return 0;
}

// ---- reshuffle --------------------------------------------------------------

int cmd_reshuffle(const TrainOpts& o) {
  const auto cfg = load_config(o.config, o.set);
  const auto manifest = require_manifest(cfg);
  Manifest dev_m = require_partition(manifest, Partition::Train);
  const auto va_m = require_partition(manifest, Partition::Val);
  dev_m.insert(dev_m.end(), va_m.begin(), va_m.end());
  const auto te_m = require_partition(manifest, Partition::Test);
  StagedDir dir(fs::path(cfg.out_dir) / cfg.name, o.force);

  const auto dev = load_set(dev_m, cfg.image_root(), cfg.preprocess);
  const auto test = load_set(te_m, cfg.image_root(), cfg.preprocess);
  std::vector<std::string> groups;
  for (const auto& e : dev_m) groups.push_back(e.patient_id);
  cfg.save(dir.path() / "resolved.cfg");
  const auto rc = cfg.reshuffle();
  const auto members = train_reshuffled_members(cfg.train_config(), dev, groups, test, rc);
  const auto sweep = ensemble_size_sweep(members, test.labels, dev.labels, rc);

  std::ofstream ms(dir.path() / "members.csv");
  ms << "id,val_auc,val_acc,best_epoch,test_auc\n";
  for (const auto& m : members)
    ms << m.id << ',' << format_double(m.val_auc) << ',' << format_double(m.val_acc) << ',' << m.best_epoch << ','
       << format_double(auc(test.labels, m.test_probs)) << '\n';
  ms.close();
  write_sweep_csv(dir.path() / "sweep.csv", sweep.trials);
  std::ofstream ps(dir.path() / "sweep_points.csv");
  ps << "size,mean_test_auc,ci_lo,ci_hi\n";
  for (const auto& p : sweep.points)
    ps << p.size << ',' << format_double(p.mean) << ',' << format_double(p.ci_lo) << ',' << format_double(p.ci_hi)
       << '\n';
  ps.close();
  try {
    write_fits_csv(dir.path() / "fits.csv", predictor_study(sweep.trials));
  } catch (const EnsembleError& e) {
    std::cerr << "warning: predictor study skipped: " << e.what() << "\n";
  }
  fs::create_directories(dir.path() / "plots");
  write_text(dir.path() / "plots" / "sweep.svg", sweep_svg(sweep.points, cfg.name));
  std::vector<ScatterPoint> pts;
  for (const auto& t : sweep.trials)
    pts.push_back({std::to_string(t.size) + "/" + std::to_string(t.trial), t.mean_val_auc, t.test_auc, t.size});
  write_text(dir.path() / "plots" / "val_test.svg", scatter_svg(pts, "mean member val AUC", "ensemble test AUC", cfg.name));
  dir.commit();
  for (const auto& p : sweep.points)
    std::printf("size %3zu  mean test AUC %.4f  [%.4f, %.4f]\n", p.size, p.mean, p.ci_lo, p.ci_hi);
  return 0;
}

// ---- report -----------------------------------------------------------------

struct ReportOpts {
  std::vector<fs::path> runs;
  fs::path out = "report";
};

int cmd_report(const ReportOpts& o) {
  if (o.runs.empty()) throw UsageError("no run directories given");
  fs::create_directories(o.out);
  std::vector<ScatterPoint> pts;
  std::vector<BootstrapReport> tests;
  std::size_t produced = 0;
  std::ofstream summary;
  for (const auto& run : o.runs) {
    const auto name = run.filename().string();
    if (fs::exists(run / "metrics.csv")) {
      const auto recs = read_metrics_csv(run / "metrics.csv");
      std::size_t best = 0;
      if (fs::exists(run / "best.ckpt")) best = load_checkpoint(run / "best.ckpt").metadata.epoch;
      fs::create_directories(run / "plots");
      write_text(run / "plots" / "training_curves.svg", training_curves_svg(recs, best, name));
      ++produced;
    }
    const auto val_p = run / "report_val.json", test_p = run / "report_test.json";
    if (fs::exists(val_p) && fs::exists(test_p)) {
      auto read = [](const fs::path& p) {
        std::ifstream is(p);
        return report_from_json(nlohmann::json::parse(is));
      };
      const auto v = read(val_p);
      auto t = read(test_p);
      pts.push_back({name, v.estimate, t.estimate, t.n});
      t.name = name;
      t.p_adj.reset();
      tests.push_back(t);
    }
  }
  if (!tests.empty()) {
    write_text(o.out / "val_test.svg", scatter_svg(pts, "validation AUC", "test AUC", "validation vs test"));
    adjust_reports(tests);
    std::ofstream os(o.out / "summary.csv");
    os << "name,val_auc,test_auc,ci_lo,ci_hi,p_empir,p_adj,marker,n\n";
    const auto rows = significance_table(tests, tests.front().alpha);
    for (std::size_t i = 0; i < rows.size(); ++i)
      os << rows[i].name << ',' << format_double(pts[i].x) << ',' << format_double(rows[i].estimate) << ','
         << format_double(rows[i].ci_lo) << ',' << format_double(rows[i].ci_hi) << ',' << rows[i].p_empir << ','
         << format_double(rows[i].p_adj) << ',' << rows[i].marker << ',' << tests[i].n << '\n';
    print_table(tests, tests.front().alpha);
    ++produced;
  }
  if (produced == 0) throw UsageError("no metrics.csv or report_{val,test}.json found in the given runs");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sslab: sex-from-fundus classification experiments"};
  app.require_subcommand(1);

  SynthOpts so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic fundus dataset");
  synth->add_option("--patients", so.spec.n_patients, "Number of patients (two eyes each)");
  synth->add_option("--delta", so.spec.separability_delta, "Class separation of the planted statistic");
  synth->add_option("--seed", so.spec.seed);
  synth->add_option("--size", so.spec.image_size, "Image side in pixels");
  synth->add_option("--female-fraction", so.spec.female_fraction);
  synth->add_option("--texture", so.spec.texture, "0: default domain, 1: shifted domain");
  synth->add_option("--gain", so.spec.signal_gain, "Radial falloff change per unit of the statistic");
  synth->add_option("--train", so.partition.train);
  synth->add_option("--val", so.partition.val);
  synth->add_option("--test", so.partition.test);
  synth->add_flag("!--no-split", so.split, "Leave every patient unassigned");
  synth->add_option("--out", so.out)->required();
  synth->add_flag("--force", so.force);

  TrainOpts to;
  auto* trn = app.add_subcommand("train", "Train a model from a config file");
  trn->add_option("config", to.config)->required();
  trn->add_option("--set", to.set, "Override a config key (key=value)");
  trn->add_flag("--force", to.force);
  trn->add_flag("--quiet", to.quiet);

  EvalOpts eo;
  auto* ev = app.add_subcommand("eval", "Score a partition with bootstrap statistics");
  ev->add_option("run", eo.run)->required();
  ev->add_option("--checkpoint", eo.checkpoint);
  ev->add_option("--partition", eo.partition, "train, val, test or all");
  ev->add_option("--B", eo.B, "Bootstrap replicates");

  CrossOpts co;
  auto* cross = app.add_subcommand("crosstest", "Score an entire external dataset");
  cross->add_option("run", co.run)->required();
  cross->add_option("--manifest", co.manifest)->required();
  cross->add_option("--root", co.root);
  cross->add_option("--tag", co.tag);
  cross->add_option("--B", co.B);

  EnsembleOpts no;
  auto* ens = app.add_subcommand("ensemble", "Average the best ell of L trained runs");
  ens->add_option("runs", no.runs)->required();
  ens->add_option("--ell", no.ell);
  ens->add_option("--L", no.L);
  ens->add_option("--partition", no.partition);
  ens->add_option("--out", no.out)->required();
  ens->add_option("--B", no.B);
  ens->add_flag("--force", no.force);

  TrainOpts ro;
  auto* resh = app.add_subcommand("reshuffle", "Reshuffled-ensemble size sweep and predictor study");
  resh->add_option("config", ro.config)->required();
  resh->add_option("--set", ro.set);
  resh->add_flag("--force", ro.force);

  ReportOpts po;
  auto* rep = app.add_subcommand("report", "Plots and summary tables from run directories");
  rep->add_option("runs", po.runs);
  rep->add_option("--out", po.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(so);
    if (*trn) return cmd_train(to);
    if (*ev) return cmd_eval(eo);
    if (*cross) return cmd_crosstest(co);
    if (*ens) return cmd_ensemble(no);
    if (*resh) return cmd_reshuffle(ro);
    if (*rep) return cmd_report(po);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
