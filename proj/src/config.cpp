#include "sslab/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "sslab/rng.hpp"
#include "sslab/textutil.hpp"

namespace sslab {
namespace {

using C = ExperimentConfig;

struct Field {
  std::string key;
  std::function<std::string(const C&)> get;
  std::function<void(C&, const std::string&)> set;
};

std::size_t to_size(const std::string& v, const std::string& key) { return static_cast<std::size_t>(parse_u64(v, key)); }

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::size_t> parse_sizes(const std::string& v, const std::string& key) {
  std::vector<std::size_t> out;
  if (trim(v).empty()) return out;
  for (const auto& part : split(v, ',')) out.push_back(to_size(std::string(trim(part)), key));
  return out;
}

#define SSLAB_STR(k, m) Field{k, [](const C& c) { return c.m; }, [](C& c, const std::string& v) { c.m = v; }}
#define SSLAB_SIZE(k, m) \
  Field{k, [](const C& c) { return std::to_string(c.m); }, [](C& c, const std::string& v) { c.m = to_size(v, k); }}
#define SSLAB_U64(k, m) \
  Field{k, [](const C& c) { return std::to_string(c.m); }, [](C& c, const std::string& v) { c.m = parse_u64(v, k); }}
#define SSLAB_DBL(k, m) \
  Field{k, [](const C& c) { return format_double(c.m); }, [](C& c, const std::string& v) { c.m = parse_double(v, k); }}
#define SSLAB_BOOL(k, m)                                                  \
  Field{k, [](const C& c) { return std::string(c.m ? "true" : "false"); }, \
        [](C& c, const std::string& v) { c.m = parse_bool(v, k); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f{
      SSLAB_STR("run.name", name),
      SSLAB_STR("run.out_dir", out_dir),
      SSLAB_U64("run.seed", seed),
      SSLAB_STR("data.manifest", manifest),
      SSLAB_STR("data.root", root),
      SSLAB_STR("preprocess.preset", preprocess.preset),
      Field{"preprocess.levels", [](const C& c) { return std::to_string(c.preprocess.levels); },
            [](C& c, const std::string& v) { c.preprocess.levels = static_cast<int>(parse_u64(v, "preprocess.levels")); }},
      SSLAB_SIZE("preprocess.size", preprocess.size),
      Field{"preprocess.equalize", [](const C& c) { return equalization_name(c.preprocess.equalize); },
            [](C& c, const std::string& v) { c.preprocess.equalize = parse_equalization(v); }},
      SSLAB_DBL("preprocess.clahe_clip", preprocess.clahe_clip),
      SSLAB_SIZE("preprocess.clahe_tiles", preprocess.clahe_tiles),
      SSLAB_STR("preprocess.normalize", normalize),
      SSLAB_STR("augment.preset", augment),
      SSLAB_SIZE("model.input_size", model.input_size),
      SSLAB_SIZE("model.channels", model.channels),
      SSLAB_SIZE("model.stem_channels", model.stem_channels),
      SSLAB_SIZE("model.stem_stride", model.stem_stride),
      SSLAB_SIZE("model.kernel_size", model.kernel_size),
      SSLAB_SIZE("model.n_residual_units", model.n_residual_units),
      SSLAB_SIZE("model.hidden_layer_width", model.hidden_layer_width),
      SSLAB_DBL("model.dropout_p", model.dropout_p),
      SSLAB_SIZE("model.n_fc_layers", model.n_fc_layers),
      Field{"loss.kind", [](const C& c) { return loss_name(c.loss.kind); },
            [](C& c, const std::string& v) { c.loss.kind = parse_loss_kind(v); }},
      SSLAB_DBL("loss.w_f", loss.w_f),
      SSLAB_DBL("loss.w_m", loss.w_m),
      SSLAB_DBL("loss.clamp_eps", loss.clamp_eps),
      SSLAB_DBL("optim.lr", optim.lr0),
      SSLAB_DBL("optim.momentum", optim.momentum),
      SSLAB_DBL("optim.weight_decay", optim.weight_decay),
      SSLAB_BOOL("optim.nesterov", optim.nesterov),
      SSLAB_DBL("optim.gamma", optim.gamma),
      SSLAB_SIZE("optim.batch_size", batch_size),
      SSLAB_STR("stop.monitor", stop.monitor),
      SSLAB_SIZE("stop.min_epochs", stop.min_epochs),
      SSLAB_SIZE("stop.patience", stop.patience),
      SSLAB_SIZE("stop.max_epochs", stop.max_epochs),
      SSLAB_SIZE("bootstrap.B", bootstrap.B),
      SSLAB_DBL("bootstrap.alpha", bootstrap.alpha),
      SSLAB_DBL("bootstrap.mu_ref", bootstrap.mu_ref),
      SSLAB_U64("bootstrap.seed", bootstrap.seed),
      SSLAB_SIZE("ensemble.ell", ell),
      SSLAB_SIZE("ensemble.L", L),
      SSLAB_SIZE("ensemble.n_models", n_models),
      SSLAB_SIZE("ensemble.trials", trials),
      Field{"ensemble.sizes", [](const C& c) { return join_sizes(c.sizes); },
            [](C& c, const std::string& v) { c.sizes = parse_sizes(v, "ensemble.sizes"); }},
      SSLAB_DBL("ensemble.val_fraction", val_fraction),
      SSLAB_SIZE("beliefs.every", belief_every),
      SSLAB_SIZE("beliefs.bins", belief_bins),
  };
  return f;
}

#undef SSLAB_STR
#undef SSLAB_SIZE
#undef SSLAB_U64
#undef SSLAB_DBL
#undef SSLAB_BOOL

template <class F>
void wrap(const std::string& what, F&& f) {
  try {
    f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> k;
  for (const auto& f : fields()) k.push_back(f.key);
  return k;
}

void ExperimentConfig::validate() const {
  if (name.empty() || name.find('/') != std::string::npos)
    throw ConfigError("run.name must be a non-empty name without '/'");
  wrap("preprocess", [&] { preprocess.validate(); });
  if (normalize != "imagenet" && normalize != "identity")
    throw ConfigError("preprocess.normalize must be imagenet or identity, got '" + normalize + "'");
  wrap("augment.preset", [&] { (void)AugmentPreset::from_name(augment, model.input_size); });
  wrap("model", [&] { model.validate(); });
  wrap("loss", [&] { loss.validate(); });
  wrap("optim", [&] { optim.validate(); });
  if (batch_size < 1) throw ConfigError("optim.batch_size must be >= 1");
  wrap("stop", [&] { stop.validate(); });
  wrap("bootstrap", [&] { bootstrap.validate(); });
  wrap("ensemble", [&] { reshuffle().validate(); });
  if (ell < 1 || ell > L) throw ConfigError("ensemble.ell must be in [1, ensemble.L]");
  if (belief_bins < 1) throw ConfigError("beliefs.bins must be >= 1");
  const bool crops = augment_preset().random_crop || preprocess.preset == "wavelet_crop";
  if (crops ? preprocess.size < model.input_size : preprocess.size != model.input_size)
    throw ConfigError("preprocess.size " + std::to_string(preprocess.size) + " does not fit model.input_size " +
                      std::to_string(model.input_size));
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields()) {
    const std::string s = f.key.substr(0, f.key.find('.'));
    if (s != section) {
      if (!section.empty()) os << '\n';
      os << "# " << s << '\n';
      section = s;
    }
    os << f.key << " = " << f.get(*this) << '\n';
  }
  return os.str();
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  std::map<std::string, const Field*> index;
  for (const auto& f : fields()) index[f.key] = &f;
  ExperimentConfig c;
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string raw;
  for (std::size_t lineno = 1; std::getline(is, raw); ++lineno) {
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    wrap("line " + std::to_string(lineno) + " (" + key + ")", [&] { it->second->set(c, value); });
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void ExperimentConfig::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << serialize();
}

std::filesystem::path ExperimentConfig::image_root() const {
  if (!root.empty()) return root;
  return std::filesystem::path(manifest).parent_path();
}

NormalizationParams ExperimentConfig::normalization() const {
  return normalize == "imagenet" ? NormalizationParams::imagenet() : NormalizationParams::identity(model.channels);
}

AugmentPreset ExperimentConfig::augment_preset() const { return AugmentPreset::from_name(augment, model.input_size); }

ReshuffleConfig ExperimentConfig::reshuffle() const {
  ReshuffleConfig r;
  r.n_models = n_models;
  r.sizes = sizes;
  r.trials = trials;
  r.val_fraction = val_fraction;
  r.seed = seed;
  return r;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.model = model;
  t.model.seed = derive_seed(seed, {0x6d6f64656cULL});
  t.loss = loss;
  t.optim = optim;
  t.stop = stop;
  t.batch_size = batch_size;
  t.augment = augment_preset();
  t.norm = normalization();
  t.seed = seed;
  t.belief_bins = belief_bins;
  t.belief_every = belief_every;
  return t;
}

}  // namespace sslab
