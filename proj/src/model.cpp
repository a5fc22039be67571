#include "sslab/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "sslab/textutil.hpp"

namespace sslab {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ContractError("model config: " + msg); };
  if (input_size == 0) fail("input_size must be positive");
  if (channels == 0) fail("channels must be positive");
  if (stem_channels == 0) fail("stem_channels must be positive");
  if (stem_stride == 0) fail("stem_stride must be positive");
  if (kernel_size == 0 || kernel_size % 2 == 0) fail("kernel_size must be odd");
  if (hidden_layer_width == 0) fail("hidden_layer_width must be positive");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout_p must be in [0,1)");
  if (n_fc_layers != 2) fail("n_fc_layers must be 2");
}

std::string ModelConfig::serialize() const {
  std::ostringstream os;
  os << "input_size=" << input_size << '\n'
     << "channels=" << channels << '\n'
     << "stem_channels=" << stem_channels << '\n'
     << "stem_stride=" << stem_stride << '\n'
     << "kernel_size=" << kernel_size << '\n'
     << "n_residual_units=" << n_residual_units << '\n'
     << "hidden_layer_width=" << hidden_layer_width << '\n'
     << "dropout_p=" << format_double(dropout_p) << '\n'
     << "n_fc_layers=" << n_fc_layers << '\n'
     << "seed=" << seed << '\n';
  return os.str();
}

ModelConfig ModelConfig::parse(const std::string& text) {
  ModelConfig c;
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("model config: malformed line '" + line + "'");
    kv[std::string(trim(std::string_view(line).substr(0, eq)))] = std::string(trim(std::string_view(line).substr(eq + 1)));
  }
  auto take = [&](const char* key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("model config: missing key ") + key);
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  c.input_size = parse_u64(take("input_size"), "input_size");
  c.channels = parse_u64(take("channels"), "channels");
  c.stem_channels = parse_u64(take("stem_channels"), "stem_channels");
  c.stem_stride = parse_u64(take("stem_stride"), "stem_stride");
  c.kernel_size = parse_u64(take("kernel_size"), "kernel_size");
  c.n_residual_units = parse_u64(take("n_residual_units"), "n_residual_units");
  c.hidden_layer_width = parse_u64(take("hidden_layer_width"), "hidden_layer_width");
  c.dropout_p = parse_double(take("dropout_p"), "dropout_p");
  c.n_fc_layers = parse_u64(take("n_fc_layers"), "n_fc_layers");
  c.seed = parse_u64(take("seed"), "seed");
  if (!kv.empty()) throw FormatError("model config: unknown key " + kv.begin()->first);
  return c;
}

std::uint64_t ModelConfig::hash() const {
  Fnv1a h;
  h.update(serialize());
  return h.digest();
}

Tensor residual_forward(Tape& tape, const ResidualUnitParams& unit, const Tensor& x) {
  if (x.rank() != 4) throw ShapeError("residual unit: input must be NCHW, got " + x.shape().str());
  if (unit.w1.rank() != 4 || unit.w2.rank() != 4) throw ShapeError("residual unit: kernels must be rank 4");
  if (unit.w1.dim(0) != unit.w2.dim(1))
    throw ShapeError("residual unit: W1 output channels " + std::to_string(unit.w1.dim(0)) +
                     " differ from W2 input channels " + std::to_string(unit.w2.dim(1)));
  if (unit.w1.dim(1) != x.dim(1) || unit.w2.dim(0) != x.dim(1))
    throw ShapeError("residual unit: unit maps " + std::to_string(unit.w1.dim(1)) + " -> " +
                     std::to_string(unit.w2.dim(0)) + " channels but input " + x.shape().str() + " has " +
                     std::to_string(x.dim(1)));
  const std::size_t pad1 = unit.w1.dim(2) / 2, pad2 = unit.w2.dim(2) / 2;
  Tensor inner = tape.relu(tape.conv2d(x, unit.w1, unit.b1, 1, pad1));
  Tensor branch = tape.conv2d(inner, unit.w2, unit.b2, 1, pad2);
  return tape.add(x, branch);
}

Model::Model(ModelConfig config, std::vector<NamedParam> params)
    : config_(std::move(config)), params_(std::move(params)) {}

Tensor& Model::param(const std::string& name) {
  for (auto& [n, t] : params_)
    if (n == name) return t;
  throw ContractError("model has no parameter named " + name);
}

const Tensor& Model::param(const std::string& name) const { return const_cast<Model*>(this)->param(name); }

bool Model::has_param(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const NamedParam& p) { return p.first == name; });
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.second.size();
  return n;
}

std::uint64_t Model::parameter_hash() const {
  Fnv1a h;
  for (const auto& [name, t] : params_) {
    h.update(name);
    for (std::size_t d : t.shape().dims()) h.update_value(static_cast<std::uint64_t>(d));
    for (double v : t.data()) h.update_value(std::bit_cast<std::uint64_t>(v));
  }
  return h.digest();
}

namespace {

std::string unit_name(std::size_t i, const char* field) { return "unit" + std::to_string(i) + "." + field; }

}  // namespace

Tensor Model::forward(Tape& tape, const Tensor& batch, Mode mode, Rng* rng) const {
  const ModelConfig& c = config_;
  if (batch.rank() != 4 || batch.dim(1) != c.channels || batch.dim(2) != c.input_size ||
      batch.dim(3) != c.input_size)
    throw ShapeError("model: batch must be (N, " + std::to_string(c.channels) + ", " + std::to_string(c.input_size) +
                     ", " + std::to_string(c.input_size) + "), got " + batch.shape().str());

  std::map<std::string, Tensor> p;
  for (const auto& [name, t] : params_) p.emplace(name, tape.parameter(name, t));

  const std::size_t pad = c.kernel_size / 2;
  Tensor h = tape.relu(tape.conv2d(batch, p.at("stem.weight"), p.at("stem.bias"), c.stem_stride, pad));
  for (std::size_t i = 0; i < c.n_residual_units; ++i) {
    ResidualUnitParams unit{p.at(unit_name(i, "w1")), p.at(unit_name(i, "b1")), p.at(unit_name(i, "w2")),
                            p.at(unit_name(i, "b2"))};
    h = residual_forward(tape, unit, h);
    if (i + 1 < c.n_residual_units) h = tape.relu(h);
  }
  h = tape.global_avg_pool(h);
  h = tape.relu(tape.linear(h, p.at("fc1.weight"), p.at("fc1.bias")));
  h = tape.dropout(h, c.dropout_p, mode, rng);
  h = tape.linear(h, p.at("fc2.weight"), p.at("fc2.bias"));
  return tape.sigmoid(h);
}

Model build_model(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed);
  std::vector<Model::NamedParam> params;
  auto he = [&](Shape shape, std::size_t fan_in) {
    Tensor t(shape);
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : t.data()) v = rng.normal() * sd;
    return t;
  };
  const std::size_t k = config.kernel_size, s = config.stem_channels;
  params.emplace_back("stem.weight", he(Shape{s, config.channels, k, k}, config.channels * k * k));
  params.emplace_back("stem.bias", Tensor(Shape{s}));
  for (std::size_t i = 0; i < config.n_residual_units; ++i) {
    params.emplace_back(unit_name(i, "w1"), he(Shape{s, s, k, k}, s * k * k));
    params.emplace_back(unit_name(i, "b1"), Tensor(Shape{s}));
    params.emplace_back(unit_name(i, "w2"), he(Shape{s, s, k, k}, s * k * k));
    params.emplace_back(unit_name(i, "b2"), Tensor(Shape{s}));
  }
  const std::size_t hw = config.hidden_layer_width;
  params.emplace_back("fc1.weight", he(Shape{hw, s}, s));
  params.emplace_back("fc1.bias", Tensor(Shape{hw}));
  params.emplace_back("fc2.weight", he(Shape{1, hw}, hw));
  params.emplace_back("fc2.bias", Tensor(Shape{1}));
  return Model(config, std::move(params));
}

std::vector<double> predict_proba(const Model& model, const Tensor& batch, Mode mode, Rng* rng) {
  Tape tape(false);
  Tensor out = model.forward(tape, batch, mode, rng);
  std::vector<double> probs(out.storage());
  // Saturated logits round to exactly 0 or 1 in double precision.
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  for (double& v : probs) v = std::clamp(v, lo, hi);
  return probs;
}

// --- checkpoint -----------------------------------------------------------

namespace {

constexpr char kMagic[] = {'S', 'S', 'L', 'A', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  template <class T>
  void put(T v) {
    auto u = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    if constexpr (std::endian::native == std::endian::big) std::reverse(u.begin(), u.end());
    out_.append(reinterpret_cast<const char*>(u.data()), u.size());
  }
  void put_string(const std::string& s) {
    put(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}
  template <class T>
  T get(const char* what) {
    need(sizeof(T), what);
    std::array<unsigned char, sizeof(T)> u;
    std::copy_n(reinterpret_cast<const unsigned char*>(in_.data() + pos_), sizeof(T), u.begin());
    if constexpr (std::endian::native == std::endian::big) std::reverse(u.begin(), u.end());
    pos_ += sizeof(T);
    return std::bit_cast<T>(u);
  }
  std::string get_string(const char* what) {
    const auto n = get<std::uint32_t>(what);
    need(n, what);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n, const char* what) {
    need(n, what);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n)
      throw FormatError(std::string("checkpoint truncated while reading ") + what + " at byte " + std::to_string(pos_));
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Model& model, const CheckpointMetadata& meta) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.put(kVersion);
  w.put_string(model.config().serialize());
  w.put(model.config().hash());
  w.put(meta.epoch);
  w.put(meta.val_auc);
  w.put(static_cast<std::uint32_t>(model.params().size()));
  for (const auto& [name, t] : model.params()) {
    w.put_string(name);
    w.put(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape().dims()) w.put(static_cast<std::uint64_t>(d));
    for (double v : t.data()) w.put(v);
  }
  return w.take();
}

ModelCheckpoint parse_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (r.raw(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic)))
    throw FormatError("checkpoint: bad magic (expected SSLAB1)");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const std::string config_text = r.get_string("config");
  const auto stored_hash = r.get<std::uint64_t>("config hash");
  ModelConfig config = ModelConfig::parse(config_text);
  if (config.hash() != stored_hash) throw FormatError("checkpoint: config hash mismatch");
  CheckpointMetadata meta;
  meta.epoch = r.get<std::uint32_t>("epoch");
  meta.val_auc = r.get<double>("val_auc");

  Model model = build_model(config);
  const auto count = r.get<std::uint32_t>("parameter count");
  std::vector<bool> seen(model.params().size(), false);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.get_string("parameter name");
    const auto rank = r.get<std::uint32_t>("parameter rank");
    if (rank == 0 || rank > Shape::kMaxRank) throw FormatError("checkpoint: parameter " + name + " has invalid rank");
    std::vector<std::size_t> dims(rank);
    for (auto& d : dims) d = static_cast<std::size_t>(r.get<std::uint64_t>("parameter extent"));
    auto it = std::find_if(model.params().begin(), model.params().end(),
                           [&](const Model::NamedParam& p) { return p.first == name; });
    if (it == model.params().end()) throw FormatError("checkpoint: unknown parameter name '" + name + "'");
    Shape shape(dims);
    if (!(shape == it->second.shape()))
      throw FormatError("checkpoint: parameter " + name + " has shape " + shape.str() + ", expected " +
                        it->second.shape().str());
    for (double& v : it->second.data()) v = r.get<double>("parameter values");
    seen[static_cast<std::size_t>(it - model.params().begin())] = true;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw FormatError("checkpoint: missing parameter '" + model.params()[i].first + "'");
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes after parameters");
  return {std::move(model), meta};
}

void save_checkpoint(const Model& model, const CheckpointMetadata& meta, const std::filesystem::path& path) {
  const std::string bytes = serialize_checkpoint(model, meta);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_checkpoint(ss.str());
}

}  // namespace sslab
