#include "fg/io.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "fg/common.hpp"

namespace fg {

// ---------------------------------------------------------------------
//  Config schema
// ---------------------------------------------------------------------
namespace {

enum class KeyType { Int, Real, Bool, Enum, Text, IntList };

struct KeySpec {
  const char* name;
  KeyType type;
  const char* def;
  const char* choices;  // '|'-separated for Enum (may include "auto" for numbers)
  double lo, hi;        // numeric range
  bool allow_auto;
};

const KeySpec kSchema[] = {
    // experiment
    {"dataset", KeyType::Enum, "ring8", "ring8|grid25|two_moons|idx", 0, 0, false},
    {"data_n", KeyType::Int, "8000", nullptr, 10, 1e9, false},
    {"seed", KeyType::Int, "1", nullptr, 0, 9.22e18, false},
    {"out_dir", KeyType::Text, "out", nullptr, 0, 0, false},
    {"objective", KeyType::Enum, "mle", "mle|adv|hybrid", 0, 0, false},
    {"lambda", KeyType::Real, "1", nullptr, 0, 1e12, false},
    // idx ingestion
    {"idx_images", KeyType::Text, "", nullptr, 0, 0, false},
    {"idx_labels", KeyType::Text, "", nullptr, 0, 0, false},
    {"idx_test_images", KeyType::Text, "", nullptr, 0, 0, false},
    {"idx_test_labels", KeyType::Text, "", nullptr, 0, 0, false},
    {"idx_pool14", KeyType::Bool, "false", nullptr, 0, 0, false},
    // flow
    {"flow_kind", KeyType::Enum, "affine", "additive|affine", 0, 0, false},
    {"n_layers", KeyType::Int, "4", nullptr, 0, 1000, false},
    {"conditioner_width", KeyType::Int, "16", nullptr, 1, 100000, false},
    {"prior", KeyType::Enum, "gaussian", "gaussian|logistic", 0, 0, false},
    {"log_scale_clamp", KeyType::Real, "5", nullptr, 1e-6, 100, false},
    // critic
    {"critic_widths", KeyType::IntList, "32,32", nullptr, 1, 100000, false},
    {"critic_activation", KeyType::Enum, "tanh", "tanh|relu|sigmoid", 0, 0, false},
    {"divergence", KeyType::Enum, "wgan", "wgan|jsd", 0, 0, false},
    {"penalty_coeff", KeyType::Real, "10", nullptr, 0, 1e9, false},
    {"n_critic", KeyType::Int, "auto", nullptr, 1, 1000, true},
    // optimizers
    {"adam_lr", KeyType::Real, "auto", nullptr, 1e-12, 1e6, true},
    {"adam_beta1", KeyType::Real, "auto", nullptr, 0, 0.9999999, true},
    {"adam_beta2", KeyType::Real, "auto", nullptr, 0, 0.9999999, true},
    {"adam_eps", KeyType::Real, "1e-8", nullptr, 1e-300, 1, false},
    {"critic_lr", KeyType::Real, "1e-4", nullptr, 1e-12, 1e6, false},
    {"critic_beta1", KeyType::Real, "0.5", nullptr, 0, 0.9999999, false},
    {"critic_beta2", KeyType::Real, "0.9", nullptr, 0, 0.9999999, false},
    // training
    {"batch_size", KeyType::Int, "64", nullptr, 1, 1000000, false},
    {"n_iters", KeyType::Int, "10000", nullptr, 0, 1e12, false},
    {"eval_every", KeyType::Int, "500", nullptr, 1, 1e12, false},
    {"train_eval_n", KeyType::Int, "512", nullptr, 1, 1e9, false},
    {"eval_batch", KeyType::Int, "256", nullptr, 1, 1e9, false},
    {"score_n", KeyType::Int, "1024", nullptr, 1, 1e9, false},
    {"compute_scores", KeyType::Bool, "true", nullptr, 0, 0, false},
    {"log_wallclock", KeyType::Bool, "false", nullptr, 0, 0, false},
    {"checkpoint_every", KeyType::Int, "0", nullptr, 0, 1e12, false},
    {"resume", KeyType::Text, "", nullptr, 0, 0, false},
    // evaluation commands
    {"checkpoint", KeyType::Text, "", nullptr, 0, 0, false},
    {"bandwidth_grid_n", KeyType::Int, "40", nullptr, 1, 100000, false},
    {"bandwidth_min", KeyType::Real, "0.005", nullptr, 1e-9, 1, false},
    {"bandwidth_max", KeyType::Real, "1", nullptr, 1e-9, 1, false},
    {"gmm_score_n", KeyType::Int, "1024", nullptr, 1, 1e9, false},
    {"kde_samples", KeyType::Int, "10000", nullptr, 1, 1e9, false},
    {"kde_eval_n", KeyType::Int, "512", nullptr, 1, 1e9, false},
    {"ais_chains", KeyType::Int, "64", nullptr, 1, 1e6, false},
    {"ais_temps", KeyType::Int, "1000", nullptr, 1, 1e9, false},
    {"ais_mh_steps", KeyType::Int, "8", nullptr, 0, 1000, false},
    {"ais_step", KeyType::Real, "0.05", nullptr, 1e-12, 1e6, false},
    {"ais_sigma_obs", KeyType::Real, "0.1", nullptr, 1e-12, 1e6, false},
    {"ais_eval_n", KeyType::Int, "20", nullptr, 1, 1e9, false},
    {"spectral_n_z", KeyType::Int, "64", nullptr, 1, 1e6, false},
    {"sample_n", KeyType::Int, "1000", nullptr, 1, 1e9, false},
    // surrogate classifier
    {"classifier_hidden", KeyType::Int, "32", nullptr, 1, 100000, false},
    {"classifier_iters", KeyType::Int, "2000", nullptr, 1, 1e9, false},
    {"classifier_lr", KeyType::Real, "0.01", nullptr, 1e-12, 1e3, false},
    {"classifier_min_acc", KeyType::Real, "0.95", nullptr, 0, 1, false},
};

const KeySpec* find_spec(const std::string& key) {
  for (const auto& s : kSchema)
    if (key == s.name) return &s;
  return nullptr;
}

bool parse_int64(const std::string& s, int64_t* out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  long long v = strtoll(s.c_str(), &end, 10);
  if (errno != 0 || end != s.c_str() + s.size()) return false;
  *out = v;
  return true;
}

bool parse_real(const std::string& s, double* out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  double v = strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size() || !std::isfinite(v)) return false;
  *out = v;
  return true;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

void validate_value(const KeySpec& spec, const std::string& value, const std::string& where) {
  if (spec.allow_auto && value == "auto") return;
  switch (spec.type) {
    case KeyType::Text:
      return;
    case KeyType::Bool:
      if (value != "true" && value != "false")
        raise(Err::Parse, where + ": '" + spec.name + "' must be true or false");
      return;
    case KeyType::Enum: {
      std::string choices = spec.choices;
      size_t pos = 0;
      while (pos != std::string::npos) {
        size_t next = choices.find('|', pos);
        std::string opt = next == std::string::npos ? choices.substr(pos) : choices.substr(pos, next - pos);
        if (value == opt) return;
        pos = next == std::string::npos ? next : next + 1;
      }
      raise(Err::Parse, where + ": '" + spec.name + "' must be one of " + spec.choices);
    }
    case KeyType::Int: {
      int64_t v;
      if (!parse_int64(value, &v)) raise(Err::Parse, where + ": '" + spec.name + "' is not an integer");
      if (v < spec.lo || v > spec.hi)
        raise(Err::Parse, strf("%s: '%s'=%lld out of range [%g, %g]", where.c_str(), spec.name,
                               static_cast<long long>(v), spec.lo, spec.hi));
      return;
    }
    case KeyType::Real: {
      double v;
      if (!parse_real(value, &v)) raise(Err::Parse, where + ": '" + spec.name + "' is not a number");
      if (v < spec.lo || v > spec.hi)
        raise(Err::Parse, strf("%s: '%s'=%g out of range [%g, %g]", where.c_str(), spec.name, v, spec.lo, spec.hi));
      return;
    }
    case KeyType::IntList: {
      size_t pos = 0;
      if (value.empty()) raise(Err::Parse, where + ": '" + spec.name + "' must be a comma list of integers");
      while (pos <= value.size()) {
        size_t next = value.find(',', pos);
        std::string part = next == std::string::npos ? value.substr(pos) : value.substr(pos, next - pos);
        int64_t v;
        if (!parse_int64(trim(part), &v) || v < spec.lo || v > spec.hi)
          raise(Err::Parse, where + ": '" + spec.name + "' has an invalid element '" + part + "'");
        if (next == std::string::npos) break;
        pos = next + 1;
      }
      return;
    }
  }
}

} // namespace

bool ExperimentConfig::has(const std::string& key) const { return values.count(key) > 0; }

const std::string& ExperimentConfig::str(const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) raise(Err::Contract, "unknown config key '" + key + "'");
  return it->second;
}

int64_t ExperimentConfig::integer(const std::string& key) const {
  int64_t v;
  if (!parse_int64(str(key), &v)) raise(Err::Contract, "config key '" + key + "' is not an integer");
  return v;
}

double ExperimentConfig::real(const std::string& key) const {
  double v;
  if (!parse_real(str(key), &v)) raise(Err::Contract, "config key '" + key + "' is not a number");
  return v;
}

bool ExperimentConfig::boolean(const std::string& key) const { return str(key) == "true"; }

std::vector<int> ExperimentConfig::int_list(const std::string& key) const {
  const std::string& value = str(key);
  std::vector<int> out;
  size_t pos = 0;
  while (pos <= value.size()) {
    size_t next = value.find(',', pos);
    std::string part = next == std::string::npos ? value.substr(pos) : value.substr(pos, next - pos);
    int64_t v;
    if (!parse_int64(trim(part), &v)) raise(Err::Contract, "config key '" + key + "' is not an int list");
    out.push_back(static_cast<int>(v));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_spec(key);
  if (!spec) raise(Err::Parse, "unknown config key '" + key + "'");
  validate_value(*spec, value, "override");
  values[key] = value;
}

std::string ExperimentConfig::echo() const {
  std::string out;
  for (const auto& [k, v] : values) out += k + "=" + v + "\n";
  return out;
}

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  for (const auto& s : kSchema) cfg.values[s.name] = s.def;
  return cfg;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& source_name) {
  ExperimentConfig cfg = default_config();
  size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    size_t next = text.find('\n', pos);
    std::string line = next == std::string::npos ? text.substr(pos) : text.substr(pos, next - pos);
    ++line_no;
    std::string where = strf("%s:%d", source_name.c_str(), line_no);

    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      size_t eq = line.find('=');
      if (eq == std::string::npos) raise(Err::Parse, where + ": expected key=value");
      std::string key = trim(line.substr(0, eq));
      std::string value = trim(line.substr(eq + 1));
      const KeySpec* spec = find_spec(key);
      if (!spec) raise(Err::Parse, where + ": unknown config key '" + key + "'");
      validate_value(*spec, value, where);
      cfg.values[key] = value;
    }

    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (cfg.real("bandwidth_min") >= cfg.real("bandwidth_max"))
    raise(Err::Parse, source_name + ": bandwidth_min must be below bandwidth_max");
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  return parse_config_text(read_text_file(path), path);
}

// ---------------------------------------------------------------------
//  Plain files
// ---------------------------------------------------------------------
namespace {
struct FileCloser {
  void operator()(FILE* f) const {
    if (f) fclose(f);
  }
};
using File = std::unique_ptr<FILE, FileCloser>;
} // namespace

void write_text_file(const std::string& path, const std::string& content) {
  File f(fopen(path.c_str(), "wb"));
  if (!f) raise(Err::Io, "cannot write '" + path + "'");
  if (fwrite(content.data(), 1, content.size(), f.get()) != content.size())
    raise(Err::Io, "short write to '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  File f(fopen(path.c_str(), "rb"));
  if (!f) raise(Err::Io, "cannot open '" + path + "'");
  std::string out;
  char buf[65536];
  size_t got;
  while ((got = fread(buf, 1, sizeof(buf), f.get())) > 0) out.append(buf, got);
  return out;
}

std::string csv_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return strf("%.17g", v);
}

// ---------------------------------------------------------------------
//  Checkpoints
// ---------------------------------------------------------------------
namespace {

constexpr char kMagic[8] = {'F', 'L', 'O', 'W', 'G', 'A', 'N', '1'};

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

struct Reader {
  const std::string* buf;
  size_t pos = 0;
  std::string path;

  void need(size_t n) const {
    if (pos + n > buf->size())
      raise(Err::Format, strf("%s: truncated at byte %zu (need %zu more bytes)", path.c_str(), pos, n));
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>((*buf)[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>((*buf)[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf->substr(pos, n);
    pos += n;
    return s;
  }
};

} // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : blocks)
    if (n == name) return &t;
  return nullptr;
}

const std::array<uint64_t, 4>* Checkpoint::find_stream(const std::string& name) const {
  for (const auto& [n, s] : streams)
    if (n == name) return &s;
  return nullptr;
}

void save_checkpoint_file(const std::string& path, const Checkpoint& ck) {
  std::string out;
  out.append(kMagic, 8);
  put_u64(out, ck.config_echo.size());
  out += ck.config_echo;
  put_u64(out, static_cast<uint64_t>(ck.iteration));
  put_u32(out, static_cast<uint32_t>(ck.streams.size()));
  for (const auto& [name, st] : ck.streams) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    for (uint64_t w : st) put_u64(out, w);
  }
  put_u32(out, static_cast<uint32_t>(ck.blocks.size()));
  for (const auto& [name, t] : ck.blocks) {
    put_u32(out, static_cast<uint32_t>(name.size()));
    out += name;
    put_u32(out, static_cast<uint32_t>(t.ndim()));
    for (int i = 0; i < t.ndim(); ++i) put_u32(out, static_cast<uint32_t>(t.dim(i)));
    for (int i = 0; i < t.size(); ++i) put_f64(out, t[i]);
  }
  write_text_file(path, out);
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::string raw = read_text_file(path);
  Reader r{&raw, 0, path};
  std::string magic = r.bytes(8);
  if (std::memcmp(magic.data(), kMagic, 8) != 0)
    raise(Err::Format, path + ": bad checkpoint magic (want FLOWGAN1)");

  Checkpoint ck;
  uint64_t cfg_len = r.u64();
  ck.config_echo = r.bytes(cfg_len);
  ck.iteration = static_cast<int64_t>(r.u64());
  uint32_t n_streams = r.u32();
  for (uint32_t i = 0; i < n_streams; ++i) {
    std::string name = r.bytes(r.u32());
    std::array<uint64_t, 4> st{};
    for (auto& w : st) w = r.u64();
    ck.streams.emplace_back(std::move(name), st);
  }
  uint32_t n_blocks = r.u32();
  for (uint32_t i = 0; i < n_blocks; ++i) {
    std::string name = r.bytes(r.u32());
    uint32_t ndim = r.u32();
    if (ndim == 0 || ndim > 8) raise(Err::Format, path + ": block '" + name + "' has invalid rank");
    std::vector<int> shape;
    long long total = 1;
    for (uint32_t k = 0; k < ndim; ++k) {
      uint32_t d = r.u32();
      if (d == 0 || d > (1u << 28)) raise(Err::Format, path + ": block '" + name + "' has invalid extent");
      shape.push_back(static_cast<int>(d));
      total *= d;
    }
    std::vector<double> data(static_cast<size_t>(total));
    for (auto& v : data) v = r.f64();
    ck.blocks.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return ck;
}

} // namespace fg
