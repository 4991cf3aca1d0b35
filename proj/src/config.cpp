#include "uwcsr/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "uwcsr/errors.hpp"

namespace uwcsr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw ConfigSemanticError("config key '" + key + "': cannot read '" + value + "' as " + want);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  const auto n = to_int(key, v);
  if (n < 0) bad_value(key, v, "a nonnegative integer");
  return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v, "true/false");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define UWCSR_DOUBLE(name, member)                                                          \
  {name,                                                                                   \
   {[](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
    [](const RunConfig& c) { return fmt(c.member); }}}
#define UWCSR_COUNT(name, member, type)                                                     \
  {name,                                                                                   \
   {[](RunConfig& c, const std::string& k, const std::string& v) {                         \
      c.member = static_cast<type>(to_count(k, v));                                        \
    },                                                                                     \
    [](const RunConfig& c) { return std::to_string(c.member); }}}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table{
      // environment
      UWCSR_DOUBLE("water_depth", dataset.env.water_depth),
      UWCSR_DOUBLE("tx_depth", dataset.env.tx_depth),
      UWCSR_DOUBLE("rx_depth", dataset.env.rx_depth),
      UWCSR_DOUBLE("range", dataset.env.range),
      UWCSR_DOUBLE("spreading_factor", dataset.env.spreading_factor),
      UWCSR_DOUBLE("c_water", dataset.env.c_water),
      UWCSR_DOUBLE("c_bottom", dataset.env.c_bottom),
      UWCSR_DOUBLE("bottom_density_ratio", dataset.env.bottom_density_ratio),
      UWCSR_COUNT("n_intrapaths", dataset.env.n_intrapaths, int),
      UWCSR_DOUBLE("tx_drift", dataset.env.tx_drift),
      UWCSR_DOUBLE("rx_drift", dataset.env.rx_drift),
      UWCSR_DOUBLE("tx_vehicular_sigma", dataset.env.tx_vehicular_sigma),
      UWCSR_DOUBLE("rx_vehicular", dataset.env.rx_vehicular),
      UWCSR_COUNT("n_macro_paths", dataset.env.n_macro_paths, int),
      UWCSR_DOUBLE("intrapath_delay_mean", dataset.env.intrapath_delay_mean),
      UWCSR_DOUBLE("intrapath_gain_decay", dataset.env.intrapath_gain_decay),
      UWCSR_DOUBLE("absorption_frequency_khz", dataset.env.absorption_frequency_khz),
      {"doppler_compensation",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.dataset.env.doppler_compensation = to_bool(k, v);
        },
        [](const RunConfig& c) { return std::string(c.dataset.env.doppler_compensation ? "true" : "false"); }}},
      // ofdm
      UWCSR_COUNT("n_subcarriers", dataset.ofdm.n_subcarriers, std::size_t),
      UWCSR_COUNT("n_symbols", dataset.ofdm.n_symbols, std::size_t),
      UWCSR_DOUBLE("carrier", dataset.ofdm.carrier),
      UWCSR_DOUBLE("bandwidth", dataset.ofdm.bandwidth),
      {"modulation",
       {[](RunConfig&, const std::string& k, const std::string& v) {
          if (v != "qpsk") bad_value(k, v, "qpsk");
        },
        [](const RunConfig&) { return std::string("qpsk"); }}},
      // dataset
      UWCSR_COUNT("n_frames", dataset.n_frames, std::size_t),
      UWCSR_DOUBLE("train_fraction", dataset.train_fraction),
      UWCSR_DOUBLE("val_fraction", dataset.val_fraction),
      UWCSR_DOUBLE("test_fraction", dataset.test_fraction),
      {"snr_grid",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.dataset.snr_grid.clear();
          for (const auto& item : split_list(v)) c.dataset.snr_grid.push_back(to_double(k, item));
        },
        [](const RunConfig& c) {
          std::vector<std::string> items;
          for (double s : c.dataset.snr_grid) items.push_back(fmt(s));
          return join(items);
        }}},
      {"snr_mode",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "uniform") c.dataset.snr_mode = SnrAssignment::uniform_draw;
          else if (v == "fixed") c.dataset.snr_mode = SnrAssignment::fixed;
          else bad_value(k, v, "uniform/fixed");
        },
        [](const RunConfig& c) {
          return std::string(c.dataset.snr_mode == SnrAssignment::fixed ? "fixed" : "uniform");
        }}},
      UWCSR_DOUBLE("fixed_snr_db", dataset.fixed_snr_db),
      UWCSR_DOUBLE("scaling_factor", dataset.scaling_factor),
      {"seed",
       {[](RunConfig& c, const std::string& k, const std::string& v) { c.set_seed(to_count(k, v)); },
        [](const RunConfig& c) { return std::to_string(c.seed()); }}},
      // network
      UWCSR_COUNT("depth", depth, std::size_t),
      UWCSR_COUNT("width", width, std::size_t),
      UWCSR_DOUBLE("lrelu_slope", lrelu_slope),
      // training
      UWCSR_DOUBLE("initial_lr", training.initial_lr),
      UWCSR_DOUBLE("lr_decay", training.lr_decay),
      UWCSR_COUNT("decay_every", training.decay_every, int),
      UWCSR_COUNT("max_epochs", training.max_epochs, int),
      UWCSR_COUNT("early_stop_patience", training.early_stop_patience, int),
      UWCSR_COUNT("batch_size", training.batch_size, std::size_t),
      {"optimizer",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.training.optimizer = parse_optimizer(v);
          } catch (const std::invalid_argument&) {
            bad_value(k, v, "an optimizer name");
          }
        },
        [](const RunConfig& c) { return to_string(c.training.optimizer); }}},
      {"loss_weighting",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          try {
            c.loss_weighting = parse_loss_weighting(v);
          } catch (const std::invalid_argument&) {
            bad_value(k, v, "uniform/snr");
          }
        },
        [](const RunConfig& c) { return to_string(c.loss_weighting); }}},
      UWCSR_DOUBLE("momentum", training.momentum),
      UWCSR_DOUBLE("clip_norm", training.clip_norm),
      // run
      {"threads",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.threads = static_cast<int>(to_count(k, v));
        },
        [](const RunConfig& c) { return std::to_string(c.threads); }}},
      {"methods",
       {[](RunConfig& c, const std::string& k, const std::string& v) {
          c.methods = split_list(v);
          for (const auto& m : c.methods) {
            try {
              ExperimentConfig::parse(m);
            } catch (const std::invalid_argument&) {
              bad_value(k, m, "a method label");
            }
          }
        },
        [](const RunConfig& c) { return join(c.methods); }}},
      UWCSR_COUNT("bootstrap_resamples", bootstrap_resamples, std::size_t),
  };
  return table;
}

#undef UWCSR_DOUBLE
#undef UWCSR_COUNT

}  // namespace

void RunConfig::set_seed(std::uint64_t seed) {
  dataset.seed = seed;
  training.seed = seed;
}

void RunConfig::validate() const {
  try {
    dataset.validate();
    training.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigSemanticError(e.what());
  }
  if (depth < 1) throw ConfigSemanticError("depth must be >= 1");
  if (width < 1) throw ConfigSemanticError("width must be >= 1");
  if (!(lrelu_slope > 0.0 && lrelu_slope < 1.0)) throw ConfigSemanticError("lrelu_slope must be in (0, 1)");
  if (bootstrap_resamples < 1) throw ConfigSemanticError("bootstrap_resamples must be >= 1");
}

RunConfig parse_config(const std::string& text) {
  std::map<std::string, const Field*> index;
  for (const auto& [name, field] : fields()) index.emplace(name, &field);

  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigParseError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = index.find(key);
    if (it == index.end()) throw ConfigParseError("unknown config key '" + key + "'");
    it->second->set(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + " = " + field.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.push_back(f.first);
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string RunManifest::to_text() const {
  std::ostringstream os;
  os << "command = " << command << "\n"
     << "config_path = " << config_path << "\n"
     << "config_hash = " << std::hex << std::setw(16) << std::setfill('0') << config_hash << std::dec << "\n"
     << "seed = " << seed << "\n"
     << "output = " << output << "\n";
  for (const auto& [k, v] : fields) os << k << " = " << v << "\n";
  for (const auto& [stage, secs] : stage_seconds)
    os << "time." << stage << " = " << std::fixed << std::setprecision(3) << secs << "\n";
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << text;
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace uwcsr
