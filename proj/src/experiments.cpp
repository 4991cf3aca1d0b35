#include "uwcsr/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "uwcsr/binary_io.hpp"
#include "uwcsr/errors.hpp"
#include "uwcsr/estimation.hpp"
#include "uwcsr/rng.hpp"

namespace uwcsr {

namespace {

constexpr std::uint32_t kDatasetVersion = 1;

OfdmFrameGrid make_frame(const DatasetSpec& spec, const PilotPattern& pattern, const CsiMatrix& h,
                         std::uint64_t seed, double snr_db) {
  OfdmFrameGrid frame =
      build_frame(spec.ofdm, pattern, random_payload(payload_bit_count(spec.ofdm, pattern), seed));
  frame.rx_symbols = apply_channel(frame, h, snr_db, seed);
  return frame;
}

void write_tensor(std::ostream& os, const Tensor3& t) {
  for (double v : t.values()) binio::write_f32(os, static_cast<float>(v));
}

Tensor3 read_tensor(std::istream& is, std::size_t rows, std::size_t cols) {
  Tensor3 t(2, rows, cols);
  for (double& v : t.values()) v = binio::read_f32(is);
  return t;
}

void write_spec(std::ostream& os, const DatasetSpec& spec) {
  const auto& e = spec.env;
  for (double v : {e.water_depth, e.tx_depth, e.rx_depth, e.range, e.spreading_factor, e.c_water,
                   e.c_bottom, e.bottom_density_ratio, e.tx_drift, e.rx_drift,
                   e.tx_vehicular_sigma, e.rx_vehicular, e.intrapath_delay_mean,
                   e.intrapath_gain_decay, e.absorption_frequency_khz})
    binio::write_f64(os, v);
  binio::write_u32(os, static_cast<std::uint32_t>(e.n_intrapaths));
  binio::write_u32(os, static_cast<std::uint32_t>(e.n_macro_paths));
  binio::write_u32(os, e.doppler_compensation ? 1U : 0U);
  binio::write_f64(os, spec.ofdm.carrier);
  binio::write_f64(os, spec.ofdm.bandwidth);
  binio::write_f64(os, spec.train_fraction);
  binio::write_f64(os, spec.val_fraction);
  binio::write_f64(os, spec.test_fraction);
  binio::write_u32(os, spec.snr_mode == SnrAssignment::fixed ? 1U : 0U);
  binio::write_f64(os, spec.fixed_snr_db);
  binio::write_f64(os, spec.scaling_factor);
  binio::write_u64(os, spec.seed);
}

void read_spec(std::istream& is, DatasetSpec& spec) {
  auto& e = spec.env;
  for (double* v : {&e.water_depth, &e.tx_depth, &e.rx_depth, &e.range, &e.spreading_factor,
                    &e.c_water, &e.c_bottom, &e.bottom_density_ratio, &e.tx_drift, &e.rx_drift,
                    &e.tx_vehicular_sigma, &e.rx_vehicular, &e.intrapath_delay_mean,
                    &e.intrapath_gain_decay, &e.absorption_frequency_khz})
    *v = binio::read_f64(is);
  e.n_intrapaths = static_cast<int>(binio::read_u32(is));
  e.n_macro_paths = static_cast<int>(binio::read_u32(is));
  e.doppler_compensation = binio::read_u32(is) != 0;
  spec.ofdm.carrier = binio::read_f64(is);
  spec.ofdm.bandwidth = binio::read_f64(is);
  spec.train_fraction = binio::read_f64(is);
  spec.val_fraction = binio::read_f64(is);
  spec.test_fraction = binio::read_f64(is);
  spec.snr_mode = binio::read_u32(is) == 1 ? SnrAssignment::fixed : SnrAssignment::uniform_draw;
  spec.fixed_snr_db = binio::read_f64(is);
  spec.scaling_factor = binio::read_f64(is);
  spec.seed = binio::read_u64(is);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

void DatasetSpec::validate() const {
  if (n_frames < 1) throw std::invalid_argument("dataset: n_frames must be >= 1");
  if (train_fraction < 0.0 || val_fraction < 0.0 || test_fraction < 0.0)
    throw std::invalid_argument("dataset: split fractions must be nonnegative");
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
    throw std::invalid_argument("dataset: split fractions must sum to 1");
  if (snr_grid.empty()) throw std::invalid_argument("dataset: empty SNR grid");
  if (!(scaling_factor > 0.0)) throw std::invalid_argument("dataset: scaling_factor must be > 0");
  env.validate();
  ofdm.validate();
  PilotPattern::two_symbol().validate(ofdm.n_symbols);
  PilotPattern::four_symbol().validate(ofdm.n_symbols);
}

SplitCounts split_counts(std::size_t n_frames, double val_fraction, double test_fraction) {
  SplitCounts c;
  c.val = static_cast<std::size_t>(std::floor(static_cast<double>(n_frames) * val_fraction + 1e-9));
  c.test = static_cast<std::size_t>(std::floor(static_cast<double>(n_frames) * test_fraction + 1e-9));
  c.train = n_frames - c.val - c.test;
  return c;
}

std::vector<std::size_t> Dataset::indices(Split split, std::optional<double> snr_db) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split != split) continue;
    if (snr_db && records[i].snr_db != *snr_db) continue;
    out.push_back(i);
  }
  return out;
}

FrameSample make_frame_sample(const DatasetSpec& spec, const FrameRecord& record) {
  FrameSample s;
  s.record = record;
  const auto real = realize_channel(spec.env, record.seed);
  const auto f = spec.ofdm.frequency_grid();
  const auto t = spec.ofdm.time_grid();
  s.truth = sample_csi(real, f, t);
  s.frame2 = make_frame(spec, PilotPattern::two_symbol(), s.truth, record.seed, record.snr_db);
  s.frame4 = make_frame(spec, PilotPattern::four_symbol(), s.truth, record.seed, record.snr_db);
  return s;
}

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  const std::size_t n = spec.n_frames;
  ds.records.resize(n);

  const auto counts = split_counts(n, spec.val_fraction, spec.test_fraction);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng = make_rng(spec.seed, Stream::shuffle);
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  for (std::size_t i = 0; i < n; ++i) {
    auto& r = ds.records[i];
    r.index = static_cast<std::uint32_t>(i);
    r.seed = derive_seed(spec.seed, i);
    if (spec.snr_mode == SnrAssignment::fixed) {
      r.snr_db = spec.fixed_snr_db;
    } else {
      Rng snr_rng = make_rng(r.seed, Stream::snr);
      std::uniform_int_distribution<std::size_t> pick(0, spec.snr_grid.size() - 1);
      r.snr_db = spec.snr_grid[pick(snr_rng)];
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    Split split = Split::train;
    if (k >= counts.train) split = k >= counts.train + counts.val ? Split::test : Split::val;
    ds.records[order[k]].split = split;
  }

  ds.tensors.resize(n);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    const auto k = static_cast<std::size_t>(i);
    const FrameSample s = make_frame_sample(spec, ds.records[k]);
    ds.tensors[k].truth = to_two_channel(s.truth);
    ds.tensors[k].raw2 = to_two_channel(raw_csi_estimate(s.frame2));
    ds.tensors[k].raw4 = to_two_channel(raw_csi_estimate(s.frame4));
  }
  return ds;
}

void write_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  const auto& spec = ds.spec;
  const auto counts = split_counts(ds.records.size(), spec.val_fraction, spec.test_fraction);
  binio::write_magic(os, "UWDS");
  binio::write_u32(os, kDatasetVersion);
  binio::write_u32(os, static_cast<std::uint32_t>(spec.ofdm.n_subcarriers));
  binio::write_u32(os, static_cast<std::uint32_t>(spec.ofdm.n_symbols));
  binio::write_u32(os, static_cast<std::uint32_t>(ds.records.size()));
  binio::write_u32(os, static_cast<std::uint32_t>(counts.train));
  binio::write_u32(os, static_cast<std::uint32_t>(counts.val));
  binio::write_u32(os, static_cast<std::uint32_t>(counts.test));
  binio::write_u32(os, static_cast<std::uint32_t>(spec.snr_grid.size()));
  for (double v : spec.snr_grid) binio::write_f64(os, v);
  write_spec(os, spec);
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    binio::write_u32(os, r.index);
    binio::write_u64(os, r.seed);
    binio::write_f64(os, r.snr_db);
    binio::write_u32(os, static_cast<std::uint32_t>(r.split));
    write_tensor(os, ds.tensors[i].truth);
    write_tensor(os, ds.tensors[i].raw2);
    write_tensor(os, ds.tensors[i].raw4);
  }
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifact("dataset '" + path.string() + "' not found");
  binio::expect_magic(is, "UWDS");
  if (binio::read_u32(is) != kDatasetVersion) throw IoError("unsupported UWDS version");
  Dataset ds;
  auto& spec = ds.spec;
  spec.ofdm.n_subcarriers = binio::read_u32(is);
  spec.ofdm.n_symbols = binio::read_u32(is);
  const std::size_t n = binio::read_u32(is);
  binio::read_u32(is);  // split counts are recomputed from the records
  binio::read_u32(is);
  binio::read_u32(is);
  const std::size_t n_snr = binio::read_u32(is);
  if (n_snr > 4096) throw IoError("UWDS SNR grid too large");
  spec.snr_grid.resize(n_snr);
  for (double& v : spec.snr_grid) v = binio::read_f64(is);
  read_spec(is, spec);
  spec.n_frames = n;

  const std::size_t rows = spec.ofdm.n_subcarriers;
  const std::size_t cols = spec.ofdm.n_symbols;
  ds.records.resize(n);
  ds.tensors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = ds.records[i];
    r.index = binio::read_u32(is);
    r.seed = binio::read_u64(is);
    r.snr_db = binio::read_f64(is);
    const auto split = binio::read_u32(is);
    if (split > 2) throw IoError("UWDS record has an invalid split tag");
    r.split = static_cast<Split>(split);
    ds.tensors[i].truth = read_tensor(is, rows, cols);
    ds.tensors[i].raw2 = read_tensor(is, rows, cols);
    ds.tensors[i].raw4 = read_tensor(is, rows, cols);
  }
  return ds;
}

std::string to_string(LossWeighting w) { return w == LossWeighting::snr ? "snr" : "uniform"; }

LossWeighting parse_loss_weighting(const std::string& name) {
  if (name == "uniform") return LossWeighting::uniform;
  if (name == "snr") return LossWeighting::snr;
  throw std::invalid_argument("unknown loss weighting '" + name + "'");
}

std::vector<TrainingPair> csrnet_training_pairs(const Dataset& ds, Split split, int n_pilots,
                                                std::optional<double> snr_db, LossWeighting weighting) {
  std::vector<TrainingPair> out;
  double total = 0.0;
  for (std::size_t i : ds.indices(split, snr_db)) {
    const auto& t = ds.tensors[i];
    const double w = weighting == LossWeighting::snr ? std::pow(10.0, ds.records[i].snr_db / 10.0) : 1.0;
    out.push_back({scale(t.raw(n_pilots), ds.spec.scaling_factor), scale(t.truth, ds.spec.scaling_factor), w});
    total += w;
  }
  if (weighting == LossWeighting::snr && !out.empty()) {
    const double norm = static_cast<double>(out.size()) / total;
    for (auto& p : out) p.weight *= norm;
  }
  return out;
}

std::vector<MlpSample> mlp_training_samples(const Dataset& ds, Split split, int n_pilots,
                                            std::optional<double> snr_db) {
  std::vector<MlpSample> out;
  const auto pattern = PilotPattern::with_count(n_pilots);
  for (std::size_t i : ds.indices(split, snr_db)) {
    const auto& t = ds.tensors[i];
    auto rows = mlp_samples(scale(t.raw(n_pilots), ds.spec.scaling_factor),
                            scale(t.truth, ds.spec.scaling_factor), pattern);
    std::move(rows.begin(), rows.end(), std::back_inserter(out));
  }
  return out;
}

std::string method_name(Method m) {
  switch (m) {
    case Method::ls: return "LS";
    case Method::dnn: return "DNN";
    case Method::csrnet: return "CSRNet";
    case Method::full_csi: return "FullCsi";
  }
  return "?";
}

Method parse_method(const std::string& name) {
  if (name == "LS") return Method::ls;
  if (name == "DNN") return Method::dnn;
  if (name == "CSRNet") return Method::csrnet;
  if (name == "FullCsi") return Method::full_csi;
  throw std::invalid_argument("unknown method '" + name + "'");
}

std::string ExperimentConfig::label() const {
  if (method == Method::full_csi) return "FullCsi";
  return method_name(method) + "-" + std::to_string(n_pilots);
}

ExperimentConfig ExperimentConfig::parse(const std::string& label) {
  if (label == "FullCsi") return {Method::full_csi, 0};
  const auto dash = label.rfind('-');
  if (dash == std::string::npos) throw std::invalid_argument("bad method label '" + label + "'");
  ExperimentConfig cfg;
  cfg.method = parse_method(label.substr(0, dash));
  const std::string pilots = label.substr(dash + 1);
  if (pilots != "2" && pilots != "4")
    throw std::invalid_argument("method label '" + label + "' needs 2 or 4 pilots");
  cfg.n_pilots = pilots == "2" ? 2 : 4;
  return cfg;
}

bool ModelSet::has(const ExperimentConfig& cfg) const {
  switch (cfg.method) {
    case Method::csrnet: return csrnet.contains(cfg.n_pilots);
    case Method::dnn: return dnn.contains(cfg.n_pilots);
    default: return true;
  }
}

CsiMatrix estimate_csi(const ExperimentConfig& cfg, const FrameSample& sample, const ModelSet& models) {
  if (cfg.method == Method::full_csi) return sample.truth;
  if (!models.has(cfg)) throw MissingArtifact("no trained model for " + cfg.label());

  const OfdmFrameGrid& frame = sample.frame(cfg.n_pilots);
  const CsiMatrix raw = raw_csi_estimate(frame);
  switch (cfg.method) {
    case Method::ls: return raw;
    case Method::csrnet: {
      const auto& ck = models.csrnet.at(cfg.n_pilots);
      const auto input = scale(to_two_channel(raw), ck.scaling_factor);
      return from_two_channel(unscale(forward(ck.net, input), ck.scaling_factor));
    }
    case Method::dnn: {
      const auto& ck = models.dnn.at(cfg.n_pilots);
      const auto input = scale(to_two_channel(raw), ck.scaling_factor);
      return from_two_channel(unscale(mlp_estimate(ck.net, input, frame.pattern), ck.scaling_factor));
    }
    default: break;
  }
  return raw;
}

double frame_mse(const CsiMatrix& estimate, const CsiMatrix& truth) {
  require_same_shape(estimate, truth, "frame_mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) acc += std::norm(estimate.values()[i] - truth.values()[i]);
  return acc / static_cast<double>(truth.size());
}

double evaluate_mse(std::span<const CsiMatrix> estimates, std::span<const CsiMatrix> truths) {
  if (estimates.size() != truths.size()) throw std::invalid_argument("evaluate_mse: length mismatch");
  if (estimates.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) acc += frame_mse(estimates[i], truths[i]);
  return acc / static_cast<double>(estimates.size());
}

double frame_ber(const OfdmFrameGrid& frame, const CsiMatrix& estimate) {
  const Equalized eq = equalize(frame.rx_symbols, estimate);
  const Bits decoded = qpsk_demodulate(extract_data(eq.symbols, frame.pattern));
  return compute_ber(frame.payload_bits, decoded);
}

double evaluate_ber(std::span<const OfdmFrameGrid> frames, std::span<const CsiMatrix> estimates) {
  if (frames.size() != estimates.size()) throw std::invalid_argument("evaluate_ber: length mismatch");
  if (frames.empty()) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < frames.size(); ++i) acc += frame_ber(frames[i], estimates[i]);
  return acc / static_cast<double>(frames.size());
}

Interval bootstrap_mean_ci(std::span<const double> values, std::size_t resamples,
                           std::uint64_t seed, double level) {
  if (values.empty()) return {};
  Rng rng = make_rng(seed, Stream::bootstrap);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) acc += values[pick(rng)];
    m = acc / static_cast<double>(values.size());
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  const auto at = [&](double q) {
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(resamples - 1) + 0.5));
    return means[std::min(k, resamples - 1)];
  };
  Interval ci{at(alpha), at(1.0 - alpha)};
  // the percentile interval can miss the point estimate for very skewed data
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  ci.low = std::min(ci.low, mean);
  ci.high = std::max(ci.high, mean);
  return ci;
}

std::string ResultTable::to_csv() const {
  std::ostringstream os;
  os << "method,pilots,snr_db,mse,ber,n_frames,ci_low,ci_high\n";
  for (const auto& r : rows)
    os << r.method << ',' << r.pilots << ',' << format_double(r.snr_db) << ',' << format_double(r.mse)
       << ',' << format_double(r.ber) << ',' << r.n_frames << ',' << format_double(r.ci_low) << ','
       << format_double(r.ci_high) << '\n';
  return os.str();
}

std::map<std::string, MetricSeries> evaluate_frames(const DatasetSpec& spec,
                                                    std::span<const FrameRecord> records,
                                                    std::span<const ExperimentConfig> configs,
                                                    double snr_db, const ModelSet& models) {
  for (const auto& cfg : configs)
    if (!models.has(cfg)) throw MissingArtifact("no trained model for " + cfg.label());

  std::map<std::string, MetricSeries> out;
  for (const auto& cfg : configs) {
    auto& series = out[cfg.label()];
    series.mse.assign(records.size(), 0.0);
    series.ber.assign(records.size(), 0.0);
  }
  std::vector<MetricSeries*> slots;
  for (const auto& cfg : configs) slots.push_back(&out[cfg.label()]);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(records.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    FrameRecord rec = records[k];
    rec.snr_db = snr_db;
    const FrameSample sample = make_frame_sample(spec, rec);
    for (std::size_t c = 0; c < configs.size(); ++c) {
      const auto& cfg = configs[c];
      const CsiMatrix est = estimate_csi(cfg, sample, models);
      // FullCsi is scored on the 4-pilot frame's payload
      const OfdmFrameGrid& frame = sample.frame(cfg.method == Method::full_csi ? 4 : cfg.n_pilots);
      slots[c]->mse[k] = frame_mse(est, sample.truth);
      slots[c]->ber[k] = frame_ber(frame, est);
    }
  }
  return out;
}

ResultTable run_suite(const Dataset& ds, std::span<const ExperimentConfig> configs,
                      std::span<const double> snr_grid, const ModelSet& models,
                      const SuiteOptions& options) {
  ResultTable table;
  if (configs.empty() || snr_grid.empty()) return table;

  std::vector<FrameRecord> records;
  for (std::size_t i : ds.indices(options.split)) records.push_back(ds.records[i]);

  for (double snr : snr_grid) {
    const auto metrics = evaluate_frames(ds.spec, records, configs, snr, models);
    for (const auto& cfg : configs) {
      const auto& m = metrics.at(cfg.label());
      ResultRow row;
      row.method = method_name(cfg.method);
      row.pilots = cfg.method == Method::full_csi ? 0 : cfg.n_pilots;
      row.snr_db = snr;
      row.n_frames = records.size();
      if (!records.empty()) {
        row.mse = std::accumulate(m.mse.begin(), m.mse.end(), 0.0) / static_cast<double>(records.size());
        row.ber = std::accumulate(m.ber.begin(), m.ber.end(), 0.0) / static_cast<double>(records.size());
        const auto ci = bootstrap_mean_ci(m.mse, options.bootstrap_resamples,
                                          derive_seed(options.seed, table.rows.size()));
        row.ci_low = ci.low;
        row.ci_high = ci.high;
      }
      table.rows.push_back(row);
    }
  }
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const ResultRow& a, const ResultRow& b) {
    if (a.method != b.method) return a.method < b.method;
    if (a.pilots != b.pilots) return a.pilots < b.pilots;
    return a.snr_db < b.snr_db;
  });
  return table;
}

}  // namespace uwcsr
