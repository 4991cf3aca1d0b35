#pragma once

// Dataset generation, the LS / DNN / CSRNet / FullCsi estimator dispatch,
// MSE and BER metrics with bootstrap intervals, and the result table.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uwcsr/baselines.hpp"
#include "uwcsr/channel_model.hpp"
#include "uwcsr/csrnet.hpp"
#include "uwcsr/grid.hpp"
#include "uwcsr/ofdm.hpp"

namespace uwcsr {

enum class SnrAssignment { uniform_draw, fixed };

struct DatasetSpec {
  std::size_t n_frames = 10000;
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;
  std::vector<double> snr_grid{0, 5, 10, 15, 20, 25, 30};
  SnrAssignment snr_mode = SnrAssignment::uniform_draw;
  double fixed_snr_db = 15.0;
  double scaling_factor = 10.0;
  EnvironmentConfig env;
  OfdmConfig ofdm;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

// floor for validation and test, remainder to training.
SplitCounts split_counts(std::size_t n_frames, double val_fraction, double test_fraction);

struct FrameRecord {
  std::uint32_t index = 0;
  std::uint64_t seed = 0;
  double snr_db = 0.0;
  Split split = Split::train;

  friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

// Stored per record: true CSI and the raw (LS + interpolation) estimates for
// the 2- and 4-pilot patterns, all unscaled two-channel tensors.
struct FrameTensors {
  TwoChannelCsi truth;
  TwoChannelCsi raw2;
  TwoChannelCsi raw4;

  const TwoChannelCsi& raw(int n_pilots) const { return n_pilots == 2 ? raw2 : raw4; }
};

struct Dataset {
  DatasetSpec spec;
  std::vector<FrameRecord> records;
  std::vector<FrameTensors> tensors;

  std::vector<std::size_t> indices(Split split, std::optional<double> snr_db = std::nullopt) const;
};

// Everything one frame needs, regenerated from its seed.
struct FrameSample {
  FrameRecord record;
  CsiMatrix truth;
  OfdmFrameGrid frame2;
  OfdmFrameGrid frame4;

  const OfdmFrameGrid& frame(int n_pilots) const { return n_pilots == 2 ? frame2 : frame4; }
};

FrameSample make_frame_sample(const DatasetSpec& spec, const FrameRecord& record);

Dataset generate_dataset(const DatasetSpec& spec);

// "UWDS" container.
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path);

// uniform: plain MSE. snr: each pair weighted by 10^(snr/10), rescaled to
// mean 1, so every SNR contributes its error relative to its noise level.
enum class LossWeighting { uniform, snr };

std::string to_string(LossWeighting w);
LossWeighting parse_loss_weighting(const std::string& name);

std::vector<TrainingPair> csrnet_training_pairs(const Dataset& ds, Split split, int n_pilots,
                                                std::optional<double> snr_db = std::nullopt,
                                                LossWeighting weighting = LossWeighting::uniform);
std::vector<MlpSample> mlp_training_samples(const Dataset& ds, Split split, int n_pilots,
                                            std::optional<double> snr_db = std::nullopt);

enum class Method { ls, dnn, csrnet, full_csi };

std::string method_name(Method m);
Method parse_method(const std::string& name);

struct ExperimentConfig {
  Method method = Method::ls;
  int n_pilots = 4;  // ignored by FullCsi

  // "LS-4", "CSRNet-2", "FullCsi"
  std::string label() const;
  static ExperimentConfig parse(const std::string& label);
};

struct ModelSet {
  std::map<int, CsrnetCheckpoint> csrnet;  // by pilot count
  std::map<int, MlpCheckpoint> dnn;

  bool has(const ExperimentConfig& cfg) const;
};

CsiMatrix estimate_csi(const ExperimentConfig& cfg, const FrameSample& sample, const ModelSet& models);

// ||H_est - H||_F^2 / (S M)
double frame_mse(const CsiMatrix& estimate, const CsiMatrix& truth);
double evaluate_mse(std::span<const CsiMatrix> estimates, std::span<const CsiMatrix> truths);

double frame_ber(const OfdmFrameGrid& frame, const CsiMatrix& estimate);
double evaluate_ber(std::span<const OfdmFrameGrid> frames, std::span<const CsiMatrix> estimates);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Percentile bootstrap of the mean.
Interval bootstrap_mean_ci(std::span<const double> values, std::size_t resamples,
                           std::uint64_t seed, double level = 0.95);

struct ResultRow {
  std::string method;
  int pilots = 0;
  double snr_db = 0.0;
  double mse = 0.0;
  double ber = 0.0;
  std::size_t n_frames = 0;
  double ci_low = 0.0;  // bootstrap interval of the MSE
  double ci_high = 0.0;
};

struct ResultTable {
  std::vector<ResultRow> rows;

  // method,pilots,snr_db,mse,ber,n_frames,ci_low,ci_high
  std::string to_csv() const;
};

// Per-frame metrics of one configuration at one SNR.
struct MetricSeries {
  std::vector<double> mse;
  std::vector<double> ber;
};

// Evaluates every config on the given records at snr_db (each frame
// regenerated with the same channel, payload and noise seeds).
std::map<std::string, MetricSeries> evaluate_frames(const DatasetSpec& spec,
                                                    std::span<const FrameRecord> records,
                                                    std::span<const ExperimentConfig> configs,
                                                    double snr_db, const ModelSet& models);

struct SuiteOptions {
  Split split = Split::test;
  std::size_t bootstrap_resamples = 1000;
  std::uint64_t seed = 1;
};

// Full cross product of configs x snr_grid over one split, rows sorted by
// (method, pilots, snr).
ResultTable run_suite(const Dataset& ds, std::span<const ExperimentConfig> configs,
                      std::span<const double> snr_grid, const ModelSet& models,
                      const SuiteOptions& options = {});

}  // namespace uwcsr
