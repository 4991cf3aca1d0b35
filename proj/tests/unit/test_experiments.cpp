#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "uwcsr/errors.hpp"
#include "uwcsr/estimation.hpp"
#include "uwcsr/experiments.hpp"

using namespace uwcsr;
using Catch::Matchers::WithinAbs;

namespace {

DatasetSpec small_spec(std::size_t n = 10) {
  DatasetSpec s;
  s.n_frames = n;
  s.ofdm.n_subcarriers = 16;
  s.seed = 5;
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const char* name) : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("split counts") {
  const auto big = split_counts(10000, 0.1, 0.1);
  CHECK(big.train == 8000);
  CHECK(big.val == 1000);
  CHECK(big.test == 1000);
  const auto tiny = split_counts(10, 0.1, 0.1);
  CHECK(tiny.train == 8);
  CHECK(tiny.val == 1);
  CHECK(tiny.test == 1);
  const auto odd = split_counts(19, 0.1, 0.1);
  CHECK(odd.train == 17);
  CHECK(odd.val == 1);
}

TEST_CASE("dataset generation is deterministic and round-trips through UWDS") {
  TempDir dir("uwcsr_test_experiments_ds");
  const auto spec = small_spec();
  const auto a = generate_dataset(spec);
  REQUIRE(a.records.size() == 10);
  REQUIRE(a.tensors.size() == 10);
  CHECK(a.indices(Split::train).size() == 8);
  CHECK(a.indices(Split::val).size() == 1);
  CHECK(a.indices(Split::test).size() == 1);
  for (const auto& r : a.records)
    CHECK(std::find(spec.snr_grid.begin(), spec.snr_grid.end(), r.snr_db) != spec.snr_grid.end());

  write_dataset(dir.path / "a.bin", a);
  write_dataset(dir.path / "b.bin", generate_dataset(spec));
  CHECK(slurp(dir.path / "a.bin") == slurp(dir.path / "b.bin"));

  const auto back = read_dataset(dir.path / "a.bin");
  CHECK(back.records == a.records);
  CHECK(back.spec.n_frames == spec.n_frames);
  CHECK(back.spec.seed == spec.seed);
  REQUIRE(back.tensors.size() == a.tensors.size());
  // tensors are stored as float32
  for (std::size_t i = 0; i < a.tensors.size(); ++i)
    for (std::size_t k = 0; k < a.tensors[i].truth.size(); ++k)
      CHECK(back.tensors[i].truth.values()[k] ==
            static_cast<double>(static_cast<float>(a.tensors[i].truth.values()[k])));

  CHECK_THROWS_AS(read_dataset(dir.path / "missing.bin"), MissingArtifact);

  auto other = spec;
  other.seed = 6;
  CHECK_FALSE(generate_dataset(other).records == a.records);
}

TEST_CASE("fixed SNR mode and SNR filtering") {
  auto spec = small_spec(20);
  spec.snr_mode = SnrAssignment::fixed;
  spec.fixed_snr_db = 25.0;
  const auto ds = generate_dataset(spec);
  for (const auto& r : ds.records) CHECK(r.snr_db == 25.0);
  CHECK(ds.indices(Split::train, 25.0).size() == ds.indices(Split::train).size());
  CHECK(ds.indices(Split::train, 10.0).empty());
  CHECK(csrnet_training_pairs(ds, Split::train, 4, 10.0).empty());
  CHECK(mlp_training_samples(ds, Split::train, 2).size() == ds.indices(Split::train).size() * 16);
}

TEST_CASE("estimator dispatch") {
  const auto spec = small_spec();
  const auto ds = generate_dataset(spec);
  const auto sample = make_frame_sample(spec, ds.records[0]);

  ModelSet models;
  CHECK(estimate_csi(ExperimentConfig::parse("FullCsi"), sample, models) == sample.truth);
  CHECK(estimate_csi(ExperimentConfig::parse("LS-2"), sample, models) == ls_baseline(sample.frame2));

  const auto csr = ExperimentConfig::parse("CSRNet-4");
  CHECK_FALSE(models.has(csr));
  models.csrnet[4] = CsrnetCheckpoint{ConvNetwork::zeros(3, 4, 2), 10.0};
  CHECK(models.has(csr));
  const auto zero_net = estimate_csi(csr, sample, models);
  const auto ls = ls_baseline(sample.frame4);
  for (std::size_t k = 0; k < ls.size(); ++k)
    CHECK_THAT(std::abs(zero_net.values()[k] - ls.values()[k]), WithinAbs(0.0, 1e-12));

  CHECK(ExperimentConfig::parse("DNN-2").label() == "DNN-2");
  CHECK_THROWS_AS(ExperimentConfig::parse("LS-3"), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::parse("Kalman-4"), std::invalid_argument);
}

TEST_CASE("MSE metric") {
  CsiMatrix h(4, 3);
  for (std::size_t k = 0; k < h.size(); ++k) h.values()[k] = cplx(0.1 * k, -0.3 + 0.05 * k);
  CHECK(frame_mse(h, h) == 0.0);
  CsiMatrix off = h;
  for (auto& v : off.values()) v += cplx(0.01, 0.0);
  CHECK_THAT(frame_mse(off, h), WithinAbs(1e-4, 1e-15));

  // elementwise recomputation
  CsiMatrix g(4, 3);
  for (std::size_t k = 0; k < g.size(); ++k) g.values()[k] = cplx(std::sin(k), std::cos(3.0 * k));
  double acc = 0.0;
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t m = 0; m < 3; ++m) {
      const double dr = g(s, m).real() - h(s, m).real(), di = g(s, m).imag() - h(s, m).imag();
      acc += dr * dr + di * di;
    }
  CHECK_THAT(frame_mse(g, h), WithinAbs(acc / 12.0, 1e-12));
  const std::vector<CsiMatrix> est{g, off}, truth{h, h};
  CHECK_THAT(evaluate_mse(est, truth), WithinAbs((acc / 12.0 + 1e-4) / 2.0, 1e-12));
}

TEST_CASE("BER metric") {
  auto spec = small_spec();
  const auto ds = generate_dataset(spec);
  for (const auto& r : ds.records) {
    auto rec = r;
    rec.snr_db = kNoiseless;
    const auto s = make_frame_sample(spec, rec);
    CHECK(frame_ber(s.frame4, s.truth) == 0.0);
    CsiMatrix scaled = s.truth;
    for (auto& v : scaled.values()) v *= 2.5;
    CHECK(frame_ber(s.frame2, scaled) == 0.0);
  }
}

TEST_CASE("FullCsi BER does not exceed LS-4 at 10 dB over 200 frames") {
  auto spec = small_spec(200);
  spec.snr_mode = SnrAssignment::fixed;
  spec.fixed_snr_db = 10.0;
  const auto ds = generate_dataset(spec);
  const std::vector<ExperimentConfig> cfgs{ExperimentConfig::parse("FullCsi"),
                                           ExperimentConfig::parse("LS-4")};
  const auto series = evaluate_frames(spec, ds.records, cfgs, 10.0, ModelSet{});
  double full = 0.0, ls = 0.0;
  for (double b : series.at("FullCsi").ber) full += b;
  for (double b : series.at("LS-4").ber) ls += b;
  CHECK(full <= ls);
}

TEST_CASE("bootstrap interval brackets the mean") {
  std::vector<double> v;
  for (int i = 0; i < 50; ++i) v.push_back(std::sin(i * 0.7) + 2.0);
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= 50.0;
  const auto ci = bootstrap_mean_ci(v, 1000, 3);
  CHECK(ci.low <= mean);
  CHECK(ci.high >= mean);
  CHECK(ci.high - ci.low < 1.0);
  const auto again = bootstrap_mean_ci(v, 1000, 3);
  CHECK(again.low == ci.low);
  CHECK(again.high == ci.high);
}

TEST_CASE("run_suite shape and ordering") {
  const auto spec = small_spec();
  const auto ds = generate_dataset(spec);
  const std::vector<double> one_snr{10.0};
  CHECK(run_suite(ds, std::span<const ExperimentConfig>{}, one_snr, ModelSet{}).rows.empty());

  const std::vector<ExperimentConfig> single{ExperimentConfig::parse("LS-4")};
  const auto t1 = run_suite(ds, single, one_snr, ModelSet{});
  REQUIRE(t1.rows.size() == 1);
  CHECK(t1.rows[0].method == "LS");
  CHECK(t1.rows[0].pilots == 4);
  CHECK(t1.rows[0].n_frames == 1);
  CHECK(t1.rows[0].ci_low <= t1.rows[0].mse);
  CHECK(t1.rows[0].ci_high >= t1.rows[0].mse);

  const std::vector<ExperimentConfig> many{ExperimentConfig::parse("LS-4"), ExperimentConfig::parse("FullCsi"),
                                           ExperimentConfig::parse("LS-2")};
  const std::vector<double> snrs{20.0, 0.0};
  const auto t = run_suite(ds, many, snrs, ModelSet{});
  REQUIRE(t.rows.size() == 6);
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    const auto& a = t.rows[i - 1];
    const auto& b = t.rows[i];
    CHECK(std::tie(a.method, a.pilots, a.snr_db) < std::tie(b.method, b.pilots, b.snr_db));
  }
  const auto csv = t.to_csv();
  CHECK(csv.rfind("method,pilots,snr_db,mse,ber,n_frames,ci_low,ci_high\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

  const std::vector<ExperimentConfig> learned{ExperimentConfig::parse("CSRNet-2")};
  CHECK_THROWS(run_suite(ds, learned, snrs, ModelSet{}));
}

TEST_CASE("SNR loss weighting") {
  auto spec = small_spec(40);
  spec.snr_grid = {0, 10};
  const auto ds = generate_dataset(spec);
  const auto uniform = csrnet_training_pairs(ds, Split::train, 4);
  for (const auto& p : uniform) CHECK(p.weight == 1.0);
  const auto weighted = csrnet_training_pairs(ds, Split::train, 4, std::nullopt, LossWeighting::snr);
  REQUIRE(weighted.size() == uniform.size());
  double total = 0.0, w0 = 0.0, w10 = 0.0;
  const auto idx = ds.indices(Split::train);
  for (std::size_t k = 0; k < weighted.size(); ++k) {
    total += weighted[k].weight;
    (ds.records[idx[k]].snr_db == 0.0 ? w0 : w10) = weighted[k].weight;
  }
  CHECK_THAT(total / static_cast<double>(weighted.size()), WithinAbs(1.0, 1e-12));
  REQUIRE(w0 > 0.0);
  REQUIRE(w10 > 0.0);
  CHECK_THAT(w10 / w0, WithinAbs(10.0, 1e-9));
  CHECK(parse_loss_weighting("snr") == LossWeighting::snr);
  CHECK_THROWS_AS(parse_loss_weighting("flat"), std::invalid_argument);
}
