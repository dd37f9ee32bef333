// Acceptance gate: one test case per criterion, each printing a single
// [PASS]/[FAIL] line with the measured values and asserting afterwards.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nmfip/nmfip.hpp"
#include "oracle.hpp"
#include "synthetic.hpp"

using namespace nmfip;
namespace fs = std::filesystem;

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
}

std::string fmt(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", value);
  return buf;
}

// Snapshot of one iteration captured through the observer.
struct IterationSnapshot {
  Eigen::MatrixXcd coefs;
  PowerSpectrum power;
  Eigen::MatrixXd basis;
  Eigen::MatrixXd activation;
};

std::vector<IterationSnapshot> run_with_snapshots(
    const Signal& signal, const GapMask& mask, const FramingConfig& framing,
    const TransformPair& pair, const EstimatorConfig& cfg) {
  std::vector<IterationSnapshot> snapshots;
  run_estimator(signal, mask, framing, pair, cfg, nullptr,
                [&](const IterationView& view) {
                  snapshots.push_back({view.coefs, view.power, view.model.basis,
                                       view.model.activation});
                });
  return snapshots;
}

std::string read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string csv_without_wall(const fs::path& path) {
  std::ifstream in(path);
  std::string result, line;
  while (std::getline(in, line)) {
    const auto cut = line.rfind(',');
    if (cut != std::string::npos) result += line.substr(0, cut);
    result += '\n';
  }
  return result;
}

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// First 1-based iteration whose gap SNR reaches 95% of the trace's peak.
int iterations_to_near_peak(const RunTrace& trace) {
  double peak = -1e300;
  for (const auto& r : trace.records)
    if (r.metrics.snr_gap_db && *r.metrics.snr_gap_db > peak)
      peak = *r.metrics.snr_gap_db;
  if (peak <= 0.0) return -1;
  const double threshold = 0.95 * peak;
  for (const auto& r : trace.records)
    if (r.metrics.snr_gap_db && *r.metrics.snr_gap_db >= threshold)
      return r.iteration;
  return -1;
}

}  // namespace

TEST_CASE("criterion 1: posterior conditioning matches the oracle") {
  Stopwatch watch;
  double worst = 0.0;
  std::mt19937_64 meta(424242);
  for (int trial = 0; trial < 50; ++trial) {
    const Index w = 4 + 2 * (trial % 3);  // 4, 6, 8
    const TransformPair pair = make_dft_pair(w, w);
    std::mt19937_64 rng(meta());
    std::lognormal_distribution<double> var(0.0, 1.0);
    std::normal_distribution<double> dist;
    Eigen::VectorXd prior(w);
    for (Index f = 0; f < w; ++f) prior[f] = var(rng);
    std::uniform_int_distribution<Index> count(1, w - 1);
    const Index m = count(rng);
    std::vector<Index> pool(static_cast<std::size_t>(w));
    for (Index i = 0; i < w; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (Index i = 0; i < m; ++i) {
      std::uniform_int_distribution<Index> pick(i, w - 1);
      std::swap(pool[static_cast<std::size_t>(i)],
                pool[static_cast<std::size_t>(pick(rng))]);
    }
    std::vector<Index> observed(pool.begin(), pool.begin() + m);
    std::sort(observed.begin(), observed.end());
    Eigen::VectorXcd values(m);
    for (Index i = 0; i < m; ++i)
      values[i] = std::complex<double>(dist(rng), 0.0);

    const PosteriorFrame post =
        e_step_frame(pair, prior, observed, values, true, 0.0);
    const oracle::Conditional expected =
        oracle::condition(pair.synthesis(), prior, observed, values);
    worst = std::max(worst,
                     (post.mean - expected.mean).cwiseAbs().maxCoeff());
    worst = std::max(
        worst, (*post.cov_full - expected.cov).cwiseAbs().maxCoeff());
  }
  const double elapsed = watch.seconds();
  const bool pass = worst < 1e-10 && elapsed < 5.0;
  report(1, pass,
         "50 instances, W in {4,6,8}; max abs deviation " + fmt(worst) +
             " (limit 1e-10); " + fmt(elapsed) + " s (limit 5)");
  REQUIRE(worst < 1e-10);
  REQUIRE(elapsed < 5.0);
}

TEST_CASE("criterion 2: multiplicative updates never increase the divergence") {
  Stopwatch watch;
  std::mt19937_64 meta(171717);
  double worst_increase = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::mt19937_64 rng(meta());
    std::uniform_int_distribution<Index> fdist(2, 32), ndist(2, 32),
        kdist(1, 5);
    const Index f = fdist(rng), n = ndist(rng), k = kdist(rng);
    std::lognormal_distribution<double> power_dist(0.0, 1.2);
    PowerSpectrum p(f, n);
    for (Index j = 0; j < n; ++j)
      for (Index i = 0; i < f; ++i) p(i, j) = power_dist(rng);
    NmfModel model = init_model(f, k, n, meta(), false);
    double previous =
        is_divergence(p, model.product().cwiseMax(kVarianceFloor));
    for (int inner = 0; inner < 5; ++inner) {
      model = multiplicative_update(model, p, 1);
      const double current =
          is_divergence(p, model.product().cwiseMax(kVarianceFloor));
      worst_increase = std::max(
          worst_increase, (current - previous) / std::max(1.0, std::abs(previous)));
      previous = current;
    }
  }
  const double elapsed = watch.seconds();
  const bool pass = worst_increase <= 1e-9 && elapsed < 10.0;
  report(2, pass,
         "100 (P, model) pairs x 5 inner updates; worst relative increase " +
             fmt(worst_increase) + " (limit 1e-9); " + fmt(elapsed) +
             " s (limit 10)");
  REQUIRE(worst_increase <= 1e-9);
  REQUIRE(elapsed < 10.0);
}

TEST_CASE("criterion 3: em-tf likelihood and am joint objective are monotone") {
  Stopwatch watch;
  double worst = 0.0;
  for (std::uint64_t problem = 0; problem < 5; ++problem) {
    const Signal signal = synthetic::model_signal(64, 3, 40, 1000 + problem);
    const Index length = signal.samples.size();
    const GapMask mask =
        synthetic::random_mask(length, length * 2 / 5, 2000 + problem);
    const TransformPair pair = make_dft_pair(64, 64);
    const FramingConfig framing{64, 32, {}};
    for (Algorithm algorithm : {Algorithm::em_tf, Algorithm::am}) {
      EstimatorConfig cfg;
      cfg.algorithm = algorithm;
      cfg.rank = 3;
      cfg.outer_iters = 20;
      cfg.seed = 3000 + problem;
      cfg.track_objective = true;
      cfg.ridge_scale = 0.0;  // exact objective, exact minimizers
      const EstimatorResult result =
          run_estimator(signal, mask, framing, pair, cfg);
      double previous = std::numeric_limits<double>::infinity();
      for (const IterationRecord& r : result.trace.records) {
        const double current = *r.metrics.nll;
        if (std::isfinite(previous))
          worst = std::max(worst,
                           (current - previous) / std::abs(previous));
        previous = current;
      }
    }
  }
  const double elapsed = watch.seconds();
  const bool pass = worst <= 1e-8 && elapsed < 60.0;
  report(3, pass,
         "5 problems (W=F=64, N=40, 40% missing), 20 iterations each; worst "
         "relative objective increase " +
             fmt(worst) + " (limit 1e-8); " + fmt(elapsed) + " s (limit 60)");
  REQUIRE(worst <= 1e-8);
  REQUIRE(elapsed < 60.0);
}

TEST_CASE("criterion 4: em-tf and em-t coincide on the unitary pair") {
  Stopwatch watch;
  const Signal signal = synthetic::model_signal(64, 3, 40, 4001);
  const Index length = signal.samples.size();
  const GapMask mask = synthetic::random_mask(length, length * 2 / 5, 4002);
  const TransformPair pair = make_dft_pair(64, 64);
  const FramingConfig framing{64, 32, {}};
  EstimatorConfig cfg;
  cfg.rank = 3;
  cfg.outer_iters = 10;
  cfg.seed = 4003;

  cfg.algorithm = Algorithm::em_tf;
  const auto tf = run_with_snapshots(signal, mask, framing, pair, cfg);
  cfg.algorithm = Algorithm::em_t;
  const auto t = run_with_snapshots(signal, mask, framing, pair, cfg);

  double worst = 0.0;
  REQUIRE(tf.size() == t.size());
  for (std::size_t i = 0; i < tf.size(); ++i) {
    worst = std::max(worst,
                     (tf[i].coefs - t[i].coefs).cwiseAbs().maxCoeff());
    worst = std::max(worst,
                     (tf[i].basis - t[i].basis).cwiseAbs().maxCoeff());
    worst = std::max(
        worst, (tf[i].activation - t[i].activation).cwiseAbs().maxCoeff());
  }
  const double elapsed = watch.seconds();
  const bool pass = worst < 1e-9 && elapsed < 30.0;
  report(4, pass,
         "10 iterations on a 64x40 problem; max deviation across coefficients "
         "and factors " +
             fmt(worst) + " (limit 1e-9); " + fmt(elapsed) + " s (limit 30)");
  REQUIRE(worst < 1e-9);
  REQUIRE(elapsed < 30.0);
}

TEST_CASE("criterion 5: em-tf and em-t separate on the redundant pair") {
  const Signal signal = synthetic::model_signal(64, 3, 40, 4001);
  const Index length = signal.samples.size();
  const GapMask mask = synthetic::random_mask(length, length * 2 / 5, 4002);
  const TransformPair pair = make_dft_pair(64, 128);
  const FramingConfig framing{64, 32, {}};
  EstimatorConfig cfg;
  cfg.rank = 3;
  cfg.outer_iters = 10;
  cfg.seed = 4003;

  cfg.algorithm = Algorithm::em_tf;
  const auto tf = run_with_snapshots(signal, mask, framing, pair, cfg);
  cfg.algorithm = Algorithm::em_t;
  const auto t = run_with_snapshots(signal, mask, framing, pair, cfg);

  double largest = 0.0;
  REQUIRE(tf.size() == t.size());
  for (std::size_t i = 0; i < tf.size(); ++i) {
    const double scale = tf[i].power.cwiseAbs().maxCoeff();
    largest = std::max(
        largest, (tf[i].power - t[i].power).cwiseAbs().maxCoeff() / scale);
  }
  const bool pass = largest > 1e-3;
  report(5, pass,
         "F=2W redundant pair, same seeds; largest relative posterior power "
         "gap across iterations " +
             fmt(largest) + " (must exceed 1e-3)");
  REQUIRE(largest > 1e-3);
}

TEST_CASE("criterion 6: the model recovers its own signal at 60% missing") {
  Stopwatch watch;
  const Signal signal = synthetic::model_signal(64, 3, 40, 6301);
  const Index length = signal.samples.size();
  const GapMask mask =
      synthetic::random_mask(length, (length * 3) / 5, 6302);
  const TransformPair pair = make_dft_pair(64, 64);
  const FramingConfig framing{64, 32, {}};

  double snr_em = 0.0, snr_am = 0.0;
  for (Algorithm algorithm : {Algorithm::em_tf, Algorithm::am}) {
    EstimatorConfig cfg;
    cfg.algorithm = algorithm;
    cfg.rank = 3;
    cfg.outer_iters = 30;
    cfg.nmf_inner_iters = 3;
    cfg.seed = 6303;
    const EstimatorResult result =
        run_estimator(signal, mask, framing, pair, cfg, &signal);
    const double snr = *result.trace.records.back().metrics.snr_gap_db;
    (algorithm == Algorithm::em_tf ? snr_em : snr_am) = snr;
  }
  const double elapsed = watch.seconds();
  const bool pass = snr_em >= 10.0 && snr_am >= 10.0 && elapsed < 60.0;
  report(6, pass,
         "K=3, W=F=64, N=40, 60% missing, 30 iterations; gap SNR em-tf " +
             fmt(snr_em) + " dB, am " + fmt(snr_am) +
             " dB (threshold 10); " + fmt(elapsed) + " s (limit 60)");
  REQUIRE(snr_em >= 10.0);
  REQUIRE(snr_am >= 10.0);
  REQUIRE(elapsed < 60.0);
}

TEST_CASE("criterion 7: am reaches its peak no later than em-tf") {
  int favorable = 0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Signal signal = synthetic::model_signal(64, 3, 40, 7000 + seed);
    const Index length = signal.samples.size();
    // Paper-shaped gaps scaled to 64-sample frames: 20-sample gaps with a
    // frame of observed context between them.
    const GapMask mask =
        synthetic::gap_layout(length, 6, 20, 7100 + seed, 64);
    const TransformPair pair = make_dft_pair(64, 64);
    const FramingConfig framing{64, 32, {}};
    EstimatorConfig cfg;
    cfg.rank = 3;
    cfg.outer_iters = 30;
    cfg.seed = 7200 + seed;

    cfg.algorithm = Algorithm::am;
    const RunTrace am_trace =
        run_estimator(signal, mask, framing, pair, cfg, &signal).trace;
    cfg.algorithm = Algorithm::em_tf;
    const RunTrace em_trace =
        run_estimator(signal, mask, framing, pair, cfg, &signal).trace;

    const int am_at = iterations_to_near_peak(am_trace);
    const int em_at = iterations_to_near_peak(em_trace);
    if (am_at > 0 && em_at > 0 && am_at <= em_at) ++favorable;
    per_seed += (per_seed.empty() ? "" : " ") + std::to_string(am_at) + "/" +
                std::to_string(em_at);
  }

  // Capability half: the full-size configuration (4096-sample frames at
  // 44.1 kHz, 50% overlap, sine window, rank 20) must run end to end on a
  // real gap and emit the per-iteration SNR trace used for gap-length
  // comparisons. The gap is frame-aligned so the demonstration stays fast:
  // interior frames are fully missing and boundary frames are half missing.
  const fs::path dir = temp_dir("nmfip_accept_paper");
  const Signal big = synthetic::model_signal(4096, 4, 6, 7777, 44100);
  save_wav(dir / "in.wav", big);
  std::vector<Index> gap_samples;
  for (Index i = 2048; i < 8192; ++i) gap_samples.push_back(i);
  save_gap_mask(dir / "gap.txt",
                make_gap_mask(std::move(gap_samples), big.samples.size()));
  ExperimentSpec spec;
  spec.input_path = dir / "in.wav";
  spec.reference_path = dir / "in.wav";
  spec.degradation = MaskFilePath{dir / "gap.txt"};
  spec.framing = FramingConfig{4096, 2048, {}};
  spec.num_bins = 4096;
  spec.estimator.algorithm = Algorithm::em_tf;
  spec.estimator.rank = 20;
  spec.estimator.outer_iters = 2;
  spec.estimator.nmf_inner_iters = 10;
  spec.estimator.seed = 7;
  spec.out_dir = dir / "out";
  const ExperimentSummary paper_run = run_experiment(spec);
  std::ifstream trace(paper_run.trace_path);
  std::string header;
  std::getline(trace, header);
  int rows = 0;
  bool snr_filled = true;
  std::string line;
  while (std::getline(trace, line)) {
    if (line.empty()) continue;
    ++rows;
    // third field is snr_gap_db
    std::stringstream fields(line);
    std::string field;
    for (int i = 0; i < 3; ++i) std::getline(fields, field, ',');
    if (field.empty()) snr_filled = false;
  }
  const bool capability =
      header ==
          "iter,algorithm,snr_gap_db,nll,rel_solution_change,"
          "rel_objective_change,wall_ms" &&
      rows == 2 && snr_filled && paper_run.final_snr_gap_db.has_value();
  fs::remove_all(dir);

  const bool pass = favorable >= 7 && capability;
  report(7, pass,
         "am-vs-em-tf iterations to 95% of own peak (per seed " + per_seed +
             "): " + std::to_string(favorable) +
             "/10 favorable (need 7); full-size config trace " +
             (capability ? "emitted" : "failed"));
  REQUIRE(favorable >= 7);
  REQUIRE(capability);
}

TEST_CASE("criterion 8: data consistency and realness") {
  double worst_imag = 0.0;
  bool consistent = true;
  for (Algorithm algorithm :
       {Algorithm::em_tf, Algorithm::am, Algorithm::am_to_em_tf}) {
    const Signal signal = synthetic::model_signal(32, 3, 20, 8001);
    const Index length = signal.samples.size();
    const GapMask mask = synthetic::random_mask(length, length / 2, 8002);
    const TransformPair pair = make_dft_pair(32, 32);
    EstimatorConfig cfg;
    cfg.algorithm = algorithm;
    cfg.rank = 3;
    cfg.outer_iters = 8;
    cfg.switch_after = 3;
    cfg.seed = 8003;
    const EstimatorResult result =
        run_estimator(signal, mask, FramingConfig{32, 16, {}}, pair, cfg);
    worst_imag = std::max(worst_imag, result.max_imag_ratio);
    std::size_t k = 0;
    for (Index i = 0; i < length; ++i) {
      if (k < mask.missing.size() && mask.missing[k] == i) {
        ++k;
        continue;
      }
      if (result.restored.samples[i] != signal.samples[i]) consistent = false;
    }
  }
  const bool pass = consistent && worst_imag < 1e-8;
  report(8, pass,
         std::string("observed samples ") +
             (consistent ? "bitwise equal" : "DIFFER") +
             " across em-tf/am/am-to-em-tf; worst pre-overwrite imaginary "
             "residual " +
             fmt(worst_imag) + " (limit 1e-8)");
  REQUIRE(consistent);
  REQUIRE(worst_imag < 1e-8);
}

TEST_CASE("criterion 9: sine-window overlap-add recovers the interior") {
  double worst = 0.0;
  for (Index w : {Index(64), Index(1024), Index(4096)}) {
    const Index hop = w / 2;
    const Index length = 5 * hop + w;
    std::mt19937_64 rng(9000 + static_cast<std::uint64_t>(w));
    std::normal_distribution<double> dist;
    Eigen::VectorXd samples(length);
    for (Index i = 0; i < length; ++i) samples[i] = dist(rng);
    const Signal signal{samples, 44100};
    const GapMask empty = make_gap_mask({}, length);
    const FrameSet frames =
        frame_signal(signal, empty, w, hop, make_sine_window(w));
    const Signal back = overlap_add(frames);
    const double scale = samples.cwiseAbs().maxCoeff();
    const Index interior_end = std::min(length, frames.frames.cols() * hop);
    for (Index t = hop; t < interior_end; ++t)
      worst = std::max(worst,
                       std::abs(back.samples[t] - samples[t]) / scale);
  }
  const bool pass = worst < 1e-10;
  report(9, pass,
         "W in {64, 1024, 4096}; worst relative interior deviation " +
             fmt(worst) + " (limit 1e-10)");
  REQUIRE(worst < 1e-10);
}

TEST_CASE("criterion 10: identical spec and seed give identical artifacts") {
  const fs::path dir = temp_dir("nmfip_accept_det");
  const Signal clean = synthetic::model_signal(32, 3, 20, 10001, 16000);
  save_wav(dir / "in.wav", clean);

  ExperimentSpec spec;
  spec.input_path = dir / "in.wav";
  spec.degradation = RandomDrop{0.5};
  spec.framing = FramingConfig{32, 16, {}};
  spec.estimator.algorithm = Algorithm::am_to_em_tf;
  spec.estimator.rank = 3;
  spec.estimator.outer_iters = 6;
  spec.estimator.switch_after = 2;
  spec.estimator.seed = 10002;
  spec.estimator.track_objective = true;

  spec.out_dir = dir / "a";
  const ExperimentSummary a = run_experiment(spec);
  spec.out_dir = dir / "b";
  const ExperimentSummary b = run_experiment(spec);

  const bool wav_equal = read_bytes(a.restored_path) == read_bytes(b.restored_path);
  const bool csv_equal =
      csv_without_wall(a.trace_path) == csv_without_wall(b.trace_path);
  const bool mask_equal = read_bytes(a.mask_path) == read_bytes(b.mask_path);
  fs::remove_all(dir);

  const bool pass = wav_equal && csv_equal && mask_equal;
  report(10, pass,
         std::string("restored WAV bytes ") +
             (wav_equal ? "identical" : "DIFFER") + ", trace CSV " +
             (csv_equal ? "identical" : "DIFFERS") +
             " (wall_ms column excluded: wall-clock timing is not "
             "repeatable), mask " +
             (mask_equal ? "identical" : "DIFFERS"));
  REQUIRE(wav_equal);
  REQUIRE(csv_equal);
  REQUIRE(mask_equal);
}
