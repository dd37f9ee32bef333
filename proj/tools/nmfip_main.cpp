// Command-line front end: restore missing samples of a WAV file under the
// low-rank Gaussian time-frequency model and write the run artifacts.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nmfip/nmfip.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{
      "Audio inpainting by maximum-likelihood estimation under a low-rank "
      "Gaussian time-frequency model"};

  std::string input;
  std::string out_dir = "out";
  std::string algorithm = "em-tf";
  std::optional<double> drop_fraction;
  std::optional<int> gaps;
  double gap_ms = 20.0;
  double min_context_ms = 0.0;
  std::optional<std::string> mask_path;
  std::optional<std::string> reference_path;
  nmfip::ExperimentSpec spec;
  long long frame_length = 1024;
  std::optional<long long> hop;
  std::optional<long long> bins;

  app.add_option("input", input, "Input WAV file (16-bit PCM or 32-bit float)")
      ->required();
  app.add_option("--out", out_dir, "Output directory for the run artifacts")
      ->capture_default_str();
  app.add_option("--algorithm", algorithm,
                 "Estimator: em-tf, em-t, am, or am-to-em-tf")
      ->check(CLI::IsMember({"em-tf", "em-t", "am", "am-to-em-tf"}))
      ->capture_default_str();
  app.add_option("--rank", spec.estimator.rank, "NMF rank K")
      ->capture_default_str();
  app.add_option("--frame-length", frame_length, "Frame length in samples")
      ->capture_default_str();
  app.add_option("--hop", hop, "Hop size (must be frame-length/2)");
  app.add_option("--bins", bins,
                 "Coefficient bins F (frame-length or twice it)");
  app.add_option("--outer-iters", spec.estimator.outer_iters,
                 "Outer iterations")
      ->capture_default_str();
  app.add_option("--nmf-iters", spec.estimator.nmf_inner_iters,
                 "Multiplicative updates per outer iteration")
      ->capture_default_str();
  app.add_option("--switch-after", spec.estimator.switch_after,
                 "am-to-em-tf: iterations before switching")
      ->capture_default_str();
  app.add_option("--seed", spec.estimator.seed,
                 "Seed for degradation and factor initialization")
      ->capture_default_str();
  app.add_option("--ridge-scale", spec.estimator.ridge_scale,
                 "Relative ridge on the observed-sample covariance")
      ->capture_default_str();
  app.add_option("--drop-fraction", drop_fraction,
                 "Drop this fraction of samples uniformly at random");
  app.add_option("--gaps", gaps, "Number of compact gaps to cut");
  app.add_option("--gap-ms", gap_ms, "Length of each compact gap in ms")
      ->capture_default_str();
  app.add_option("--min-context-ms", min_context_ms,
                 "Minimum observed context between compact gaps in ms")
      ->capture_default_str();
  app.add_option("--mask", mask_path,
                 "File of 0-based missing-sample indices, one per line");
  app.add_option("--reference", reference_path,
                 "Clean reference WAV for SNR columns (with --mask)");
  app.add_flag("--track-objective", spec.estimator.track_objective,
               "Record the exact objective each iteration (slow)");
  app.add_flag("--allow-heuristic", spec.estimator.allow_heuristic,
               "Permit the alternating scheme on non-invertible transforms");
  app.add_flag("--early-stop", spec.estimator.early_stop,
               "Stop after three consecutive relative changes below 1e-6");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // --help exits 0, bad flags exit nonzero
  }

  try {
    const int modes = (drop_fraction ? 1 : 0) + (gaps ? 1 : 0) +
                      (mask_path ? 1 : 0);
    if (modes != 1)
      throw std::invalid_argument(
          "choose exactly one of --drop-fraction, --gaps, --mask");

    spec.input_path = input;
    spec.out_dir = out_dir;
    if (reference_path) spec.reference_path = *reference_path;
    if (drop_fraction) {
      spec.degradation = nmfip::RandomDrop{*drop_fraction};
    } else if (gaps) {
      spec.degradation = nmfip::CompactGaps{*gaps, gap_ms, min_context_ms};
    } else {
      spec.degradation = nmfip::MaskFilePath{*mask_path};
    }
    spec.framing.frame_length = frame_length;
    spec.framing.hop = hop ? *hop : frame_length / 2;
    spec.num_bins = bins ? *bins : 0;
    if (algorithm == "em-tf") spec.estimator.algorithm = nmfip::Algorithm::em_tf;
    if (algorithm == "em-t") spec.estimator.algorithm = nmfip::Algorithm::em_t;
    if (algorithm == "am") spec.estimator.algorithm = nmfip::Algorithm::am;
    if (algorithm == "am-to-em-tf")
      spec.estimator.algorithm = nmfip::Algorithm::am_to_em_tf;

    const nmfip::ExperimentSummary summary = nmfip::run_experiment(spec);

    std::cout << "restored " << summary.missing_count << " samples over "
              << summary.trace.records.size() << " iterations";
    if (summary.final_snr_gap_db)
      std::cout << "; gap SNR " << *summary.final_snr_gap_db << " dB (peak "
                << *summary.peak_snr_gap_db << " dB at iteration "
                << *summary.peak_iteration << ")";
    std::cout << "\nartifacts in " << spec.out_dir.string() << "\n";
    return 0;
  } catch (const nmfip::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const nmfip::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const nmfip::SymmetryError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const nmfip::InfeasibleSpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
