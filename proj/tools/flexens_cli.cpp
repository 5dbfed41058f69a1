// flexens — command-line driver for flexible ensemble execution.
//
// Exit codes: 0 success, 1 usage or validation error, 2 I/O error.
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flexens/calibration.hpp"
#include "flexens/cascade.hpp"
#include "flexens/dataset.hpp"
#include "flexens/error.hpp"
#include "flexens/metrics.hpp"
#include "flexens/synthgen.hpp"

namespace fs = std::filesystem;
using namespace flexens;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitIo = 2;

class Stopwatch {
 public:
  explicit Stopwatch(std::string label)
      : label_(std::move(label)), start_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() {
    auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_);
    std::cerr << "[time] " << label_ << ": " << ms.count() << " ms\n";
  }

 private:
  std::string label_;
  std::chrono::steady_clock::time_point start_;
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, "cannot create " + path.string());
  return out;
}

void finish_output(std::ofstream& out, const fs::path& path) {
  out.flush();
  if (!out) throw Error(ErrorKind::IoFailure, "write failed: " + path.string());
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void print_exit_counts(const EvaluationReport& r) {
  std::cout << "exit counts by ensemble size:";
  for (std::size_t k = 0; k < r.per_stage_exit_counts.size(); ++k)
    std::cout << ' ' << (k + 1) << ':' << r.per_stage_exit_counts[k];
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flexible (early-exit) ensemble classification toolkit", "flexens"};
  app.require_subcommand(1);

  // gen
  SynthConfig gen_cfg;
  double gen_cost = kDefaultCostMs;
  fs::path gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a seeded synthetic ensemble dataset");
  gen->add_option("--models", gen_cfg.num_models, "Number of models N")->required();
  gen->add_option("--samples", gen_cfg.num_samples, "Number of samples M")->required();
  gen->add_option("--classes", gen_cfg.num_classes, "Number of classes C")->required();
  gen->add_option("--seed", gen_cfg.seed, "PRNG seed")->required();
  gen->add_option("--signal", gen_cfg.signal_scale, "True-class signal scale")->capture_default_str();
  gen->add_option("--sigma", gen_cfg.noise_sigma, "Per-model noise sigma")->capture_default_str();
  gen->add_option("--cost-ms", gen_cost, "Cost of every model in ms")->capture_default_str();
  gen->add_option("--out", gen_out, "Output dataset directory")->required();

  // import-csv
  std::vector<fs::path> csv_logits;
  fs::path csv_labels, csv_out;
  std::vector<double> csv_costs;
  auto* import = app.add_subcommand("import-csv", "Convert CSV logits and labels to a dataset");
  import->add_option("--logits", csv_logits, "One CSV file per model")->required();
  import->add_option("--labels", csv_labels, "Label CSV file")->required();
  import->add_option("--costs-ms", csv_costs, "Per-model costs in ms")->required();
  import->add_option("--out", csv_out, "Output dataset directory")->required();

  // validate
  fs::path val_data;
  auto* validate = app.add_subcommand("validate", "Load and validate a dataset");
  validate->add_option("--data", val_data, "Dataset directory or manifest")->required();

  // baseline
  fs::path base_data, base_out;
  auto* baseline = app.add_subcommand("baseline", "Full-ensemble sweep over ensemble sizes 1..N");
  baseline->add_option("--data", base_data, "Dataset directory or manifest")->required();
  baseline->add_option("--out", base_out, "Output sweep CSV")->required();

  // calibrate
  fs::path cal_data, cal_out;
  double cal_alpha = kDefaultAlpha;
  double cal_step = kDefaultGridStep;
  bool cal_same_split = false;
  auto* calib = app.add_subcommand("calibrate", "Grid-search per-stage thresholds");
  calib->add_option("--data", cal_data, "Calibration dataset")->required();
  calib->add_option("--alpha", cal_alpha, "Latency weight in M = a*R + (1-a)*E")->capture_default_str();
  calib->add_option("--grid-step", cal_step, "Threshold grid step")->capture_default_str();
  calib->add_option("--out", cal_out, "Output schedule JSON")->required();
  calib->add_flag("--allow-same-split", cal_same_split,
                  "Permit running this schedule on its calibration dataset");

  // run
  fs::path run_data, run_schedule, run_out;
  bool run_same_split = false;
  auto* run = app.add_subcommand("run", "Flexible execution with a threshold schedule");
  run->add_option("--data", run_data, "Evaluation dataset")->required();
  run->add_option("--schedule", run_schedule, "Schedule JSON")->required();
  run->add_option("--out", run_out, "Output report CSV")->required();
  run->add_flag("--allow-same-split", run_same_split,
                "Permit evaluating on the calibration dataset");

  // histogram
  fs::path hist_data, hist_out;
  std::size_t hist_k = 1;
  std::size_t hist_bins = kDefaultHistogramBins;
  std::size_t hist_limit = 0;
  auto* hist = app.add_subcommand("histogram", "Score-margin histograms by correctness");
  hist->add_option("--data", hist_data, "Dataset directory or manifest")->required();
  hist->add_option("--ensemble-size", hist_k, "Number of models averaged")->required();
  hist->add_option("--bins", hist_bins, "Number of bins")->capture_default_str();
  hist->add_option("--limit", hist_limit, "Use only the first L samples");
  hist->add_option("--out", hist_out, "Output histogram CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    if (app.get_subcommands().empty()) {
      std::cout << app.help("", CLI::AppFormatMode::All);
      return kExitOk;
    }
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) {
      Stopwatch sw("gen");
      gen_cfg.cost_per_model.assign(gen_cfg.num_models, gen_cost);
      auto ds = generate(gen_cfg);
      save_dataset(ds, gen_out);
      std::cout << "wrote " << gen_out.string() << " (N=" << ds.num_models()
                << ", M=" << ds.num_samples() << ", C=" << ds.num_classes() << ")\n";
    } else if (*import) {
      auto ds = import_csv(csv_logits, csv_labels, csv_costs);
      save_dataset(ds, csv_out);
      std::cout << "wrote " << csv_out.string() << " (N=" << ds.num_models()
                << ", M=" << ds.num_samples() << ", C=" << ds.num_classes() << ")\n";
    } else if (*validate) {
      auto ds = load_dataset(val_data);
      std::cout << "N=" << ds.num_models() << " M=" << ds.num_samples()
                << " C=" << ds.num_classes() << " costs_ms=[";
      for (std::size_t i = 0; i < ds.num_models(); ++i)
        std::cout << (i ? "," : "") << format_real(ds.costs_ms()[i]);
      std::cout << "]\nfingerprint=" << hex64(ds.fingerprint()) << "\nok\n";
    } else if (*baseline) {
      auto ds = load_dataset(base_data);
      std::vector<SweepRow> rows;
      {
        Stopwatch sw("baseline");
        rows = ensemble_size_sweep(ds);
      }
      auto out = open_output(base_out);
      write_sweep_csv(out, rows);
      finish_output(out, base_out);
      write_sweep_csv(std::cout, rows);
    } else if (*calib) {
      auto ds = load_dataset(cal_data);
      GridSpec grid(cal_step);
      CalibrationResult result;
      {
        Stopwatch sw("calibrate");
        result = calibrate_detailed(ds, cal_alpha, grid);
      }
      ScheduleFile file;
      file.alpha = cal_alpha;
      file.grid_step = cal_step;
      file.schedule = result.schedule;
      file.calibration_fingerprint = ds.fingerprint();
      file.allow_same_split = cal_same_split;
      save_schedule(file, cal_out);
      std::cout << "thresholds:";
      for (double t : result.schedule.thresholds) std::cout << ' ' << format_real(t);
      std::cout << "\ncalibration R=" << format_real(result.objective.R)
                << " E=" << format_real(result.objective.E)
                << " M=" << format_real(result.objective.M) << '\n';
    } else if (*run) {
      auto ds = load_dataset(run_data);
      auto file = load_schedule(run_schedule);
      if (file.calibration_fingerprint && *file.calibration_fingerprint == ds.fingerprint() &&
          !file.allow_same_split && !run_same_split) {
        std::cerr << "error: " << run_data.string()
                  << " is the calibration dataset of " << run_schedule.string()
                  << "; evaluate on a separate split or pass --allow-same-split\n";
        return kExitUsage;
      }
      std::vector<SweepRow> rows;
      EvaluationReport flex;
      {
        Stopwatch sw("run");
        const std::size_t wrong_full = full_ensemble_errors(ds);
        auto full_traces = run_dataset(ds, ThresholdSchedule::uniform(ds.num_models(), 1.0));
        auto traces = run_dataset(ds, file.schedule);
        flex = report(ds, traces, wrong_full);
        rows.push_back(to_row("full", report(ds, full_traces, wrong_full)));
        rows.push_back(to_row("flexible", flex));
      }
      auto out = open_output(run_out);
      write_sweep_csv(out, rows);
      finish_output(out, run_out);
      write_sweep_csv(std::cout, rows);
      print_exit_counts(flex);
    } else if (*hist) {
      auto ds = load_dataset(hist_data);
      if (hist_limit > 0) ds = ds.head(hist_limit);
      auto h = margin_histogram(ds, hist_k, hist_bins);
      auto out = open_output(hist_out);
      write_histogram_csv(out, h);
      finish_output(out, hist_out);
      std::cout << "mean margin correct=" << format_real(h.mean_margin_correct)
                << " wrong=" << format_real(h.mean_margin_wrong) << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::IoFailure ? kExitIo : kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitOk;
}
