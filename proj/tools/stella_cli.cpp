#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "stella/catalogue.hpp"
#include "stella/mission_sim.hpp"
#include "stella/pipeline.hpp"

namespace fs = std::filesystem;
using namespace stella;

namespace {

void add_config_option(CLI::App* cmd, std::string& config_path) {
  cmd->add_option("--config", config_path, "Config file (TOML subset)")
      ->check(CLI::ExistingFile);
}

pipeline::RunConfig load_run_config(const std::string& config_path) {
  pipeline::RunConfig cfg;
  if (!config_path.empty()) pipeline::apply_config_file(config_path, cfg);
  return cfg;
}

void write_solar_bins_csv(const pipeline::Summary& summary,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write bins file: " + path);
  out << "solar_lo_deg,solar_hi_deg,total,ok,surf_err_avg_m,surf_err_median_m,"
         "surf_err_std_m,surf_err_rms_m\n";
  for (const auto& b : summary.solar_bins) {
    out << b.lo << ',' << b.hi << ',' << b.total_count << ',' << b.ok_count
        << ',' << b.surface_error.average << ',' << b.surface_error.median
        << ',' << b.surface_error.std_dev << ',' << b.surface_error.rms
        << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crater-based navigation pipeline"};
  app.require_subcommand(1);

  std::string config_path, out_path, frames_path, catalogue_path,
      reports_path, positions_path, bins_path, out_dir;
  std::uint64_t seed = 0;
  int min_inliers = -1;
  int cat_count = 80'000;
  std::uint64_t cat_seed = 1;
  double cat_min_d = 2'000.0, cat_max_d = 20'000.0;
  int n_threads = 0;

  auto* simulate = app.add_subcommand(
      "simulate", "Generate a mission schedule (frames-CSV)");
  add_config_option(simulate, config_path);
  simulate->add_option("-o,--out", out_path, "Output frames-CSV")->required();

  auto* gen_cat = app.add_subcommand(
      "gen-catalogue", "Generate a random synthetic crater catalogue");
  gen_cat->add_option("-n,--count", cat_count, "Number of craters");
  gen_cat->add_option("--seed", cat_seed, "RNG seed");
  gen_cat->add_option("--min-diameter", cat_min_d, "Min diameter [m]");
  gen_cat->add_option("--max-diameter", cat_max_d, "Max diameter [m]");
  gen_cat->add_option("-o,--out", out_path, "Output catalogue-CSV")->required();

  auto* run_core = app.add_subcommand(
      "run-core", "Per-frame pose estimation over a schedule");
  add_config_option(run_core, config_path);
  run_core->add_option("--frames", frames_path, "Input frames-CSV")
      ->required()
      ->check(CLI::ExistingFile);
  run_core->add_option("--catalogue", catalogue_path, "Catalogue-CSV")
      ->check(CLI::ExistingFile);
  run_core->add_option("--seed", seed, "Run seed")->required();
  run_core->add_option("--min-inliers", min_inliers,
                       "Gate threshold (0 disables the gate)");
  run_core->add_option("--threads", n_threads, "Worker threads (0 = auto)");
  run_core->add_option("--out-dir", out_dir, "Run directory root")
      ->default_val("runs");

  auto* run_od = app.add_subcommand(
      "run-od", "Fit one orbit to core estimates and refine all positions");
  run_od->add_option("--reports", reports_path, "Input reports-CSV")
      ->required()
      ->check(CLI::ExistingFile);
  run_od->add_option("-o,--out", out_path, "Output positions-CSV")->required();

  auto* report = app.add_subcommand(
      "report", "Summarize a run (summary JSON + per-bin CSV)");
  report->add_option("--reports", reports_path, "Input reports-CSV")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--frames", frames_path, "Truth frames-CSV")
      ->required()
      ->check(CLI::ExistingFile);
  report->add_option("--positions", positions_path,
                     "Refined positions-CSV (optional)")
      ->check(CLI::ExistingFile);
  report->add_option("-o,--out", out_path, "Output summary JSON")->required();
  report->add_option("--bins", bins_path, "Output solar-bin CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      const auto cfg = load_run_config(config_path);
      int raw = 0;
      const auto frames = mission_sim::generate_schedule(cfg.mission, kMuMoon,
                                                         &raw);
      mission_sim::save_frames(frames, out_path);
      std::cout << "raw frames: " << raw << "\nretained: " << frames.size()
                << "\nwrote " << out_path << "\n";
    } else if (gen_cat->parsed()) {
      const auto cat = catalogue::synthetic_catalogue(cat_count, cat_seed,
                                                      cat_min_d, cat_max_d);
      catalogue::save_catalogue(cat, out_path);
      std::cout << "wrote " << cat.size() << " craters to " << out_path << "\n";
    } else if (run_core->parsed()) {
      auto cfg = load_run_config(config_path);
      cfg.seed = seed;
      if (min_inliers >= 0) cfg.min_inliers = min_inliers;
      if (!catalogue_path.empty()) cfg.catalogue_path = catalogue_path;
      if (cfg.catalogue_path.empty()) {
        std::cerr << "no catalogue given (flag or config)\n";
        return 1;
      }
      const auto cat = catalogue::load_catalogue(cfg.catalogue_path);
      const auto frames = mission_sim::load_frames(frames_path);

      const fs::path run_dir =
          fs::path(out_dir) / pipeline::config_hash(cfg);
      fs::create_directories(run_dir);
      {
        std::ofstream cfg_out(run_dir / "config.toml");
        cfg_out << pipeline::serialize_config(cfg);
      }

      const auto reports = pipeline::run_batch(frames, cat, cfg, n_threads);
      pipeline::save_reports(reports, (run_dir / "reports.csv").string());
      pipeline::save_summary(pipeline::summarize(reports, frames),
                             (run_dir / "summary.json").string());
      std::cout << "run directory: " << run_dir.string() << "\n";
    } else if (run_od->parsed()) {
      const auto reports = pipeline::load_reports(reports_path);
      std::vector<double> all_times;
      all_times.reserve(reports.size());
      for (const auto& r : reports) all_times.push_back(r.timestamp);
      auto refined = pipeline::run_od(reports, all_times);
      if (!refined) {
        std::cerr << "orbit fit failed\n";
        return 1;
      }
      od::save_positions(refined.value(), out_path);
      std::cout << "wrote " << refined.value().size() << " positions to "
                << out_path << "\n";
    } else if (report->parsed()) {
      const auto reports = pipeline::load_reports(reports_path);
      const auto frames = mission_sim::load_frames(frames_path);
      std::vector<od::TimedPosition> refined;
      if (!positions_path.empty()) refined = od::load_positions(positions_path);
      const auto summary = pipeline::summarize(reports, frames, refined);
      pipeline::save_summary(summary, out_path);
      if (!bins_path.empty()) write_solar_bins_csv(summary, bins_path);
      std::cout << "OK " << summary.n_ok << "/" << summary.n_frames << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
