// Command-line front end: Monte Carlo bounce images, scattering-theory
// tables, and the sigma_vy grid-scan inference.
//
// Exit codes: 0 success, 2 usage, 3 configuration, 4 I/O.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evmirror/evmirror.hpp"

namespace fs = std::filesystem;
using namespace evmirror;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitIo = 4;

struct Manifest {
  std::string subcommand;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
  const SimulationConfig* config = nullptr;

  void write(const fs::path& dir) const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const fs::path path = dir / "manifest.txt";
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest: " + path.string());
    out << "subcommand = " << subcommand << "\n"
        << "version = " << kVersion << "\n"
        << "seed = " << seed << "\n"
        << "wall_clock_s = " << cfgio::format_g17(wall) << "\n";
    out << "outputs =";
    for (const auto& f : outputs) out << " " << f;
    out << "\n";
    if (config) {
      out << "\n# config snapshot\n";
      save_config(*config, out);
    }
    out.flush();
    if (!out) throw IoError("failed while writing manifest: " + path.string());
  }
};

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
  // Probe writability up front so failures surface before any simulation.
  const fs::path probe = fs::path(dir) / ".write_probe";
  {
    std::ofstream p(probe);
    if (!p) throw IoError("output directory not writable: " + dir);
  }
  fs::remove(probe, ec);
  return {dir};
}

std::string format_ms_tag(double tof_s) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", tof_s * 1e3);
  return buf;
}

SimulationConfig load_and_validate(const std::string& config_path) {
  SimulationConfig cfg = load_config(config_path);
  if (auto violations = validate_config(cfg); !violations.empty()) {
    std::string msg = config_path + ": invalid configuration:";
    for (const auto& v : violations) msg += "\n  " + v.field + ": " + v.message;
    throw ConfigError(msg);
  }
  return cfg;
}

int cmd_simulate(const std::string& config_path, const std::vector<double>& tof_ms,
                 bool seed_given, std::uint64_t seed_flag, const std::string& out_dir,
                 bool superimpose, bool dump_ensemble, bool poisson, unsigned threads) {
  SimulationConfig cfg = load_and_validate(config_path);
  const std::uint64_t seed = seed_given ? seed_flag : cfg.seed;
  std::vector<double> tofs = cfg.time_of_flight;
  if (!tof_ms.empty()) {
    tofs.clear();
    for (double t : tof_ms) tofs.push_back(t * 1e-3);
  }
  for (double t : tofs)
    if (!(t >= 0.0)) throw ConfigError("time of flight must be >= 0");

  const fs::path dir = prepare_out_dir(out_dir);
  Manifest manifest;
  manifest.subcommand = "simulate";
  manifest.seed = seed;
  manifest.config = &cfg;

  AbsorptionImage composite;
  bool have_composite = false;
  for (double tof : tofs) {
    const BounceExperiment exp = simulate_bounce_experiment(cfg, tof, seed, threads);
    AbsorptionImage img = render_image(exp.ensemble, cfg.imaging, threads);
    if (poisson) apply_poisson_noise(img, seed);
    const std::string tag = format_ms_tag(tof);

    const fs::path pgm = dir / ("sim_tof" + tag + "ms.pgm");
    write_image_pgm(img, pgm.string());
    manifest.outputs.push_back(pgm.filename().string());
    manifest.outputs.push_back(pgm.stem().string() + ".txt");

    const fs::path csv = dir / ("profile_tof" + tag + "ms.csv");
    {
      const DensityProfile prof = extract_z_profile(img, cfg.imaging.region_x, cfg.imaging.region_z);
      std::ofstream out(csv);
      if (!out) throw IoError("cannot write profile: " + csv.string());
      write_profile_csv(prof, out);
    }
    manifest.outputs.push_back(csv.filename().string());

    if (dump_ensemble) {
      const fs::path ecsv = dir / ("ensemble_tof" + tag + "ms.csv");
      std::ofstream out(ecsv);
      if (!out) throw IoError("cannot write ensemble dump: " + ecsv.string());
      write_ensemble_csv(exp.ensemble, out);
      manifest.outputs.push_back(ecsv.filename().string());
    }

    std::printf("tof %s ms: bounced %zu/%zu atoms (%zu kick resamples), %zu outside field\n",
                tag.c_str(), exp.record.n_bounced, exp.ensemble.size(),
                exp.record.n_energy_clamped, img.dropped);

    if (superimpose) {
      if (!have_composite) {
        composite = img;
        composite.time = 0.0;
        have_composite = true;
      } else {
        for (std::size_t k = 0; k < composite.data.size(); ++k) composite.data[k] += img.data[k];
        composite.dropped += img.dropped;
      }
    }
  }

  if (superimpose && have_composite) {
    const fs::path pgm = dir / "sim_composite.pgm";
    write_image_pgm(composite, pgm.string());
    manifest.outputs.push_back(pgm.filename().string());
    manifest.outputs.push_back(pgm.stem().string() + ".txt");
  }

  manifest.write(dir);
  return kExitOk;
}

bool parse_grid(const std::vector<std::string>& tokens, std::vector<double>& out) {
  for (const std::string& tok : tokens) {
    if (tok.find(':') != std::string::npos) {  // start:step:stop
      double start, step, stop;
      if (std::sscanf(tok.c_str(), "%lf:%lf:%lf", &start, &step, &stop) != 3 || step <= 0.0 ||
          stop < start)
        return false;
      for (double v = start; v <= stop + 1e-12 * step; v += step) out.push_back(v);
    } else {
      double v;
      if (!cfgio::parse_double_token(tok, v)) return false;
      out.push_back(v);
    }
  }
  return true;
}

int cmd_theory(const std::vector<std::string>& alpha_tokens,
               const std::vector<std::string>& eta_tokens, bool benchmark_point, double z0_nm,
               const std::string& out_dir) {
  std::vector<double> alphas, etas;
  if (!parse_grid(alpha_tokens, alphas) || !parse_grid(eta_tokens, etas)) {
    std::fprintf(stderr, "theory: invalid grid (use comma lists or start:step:stop)\n");
    return kExitUsage;
  }
  if (benchmark_point) {
    alphas = {4.0};
    etas = {1.66};
  }
  if (alphas.empty() || etas.empty()) {
    std::fprintf(stderr, "theory: empty grid; provide --alpha-grid and --eta-grid\n");
    return kExitUsage;
  }

  const fs::path dir = prepare_out_dir(out_dir);
  Manifest manifest;
  manifest.subcommand = "theory";

  const fs::path csv_path = dir / "theory_chi.csv";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path.string());
  csv << "alpha,eta,chi,status\n";
  for (double alpha : alphas)
    for (double eta : etas) {
      csv << cfgio::format_g17(alpha) << ',' << cfgio::format_g17(eta) << ',';
      try {
        const AnisotropyResult r = anisotropy_chi(alpha, eta);
        csv << cfgio::format_g17(r.chi) << ",ok\n";
        std::printf("alpha %-6g eta %-6g chi %.6f\n", alpha, eta, r.chi);
      } catch (const std::exception& e) {
        csv << ',' << "error: " << e.what() << "\n";
        std::fprintf(stderr, "alpha %g eta %g: %s\n", alpha, eta, e.what());
      }
    }
  csv.flush();
  if (!csv) throw IoError("failed while writing " + csv_path.string());
  manifest.outputs.push_back(csv_path.filename().string());

  if (benchmark_point) {
    // Bound chain at the reference operating point: 3.3 nm rms roughness,
    // 93.8 nm decay length, release from 3.6 mm, turning point z0.
    PhysicalConstants pc;
    const double sigma_s = 3.3e-9;
    const double kappa = 1.0 / 93.8e-9;
    const double h0 = 3.6e-3;
    const double z0 = z0_nm * 1e-9;
    const double lambda_L = 780e-9;
    const double v_rec = pc.h_planck / (pc.m_atom * lambda_L);
    const double v_impact = std::sqrt(2.0 * pc.g * h0);
    const double lambda_dB = pc.h_planck / (pc.m_atom * v_impact);
    const WmaxBound wmax = wmax_bound(sigma_s, kappa, z0, lambda_dB);
    const double svx = sigma_vx_bound(wmax.value, 4.0, 1.66, v_rec);

    const fs::path bounds_path = dir / "theory_bounds.txt";
    std::ofstream bounds(bounds_path);
    if (!bounds) throw IoError("cannot write " + bounds_path.string());
    bounds << "sigma_s_nm = " << cfgio::format_g17(sigma_s * 1e9) << "\n"
           << "decay_length_nm = " << cfgio::format_g17(1e9 / kappa) << "\n"
           << "h0_mm = " << cfgio::format_g17(h0 * 1e3) << "\n"
           << "z0_nm = " << cfgio::format_g17(z0 * 1e9) << "\n"
           << "impact_velocity_m_s = " << cfgio::format_g17(v_impact) << "\n"
           << "lambda_dB_nm = " << cfgio::format_g17(lambda_dB * 1e9) << "\n"
           << "wmax = " << cfgio::format_g17(wmax.value)
           << (wmax.exceeds_unity ? "  # exceeds 1, bound uninformative" : "") << "\n"
           << "sigma_vx_bound_m_s = " << cfgio::format_g17(svx) << "\n"
           << "sigma_vx_bound_over_v_rec = " << cfgio::format_g17(svx / v_rec) << "\n";
    bounds.flush();
    if (!bounds) throw IoError("failed while writing " + bounds_path.string());
    manifest.outputs.push_back(bounds_path.filename().string());
    std::printf("bound chain: lambda_dB %.4g nm, wmax %.4g, sigma_vx %.4g v_rec\n",
                lambda_dB * 1e9, wmax.value, svx / v_rec);
  }

  manifest.write(dir);
  return kExitOk;
}

int cmd_infer(const std::string& reference_path, const std::string& config_path,
              const std::vector<double>& candidates_mm_s, bool seed_given,
              std::uint64_t seed_flag, const std::string& out_dir, unsigned threads) {
  if (candidates_mm_s.size() < 2) {
    std::fprintf(stderr, "infer: need at least 2 --candidates values (mm/s)\n");
    return kExitUsage;
  }
  SimulationConfig cfg = load_and_validate(config_path);
  const std::uint64_t seed = seed_given ? seed_flag : cfg.seed;
  std::vector<double> candidates;
  for (double c : candidates_mm_s) candidates.push_back(c * 1e-3);

  const AbsorptionImage reference = read_image_pgm(reference_path);
  const InferenceReport report = infer_sigma_vy(reference, cfg, candidates, seed, threads);

  const fs::path dir = prepare_out_dir(out_dir);
  Manifest manifest;
  manifest.subcommand = "infer";
  manifest.seed = seed;
  manifest.config = &cfg;

  const fs::path csv_path = dir / "infer_report.csv";
  {
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("cannot write " + csv_path.string());
    csv << "sigma_vy_m_s,residual\n";
    for (std::size_t k = 0; k < report.candidates.size(); ++k)
      csv << cfgio::format_g17(report.candidates[k]) << ','
          << cfgio::format_g17(report.residuals[k]) << '\n';
    csv.flush();
    if (!csv) throw IoError("failed while writing " + csv_path.string());
  }
  manifest.outputs.push_back(csv_path.filename().string());

  const fs::path sum_path = dir / "infer_summary.txt";
  {
    std::ofstream sum(sum_path);
    if (!sum) throw IoError("cannot write " + sum_path.string());
    sum << "reference = " << reference_path << "\n"
        << "seed = " << seed << "\n"
        << "best_sigma_vy_m_s = " << cfgio::format_g17(report.best_sigma_vy) << "\n"
        << "chi = " << cfgio::format_g17(report.chi) << "\n"
        << "bracket_low_m_s = " << cfgio::format_g17(report.bracket_low) << "\n"
        << "bracket_high_m_s = " << cfgio::format_g17(report.bracket_high) << "\n"
        << "bracket_band_factor = " << cfgio::format_g17(detail::kBracketBand) << "\n";
    sum.flush();
    if (!sum) throw IoError("failed while writing " + sum_path.string());
  }
  manifest.outputs.push_back(sum_path.filename().string());

  std::printf("best sigma_vy = %g mm/s (chi = %g), bracket [%g, %g] mm/s\n",
              report.best_sigma_vy * 1e3, report.chi, report.bracket_low * 1e3,
              report.bracket_high * 1e3);
  manifest.write(dir);
  return kExitOk;
}

int cmd_validate(const std::string& config_path) {
  SimulationConfig cfg = load_config(config_path);
  const auto violations = validate_config(cfg);
  if (!violations.empty()) {
    std::fprintf(stderr, "%s: %zu violation(s):\n", config_path.c_str(), violations.size());
    for (const auto& v : violations)
      std::fprintf(stderr, "  %s: %s\n", v.field.c_str(), v.message.c_str());
    return kExitConfig;
  }
  std::printf("%s: configuration valid (%zu atoms, %zu time-of-flight entries)\n",
              config_path.c_str(), cfg.ensemble.n_atoms, cfg.time_of_flight.size());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo simulator and theory toolkit for atom reflection off a rough "
               "evanescent-wave mirror"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", reference_path;
  std::vector<double> tof_ms, candidates_mm_s;
  std::uint64_t seed = kDefaultSeed;
  unsigned threads = 1;
  bool superimpose = false, dump_ensemble = false, poisson = false, benchmark_point = false;
  std::vector<std::string> alpha_tokens, eta_tokens;
  double z0_nm = 132.0;

  auto* sim = app.add_subcommand("simulate", "Run the bounce experiment and write images");
  sim->add_option("--config", config_path, "configuration file")->required();
  sim->add_option("--tof", tof_ms, "times of flight in ms (overrides the config schedule)")
      ->delimiter(',');
  auto* sim_seed = sim->add_option("--seed", seed, "random seed (overrides the config)");
  sim->add_option("--out-dir", out_dir, "output directory");
  sim->add_flag("--superimpose", superimpose, "also write the summed composite image");
  sim->add_flag("--dump-ensemble", dump_ensemble, "also write per-atom CSV dumps");
  sim->add_flag("--poisson-noise", poisson, "apply per-pixel Poisson noise to images");
  sim->add_option("--threads", threads, "worker threads, 0 = all cores");

  auto* theory = app.add_subcommand("theory", "Tabulate the scattering anisotropy chi");
  theory->add_option("--alpha-grid", alpha_tokens, "alpha values (comma list or start:step:stop)")
      ->delimiter(',');
  theory->add_option("--eta-grid", eta_tokens, "eta values (comma list or start:step:stop)")
      ->delimiter(',');
  theory->add_flag("--benchmark-point", benchmark_point,
                   "single row alpha=4, eta=1.66 plus the diffuse-reflection bound chain");
  theory->add_option("--z0-nm", z0_nm, "turning-point height for the bound chain (nm)");
  theory->add_option("--out-dir", out_dir, "output directory");

  auto* infer = app.add_subcommand("infer", "Recover sigma_vy from a reference image");
  infer->add_option("reference", reference_path, "reference image (.pgm with sidecar)")
      ->required();
  infer->add_option("--config", config_path, "configuration file")->required();
  infer->add_option("--candidates", candidates_mm_s, "candidate sigma_vy values in mm/s")
      ->delimiter(',')
      ->required();
  auto* infer_seed = infer->add_option("--seed", seed, "random seed (overrides the config)");
  infer->add_option("--out-dir", out_dir, "output directory");
  infer->add_option("--threads", threads, "worker threads, 0 = all cores");

  auto* validate = app.add_subcommand("validate", "Check a configuration file");
  validate->add_option("--config", config_path, "configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(config_path, tof_ms, sim_seed->count() > 0, seed, out_dir, superimpose,
                          dump_ensemble, poisson, threads);
    if (theory->parsed())
      return cmd_theory(alpha_tokens, eta_tokens, benchmark_point, z0_nm, out_dir);
    if (infer->parsed())
      return cmd_infer(reference_path, config_path, candidates_mm_s, infer_seed->count() > 0, seed,
                       out_dir, threads);
    if (validate->parsed()) return cmd_validate(config_path);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kExitUsage;
}
