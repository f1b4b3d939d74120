#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "oamtomo/entanglement.hpp"
#include "oamtomo/exp_sim.hpp"
#include "oamtomo/io.hpp"
#include "oamtomo/measurement.hpp"
#include "oamtomo/oam_optics.hpp"
#include "oamtomo/qutrit.hpp"
#include "oamtomo/tomography.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace oamtomo;

// Values the repro summary is checked against, together with the
// comparison tolerances. The statistical lines use roughly three
// standard errors of the default acquisition; the analytic lines use
// the accuracy of the underlying numerics.
struct ReproReference {
  double fidelity = 0.74;
  double alpha = 0.019;
  double beta = -0.058;
  std::array<double, 3> major_diagonals{0.25, 0.37, 0.26};
  double residual = 0.12;
  double witness = 1.0 - 1.5 * 0.74;
  double g2_background_free = 2001.0;
  double g2_observed = 74.6;
};

// A config document is optional for most subcommands; when present its
// keys are checked against the subcommand's schema and any flag given
// on the command line wins over the config value.
class Config {
 public:
  Config() = default;

  static Config load(const fs::path& path, const std::set<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) {
      throw std::invalid_argument("cannot open config " + path.string());
    }
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw std::invalid_argument("config " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) {
      throw std::invalid_argument("config " + path.string() + ": expected a JSON object");
    }
    for (const auto& item : j.items()) {
      if (allowed.find(item.key()) == allowed.end()) {
        throw std::invalid_argument("config " + path.string() + ": unknown key \"" +
                                    item.key() + "\"");
      }
    }
    Config c;
    c.doc_ = std::move(j);
    c.name_ = path.string();
    return c;
  }

  bool has(const char* key) const { return doc_.contains(key); }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_number()) type_error(key, "a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) type_error(key, "finite");
    return x;
  }

  std::int64_t integer(const char* key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_number_integer()) type_error(key, "an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t seed(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      type_error(key, "a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }

  bool flag(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_boolean()) type_error(key, "a boolean");
    return v.get<bool>();
  }

  std::string text(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const auto& v = doc_.at(key);
    if (!v.is_string()) type_error(key, "a string");
    return v.get<std::string>();
  }

  const json& raw(const char* key) const { return doc_.at(key); }

 private:
  [[noreturn]] void type_error(const char* key, const char* what) const {
    throw std::invalid_argument("config " + name_ + ": \"" + key + "\" must be " + what);
  }

  json doc_ = json::object();
  std::string name_ = "(none)";
};

void require_input_file(const fs::path& path, const char* what) {
  if (!fs::exists(path)) {
    throw std::invalid_argument(std::string(what) + " not found: " + path.string());
  }
  if (!fs::is_regular_file(path)) {
    throw std::invalid_argument(std::string(what) + " is not a regular file: " +
                                path.string());
  }
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    out.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / (n - 1));
  }
  return out;
}

fs::path sibling_metadata_path(const fs::path& csv_path) {
  fs::path p = csv_path;
  p.replace_extension(".json");
  return p;
}

// ----- simulate ------------------------------------------------------

DensityMatrix9 state_from_config(const json& desc, const std::string& context) {
  if (!desc.is_object() || desc.size() != 1) {
    throw std::invalid_argument(context +
                                ": rho_true must be an object with exactly one of "
                                "\"file\", \"planted\", \"maximally_mixed\"");
  }
  if (desc.contains("file")) {
    if (!desc.at("file").is_string()) {
      throw std::invalid_argument(context + ": rho_true.file must be a string");
    }
    const fs::path path = desc.at("file").get<std::string>();
    require_input_file(path, "density matrix file");
    return read_density_matrix(path);
  }
  if (desc.contains("maximally_mixed")) {
    if (!desc.at("maximally_mixed").is_boolean() || !desc.at("maximally_mixed").get<bool>()) {
      throw std::invalid_argument(context + ": rho_true.maximally_mixed must be true");
    }
    return DensityMatrix9::maximally_mixed();
  }
  if (desc.contains("planted")) {
    const auto& p = desc.at("planted");
    if (!p.is_object()) {
      throw std::invalid_argument(context + ": rho_true.planted must be an object");
    }
    for (const auto& item : p.items()) {
      if (item.key() != "alpha" && item.key() != "beta" && item.key() != "fidelity" &&
          item.key() != "major_diagonals") {
        throw std::invalid_argument(context + ": rho_true.planted unknown key \"" +
                                    item.key() + "\"");
      }
    }
    for (const char* key : {"alpha", "beta", "fidelity"}) {
      if (!p.contains(key) || !p.at(key).is_number()) {
        throw std::invalid_argument(context + ": rho_true.planted needs numeric \"" +
                                    key + "\"");
      }
    }
    if (!p.contains("major_diagonals") || !p.at("major_diagonals").is_array() ||
        p.at("major_diagonals").size() != 3) {
      throw std::invalid_argument(context +
                                  ": rho_true.planted.major_diagonals must hold 3 numbers");
    }
    std::array<double, 3> majors{};
    for (int k = 0; k < 3; ++k) {
      const auto& v = p.at("major_diagonals")[static_cast<std::size_t>(k)];
      if (!v.is_number()) {
        throw std::invalid_argument(context +
                                    ": rho_true.planted.major_diagonals must hold numbers");
      }
      majors[static_cast<std::size_t>(k)] = v.get<double>();
    }
    return planted_state(p.at("alpha").get<double>(), p.at("beta").get<double>(),
                         p.at("fidelity").get<double>(), majors);
  }
  throw std::invalid_argument(context +
                              ": rho_true must contain \"file\", \"planted\", or "
                              "\"maximally_mixed\"");
}

std::vector<double> background_override_from_config(const Config& cfg, const char* key) {
  if (!cfg.has(key)) return {};
  const auto& v = cfg.raw(key);
  if (!v.is_array() || v.size() != 81) {
    throw std::invalid_argument(std::string("config: \"") + key +
                                "\" must be an array of 81 numbers");
  }
  std::vector<double> out;
  out.reserve(81);
  for (const auto& x : v) {
    if (!x.is_number()) {
      throw std::invalid_argument(std::string("config: \"") + key +
                                  "\" must be an array of numbers");
    }
    out.push_back(x.get<double>());
  }
  return out;
}

struct SimulateArgs {
  std::string config_path;
  std::string out_csv;
  std::string out_metadata;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void run_simulate(const SimulateArgs& args) {
  static const std::set<std::string> kKeys{
      "rho_true",       "excitation_prob", "retrieval_eff",
      "bg_stokes",      "bg_antistokes",   "rep_period_ns",
      "duration_s",     "seed",            "setting_eps",
      "setting_eps_seed", "bg_stokes_override", "bg_antistokes_override"};
  require_input_file(args.config_path, "config");
  const Config cfg = Config::load(args.config_path, kKeys);
  if (!cfg.has("rho_true")) {
    throw std::invalid_argument("config: missing \"rho_true\"");
  }

  SourceModel model;
  model.rho_true = state_from_config(cfg.raw("rho_true"), "config");
  model.excitation_prob = cfg.number("excitation_prob", model.excitation_prob);
  model.retrieval_eff = cfg.number("retrieval_eff", model.retrieval_eff);
  model.bg_stokes = cfg.number("bg_stokes", model.bg_stokes);
  model.bg_antistokes = cfg.number("bg_antistokes", model.bg_antistokes);
  model.rep_period_ns = cfg.number("rep_period_ns", model.rep_period_ns);
  model.duration_s = cfg.number("duration_s", model.duration_s);
  model.bg_stokes_override = background_override_from_config(cfg, "bg_stokes_override");
  model.bg_antistokes_override =
      background_override_from_config(cfg, "bg_antistokes_override");
  model.validate();

  const std::uint64_t seed = args.seed_given ? args.seed : cfg.seed("seed", 0);

  std::vector<ProjectorSetting> settings = projector_set();
  const double eps = cfg.number("setting_eps", 0.0);
  if (eps > 0.0) {
    const std::uint64_t eps_seed = cfg.seed("setting_eps_seed", seed);
    for (auto& s : settings) s = perturb_setting(s, eps, eps_seed);
  }

  const CoincidenceTable table = sample_counts(model, settings, seed);
  const fs::path csv_path = args.out_csv;
  const fs::path meta_path = args.out_metadata.empty()
                                 ? sibling_metadata_path(csv_path)
                                 : fs::path(args.out_metadata);
  write_counts(table, csv_path, meta_path);

  const auto peak = std::max_element(table.counts.begin(), table.counts.end());
  const auto peak_idx = static_cast<int>(peak - table.counts.begin());
  std::cout << "simulated " << table.total_counts() << " coincidences over 81 settings\n"
            << "peak setting (" << peak_idx / 9 << ", " << peak_idx % 9 << ") with "
            << *peak << " counts\n"
            << "counts: " << csv_path.string() << "\nmetadata: " << meta_path.string()
            << "\n";
}

// ----- reconstruct ---------------------------------------------------

struct ReconstructArgs {
  std::string config_path;
  std::string counts_csv;
  std::string counts_metadata;
  std::string out_density;
  std::string out_diagnostics;
  std::string method;
  std::string likelihood;
  std::int64_t max_iter = -1;
  double rel_tol = -1.0;
  std::int64_t trials_override = -1;
  std::int64_t mc_samples = -1;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::int64_t grid_samples = -1;
};

Likelihood parse_likelihood(const std::string& name) {
  if (name == "multinomial") return Likelihood::multinomial;
  if (name == "poisson") return Likelihood::poisson;
  throw std::invalid_argument("likelihood must be \"multinomial\" or \"poisson\", got \"" +
                              name + "\"");
}

void run_reconstruct(const ReconstructArgs& args) {
  static const std::set<std::string> kKeys{
      "likelihood", "max_iter",    "rel_tol", "trials_override",
      "method",     "mc_samples",  "seed",    "grid_samples"};
  Config cfg;
  if (!args.config_path.empty()) {
    require_input_file(args.config_path, "config");
    cfg = Config::load(args.config_path, kKeys);
  }

  require_input_file(args.counts_csv, "counts CSV");
  CoincidenceTable table;
  if (!args.counts_metadata.empty()) {
    require_input_file(args.counts_metadata, "counts metadata");
    table = read_counts(args.counts_csv, args.counts_metadata);
  } else {
    table = read_counts(args.counts_csv);
  }

  const std::string method =
      !args.method.empty() ? args.method : cfg.text("method", "mle");
  if (method != "mle" && method != "linear") {
    throw std::invalid_argument("method must be \"mle\" or \"linear\", got \"" + method +
                                "\"");
  }
  const std::string like_name =
      !args.likelihood.empty() ? args.likelihood : cfg.text("likelihood", "multinomial");
  MleOptions opts;
  opts.likelihood = parse_likelihood(like_name);
  opts.max_iter = static_cast<int>(
      args.max_iter >= 0 ? args.max_iter : cfg.integer("max_iter", opts.max_iter));
  opts.rel_tol = args.rel_tol >= 0.0 ? args.rel_tol : cfg.number("rel_tol", opts.rel_tol);
  opts.trials_override = args.trials_override >= 0
                             ? args.trials_override
                             : cfg.integer("trials_override", 0);
  const std::int64_t mc_samples =
      args.mc_samples >= 0 ? args.mc_samples : cfg.integer("mc_samples", 0);
  const std::uint64_t seed = args.seed_given ? args.seed : cfg.seed("seed", 0);
  const int grid_samples = static_cast<int>(
      args.grid_samples > 0 ? args.grid_samples : cfg.integer("grid_samples", 721));

  const std::vector<ProjectorSetting> settings = projector_set();

  json diag;
  diag["method"] = method;
  diag["total_counts"] = table.total_counts();
  DensityMatrix9 state = DensityMatrix9::maximally_mixed();
  if (method == "linear") {
    const Mat9 raw = linear_inversion(table, settings);
    Eigen::SelfAdjointEigenSolver<Mat9> es(raw);
    diag["linear_min_eigenvalue"] = es.eigenvalues().minCoeff();
    // Clip to the physical cone so the output satisfies the density
    // matrix invariants; the raw minimum eigenvalue is recorded above.
    Eigen::Matrix<double, 9, 1> vals = es.eigenvalues().cwiseMax(0.0);
    const double total = vals.sum();
    if (!(total > 0.0)) {
      throw std::runtime_error("linear inversion produced an empty spectrum");
    }
    vals /= total;
    state = DensityMatrix9::from(es.eigenvectors() * vals.asDiagonal() *
                                 es.eigenvectors().adjoint());
    std::cout << "linear inversion done (raw min eigenvalue "
              << es.eigenvalues().minCoeff() << ", clipped for output)\n";
  } else {
    const TomographyResult fit = mle_reconstruct(table, settings, opts);
    diag["likelihood"] = like_name;
    diag["converged"] = fit.converged;
    diag["iterations"] = fit.iterations;
    diag["nll"] = fit.nll;
    diag["min_eigenvalue"] = fit.min_eigenvalue;
    if (!fit.converged) {
      throw std::runtime_error("maximum-likelihood fit did not converge within " +
                               std::to_string(opts.max_iter) + " iterations");
    }
    state = fit.state();
    std::cout << "mle converged in " << fit.iterations << " iterations, nll " << fit.nll
              << "\n";
    if (mc_samples > 0) {
      const auto derived = [grid_samples](const DensityMatrix9& rho) {
        return optimize_mes(rho, grid_samples).fidelity;
      };
      const MonteCarloStats stats = monte_carlo_errors(
          table, settings, static_cast<int>(mc_samples), derived, seed, opts);
      json mc;
      mc["quantity"] = "optimal_mes_fidelity";
      mc["n_samples"] = mc_samples;
      mc["excluded"] = stats.excluded;
      mc["mean"] = stats.mean;
      mc["stddev"] = stats.stddev;
      mc["ci_low"] = stats.percentile(2.5);
      mc["ci_high"] = stats.percentile(97.5);
      diag["monte_carlo"] = mc;
      std::cout << "monte carlo (" << mc_samples << " resamples): fidelity "
                << stats.mean << " +- " << stats.stddev << "\n";
    }
  }

  write_density_matrix(state, fs::path(args.out_density));
  std::cout << "density matrix: " << args.out_density << "\n";
  if (!args.out_diagnostics.empty()) {
    std::ofstream out(args.out_diagnostics);
    if (!out) {
      throw std::invalid_argument("cannot open " + args.out_diagnostics + " for writing");
    }
    out << diag.dump(2) << '\n';
  }
}

// ----- analyze -------------------------------------------------------

struct AnalyzeArgs {
  std::string config_path;
  std::string density_path;
  std::string out_report;
  std::string counts_csv;
  std::string counts_metadata;
  std::int64_t mc_samples = -1;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::int64_t grid_samples = -1;
  std::string likelihood;
};

void run_analyze(const AnalyzeArgs& args) {
  static const std::set<std::string> kKeys{"mc_samples", "seed", "grid_samples",
                                           "likelihood", "max_iter", "rel_tol"};
  Config cfg;
  if (!args.config_path.empty()) {
    require_input_file(args.config_path, "config");
    cfg = Config::load(args.config_path, kKeys);
  }
  require_input_file(args.density_path, "density matrix");
  const DensityMatrix9 rho = read_density_matrix(fs::path(args.density_path));

  const std::int64_t mc_samples =
      args.mc_samples >= 0 ? args.mc_samples : cfg.integer("mc_samples", 0);
  const std::uint64_t seed = args.seed_given ? args.seed : cfg.seed("seed", 0);
  const int grid_samples = static_cast<int>(
      args.grid_samples > 0 ? args.grid_samples : cfg.integer("grid_samples", 721));

  std::optional<ConfidenceInterval> ci;
  if (mc_samples > 0) {
    if (args.counts_csv.empty()) {
      throw std::invalid_argument(
          "confidence interval requested (--mc-samples) but no counts file given");
    }
    require_input_file(args.counts_csv, "counts CSV");
    CoincidenceTable table;
    if (!args.counts_metadata.empty()) {
      require_input_file(args.counts_metadata, "counts metadata");
      table = read_counts(args.counts_csv, args.counts_metadata);
    } else {
      table = read_counts(args.counts_csv);
    }
    MleOptions opts;
    opts.likelihood = parse_likelihood(
        !args.likelihood.empty() ? args.likelihood : cfg.text("likelihood", "multinomial"));
    opts.max_iter = static_cast<int>(cfg.integer("max_iter", opts.max_iter));
    opts.rel_tol = cfg.number("rel_tol", opts.rel_tol);
    const auto derived = [grid_samples](const DensityMatrix9& sample) {
      return 1.0 - 1.5 * optimize_mes(sample, grid_samples).fidelity;
    };
    const MonteCarloStats stats = monte_carlo_errors(
        table, projector_set(), static_cast<int>(mc_samples), derived, seed, opts);
    ci = ConfidenceInterval{stats.percentile(2.5), stats.percentile(97.5)};
  }

  const WitnessReport report = witness_report(rho, ci, grid_samples);
  write_witness_report(report, fs::path(args.out_report));

  std::cout << std::setprecision(6) << "optimal MES phases: alpha " << report.alpha
            << " pi, beta " << report.beta << " pi\n"
            << "fidelity " << report.fidelity << ", witness " << report.witness;
  if (report.ci.has_value()) {
    std::cout << " (95% CI [" << report.ci->low << ", " << report.ci->high << "])";
  }
  std::cout << "\ncertified Schmidt number >= 3: " << (report.certified ? "yes" : "no")
            << "\nreport: " << args.out_report << "\n";
}

// ----- slm-scan ------------------------------------------------------

struct SlmScanArgs {
  std::string config_path;
  std::string kind;
  double w0 = 0.0;
  bool w0_given = false;
  double s_min = 0.0;
  bool s_min_given = false;
  double s_max = 0.0;
  bool s_max_given = false;
  std::int64_t points = -1;
  std::string out_csv;
  std::int64_t grid_samples = -1;
  double half_extent = -1.0;
  bool normalize = false;
  bool normalize_given = false;
};

void run_slm_scan(const SlmScanArgs& args) {
  static const std::set<std::string> kKeys{"kind",         "w0",     "s_min",
                                           "s_max",        "points", "grid_samples",
                                           "half_extent",  "normalize"};
  Config cfg;
  if (!args.config_path.empty()) {
    require_input_file(args.config_path, "config");
    cfg = Config::load(args.config_path, kKeys);
  }
  const std::string kind = !args.kind.empty() ? args.kind : cfg.text("kind", "");
  if (kind != "vortex-diagonal" && kind != "vortex-axis" && kind != "step") {
    throw std::invalid_argument(
        "kind must be \"vortex-diagonal\", \"vortex-axis\", or \"step\", got \"" + kind +
        "\"");
  }
  const double w0 = args.w0_given ? args.w0 : cfg.number("w0", 1.0);
  const double s_min = args.s_min_given ? args.s_min : cfg.number("s_min", -3.0);
  const double s_max = args.s_max_given ? args.s_max : cfg.number("s_max", 3.0);
  const int points =
      static_cast<int>(args.points > 0 ? args.points : cfg.integer("points", 61));
  if (points < 2 || points > 100000) {
    throw std::invalid_argument("points must lie in [2, 100000]");
  }
  if (!(s_min < s_max)) {
    throw std::invalid_argument("s_min must be less than s_max");
  }
  QuadratureGrid grid;
  grid.samples_per_axis = static_cast<int>(
      args.grid_samples > 0 ? args.grid_samples
                            : cfg.integer("grid_samples", grid.samples_per_axis));
  grid.half_extent =
      args.half_extent > 0.0 ? args.half_extent : cfg.number("half_extent", grid.half_extent);
  grid.validate();
  if (grid.samples_per_axis > 8192) {
    throw std::invalid_argument(
        "grid_samples above 8192 leaves no room for the doubled convergence check");
  }
  const bool normalize =
      args.normalize_given ? args.normalize : cfg.flag("normalize", false);

  const std::vector<double> s_values = linspace(s_min, s_max, points);
  const auto compute = [&](const QuadratureGrid& g) {
    if (kind == "step") return step_scan(w0, s_values, g);
    const VortexPath path =
        kind == "vortex-diagonal" ? VortexPath::diagonal : VortexPath::axis;
    return vortex_scan(w0, path, s_values, g);
  };
  std::vector<ScanPoint> scan = compute(grid);

  // Convergence check: recompute a few points at doubled resolution.
  QuadratureGrid fine = grid;
  fine.samples_per_axis *= 2;
  double max_delta = 0.0;
  for (const int idx : {0, points / 2, points - 1}) {
    const double s = s_values[static_cast<std::size_t>(idx)];
    std::vector<ScanPoint> one;
    if (kind == "step") {
      one = step_scan(w0, {s}, fine);
    } else {
      const VortexPath path =
          kind == "vortex-diagonal" ? VortexPath::diagonal : VortexPath::axis;
      one = vortex_scan(w0, path, {s}, fine);
    }
    max_delta = std::max(max_delta,
                         std::abs(one.front().gaussian_component -
                                  scan[static_cast<std::size_t>(idx)].gaussian_component));
  }
  if (max_delta > 1e-5) {
    throw std::runtime_error(
        "quadrature not converged: doubling the grid moved a checked point by " +
        std::to_string(max_delta) + " (> 1e-5); raise grid_samples");
  }

  if (normalize) scan = normalize_peak(std::move(scan));
  write_scan_csv(scan, fs::path(args.out_csv));
  std::cout << kind << " scan with " << points << " points written to " << args.out_csv
            << " (convergence check: max shift " << max_delta << ")\n";
}

// ----- g2 ------------------------------------------------------------

void print_or_write(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(out_path);
  if (!out) {
    throw std::invalid_argument("cannot open " + out_path + " for writing");
  }
  out << j.dump(2) << '\n';
  std::cout << "report: " << out_path << '\n';
}

// ----- repro ---------------------------------------------------------

struct ReproArgs {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 7;
  bool seed_given = false;
  std::int64_t mc_samples = -1;
  std::int64_t grid_samples = -1;
};

struct SummaryLine {
  std::string name;
  double measured = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

void run_repro(const ReproArgs& args) {
  static const std::set<std::string> kKeys{"seed", "mc_samples", "grid_samples"};
  Config cfg;
  if (!args.config_path.empty()) {
    require_input_file(args.config_path, "config");
    cfg = Config::load(args.config_path, kKeys);
  }
  const std::uint64_t seed = args.seed_given ? args.seed : cfg.seed("seed", 7);
  const int mc_samples = static_cast<int>(
      args.mc_samples > 0 ? args.mc_samples : cfg.integer("mc_samples", 200));
  const int grid_samples = static_cast<int>(
      args.grid_samples > 0 ? args.grid_samples : cfg.integer("grid_samples", 721));

  const fs::path dir = args.out_dir;
  fs::create_directories(dir);

  const ReproReference ref;

  std::cout << "[1/6] planting the reference state and sampling counts\n";
  const DensityMatrix9 planted =
      planted_state(ref.alpha, ref.beta, ref.fidelity, ref.major_diagonals);
  write_density_matrix(planted, dir / "planted_state.json");

  SourceModel model;
  model.rho_true = planted;
  const std::vector<ProjectorSetting> settings = projector_set();
  const CoincidenceTable table = sample_counts(model, settings, seed);
  write_counts(table, dir / "counts.csv", dir / "counts.json");

  std::cout << "[2/6] maximum-likelihood reconstruction\n";
  MleOptions opts;
  const TomographyResult fit = mle_reconstruct(table, settings, opts);
  if (!fit.converged) {
    throw std::runtime_error("repro: reconstruction did not converge");
  }
  const DensityMatrix9 rho_hat = fit.state();
  write_density_matrix(rho_hat, dir / "reconstructed_state.json");

  std::cout << "[3/6] witness optimization with " << mc_samples << " resamples\n";
  const auto witness_of = [grid_samples](const DensityMatrix9& sample) {
    return 1.0 - 1.5 * optimize_mes(sample, grid_samples).fidelity;
  };
  const MonteCarloStats stats =
      monte_carlo_errors(table, settings, mc_samples, witness_of, seed + 1, opts);
  const ConfidenceInterval ci{stats.percentile(2.5), stats.percentile(97.5)};
  const WitnessReport report = witness_report(rho_hat, ci, grid_samples);
  write_witness_report(report, dir / "witness_report.json");

  std::cout << "[4/6] local filtering\n";
  const DensityMatrix9 filtered = local_filter_balance(rho_hat);
  write_density_matrix(filtered, dir / "filtered_state.json");
  const double filtered_fidelity = optimize_mes(filtered, grid_samples).fidelity;

  std::cout << "[5/6] mode-conversion scans\n";
  const std::vector<double> s_values = linspace(-3.0, 3.0, 25);
  const QuadratureGrid grid;
  const std::vector<ScanPoint> step = step_scan(1.0, s_values, grid);
  const std::vector<ScanPoint> vortex =
      vortex_scan(1.0, VortexPath::diagonal, s_values, grid);
  write_scan_csv(step, dir / "step_scan.csv");
  write_scan_csv(vortex, dir / "vortex_scan.csv");
  double step_err = 0.0;
  for (const ScanPoint& pt : step) {
    step_err = std::max(step_err, std::abs(pt.gaussian_component -
                                           step_gaussian_component_exact(pt.s)));
  }
  const double vortex_center =
      vortex[static_cast<std::size_t>(12)].gaussian_component;

  std::cout << "[6/6] photon statistics\n";
  const double g2_free = g2_model(model.excitation_prob, model.retrieval_eff, 0.0, 0.0);
  const double bg =
      g2_invert(ref.g2_observed, model.excitation_prob, model.retrieval_eff, false);
  const double g2_round =
      g2_model(model.excitation_prob, model.retrieval_eff, bg, 0.0);

  const Mat9& m = rho_hat.matrix();
  const double d_lr = m(joint_index(basis::L, basis::r), joint_index(basis::L, basis::r)).real();
  const double d_gg = m(joint_index(basis::G, basis::g), joint_index(basis::G, basis::g)).real();
  const double d_rl = m(joint_index(basis::R, basis::l), joint_index(basis::R, basis::l)).real();
  const double diag_dev = std::max({std::abs(d_lr - ref.major_diagonals[0]),
                                    std::abs(d_gg - ref.major_diagonals[1]),
                                    std::abs(d_rl - ref.major_diagonals[2])});

  std::vector<SummaryLine> lines;
  const auto add = [&lines](const std::string& name, double measured, double reference,
                            double tol) {
    lines.push_back(
        SummaryLine{name, measured, reference, tol, std::abs(measured - reference) <= tol});
  };
  add("optimal_mes_fidelity", report.fidelity, ref.fidelity, 0.04);
  add("witness", report.witness, ref.witness, 0.06);
  add("alpha_pi_units", report.alpha, ref.alpha, 0.08);
  add("beta_pi_units", report.beta, ref.beta, 0.08);
  add("major_diagonal_max_dev", diag_dev, 0.0, 0.04);
  add("residual_weight", residual_weight(rho_hat), ref.residual, 0.04);
  add("filtered_fidelity_shift", filtered_fidelity - report.fidelity, 0.0, 0.03);
  add("g2_background_free", g2_free, ref.g2_background_free, 1e-9);
  add("g2_observed_round_trip", g2_round, ref.g2_observed, 1e-9);
  add("step_scan_max_abs_error", step_err, 0.0, 1e-6);
  add("vortex_center_component", vortex_center, 0.0, 1e-8);

  bool all_pass = true;
  json summary;
  summary["seed"] = seed;
  summary["mc_samples"] = mc_samples;
  summary["ci_low"] = ci.low;
  summary["ci_high"] = ci.high;
  summary["certified"] = report.certified;
  summary["lines"] = json::array();
  std::cout << "\n" << std::left << std::setw(28) << "quantity" << std::right
            << std::setw(14) << "measured" << std::setw(14) << "reference"
            << std::setw(12) << "tolerance" << "  result\n";
  for (const SummaryLine& line : lines) {
    all_pass = all_pass && line.pass;
    json jl;
    jl["name"] = line.name;
    jl["measured"] = line.measured;
    jl["reference"] = line.reference;
    jl["tolerance"] = line.tolerance;
    jl["pass"] = line.pass;
    summary["lines"].push_back(jl);
    std::cout << std::left << std::setw(28) << line.name << std::right
              << std::setw(14) << std::setprecision(6) << line.measured << std::setw(14)
              << line.reference << std::setw(12) << line.tolerance << "  "
              << (line.pass ? "ok" : "OFF") << "\n";
  }
  summary["all_pass"] = all_pass;
  {
    std::ofstream out(dir / "summary.json");
    if (!out) {
      throw std::invalid_argument("cannot open summary.json for writing");
    }
    out << summary.dump(2) << '\n';
  }
  std::cout << "\nwitness 95% CI [" << ci.low << ", " << ci.high << "], certified "
            << (report.certified ? "yes" : "no") << "\nsummary: "
            << (dir / "summary.json").string() << "\n";
  if (!all_pass) {
    throw std::runtime_error("repro: one or more summary lines fell outside tolerance");
  }
}

void report_error(bool error_json, int code, const std::string& message) {
  if (error_json) {
    json j;
    j["error"]["exit_code"] = code;
    j["error"]["message"] = message;
    std::cerr << j.dump() << '\n';
  } else {
    std::cerr << "error: " << message << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Simulation and analysis of qutrit-qutrit orbital-angular-momentum "
      "entanglement experiments: coincidence forward model, maximum-likelihood "
      "tomography, Schmidt-number witness, and SLM mode-conversion curves"};
  app.require_subcommand(1);
  bool error_json = false;
  app.add_flag("--error-json", error_json,
               "emit errors as machine-readable JSON on stderr");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate",
                                   "sample coincidence counts from a source model");
  c_sim->add_option("--config", sim.config_path, "source model config (JSON)")->required();
  c_sim->add_option("--out", sim.out_csv, "output counts CSV")->required();
  c_sim->add_option("--sidecar", sim.out_metadata,
                    "output metadata JSON (default: CSV path with .json)");
  auto* sim_seed = c_sim->add_option("--seed", sim.seed, "RNG seed (overrides config)");

  ReconstructArgs rec;
  auto* c_rec = app.add_subcommand("reconstruct",
                                   "estimate the density matrix from counts");
  c_rec->add_option("--config", rec.config_path, "reconstruction config (JSON)");
  c_rec->add_option("--counts", rec.counts_csv, "input counts CSV")->required();
  c_rec->add_option("--sidecar", rec.counts_metadata, "input metadata JSON");
  c_rec->add_option("--out", rec.out_density, "output density matrix JSON")->required();
  c_rec->add_option("--diagnostics", rec.out_diagnostics, "output diagnostics JSON");
  c_rec->add_option("--method", rec.method, "mle (default) or linear");
  c_rec->add_option("--likelihood", rec.likelihood, "multinomial (default) or poisson");
  c_rec->add_option("--max-iter", rec.max_iter, "iteration cap for the fit");
  c_rec->add_option("--tol", rec.rel_tol, "relative objective-change tolerance");
  c_rec->add_option("--trials", rec.trials_override,
                    "trial count for the poisson likelihood");
  c_rec->add_option("--mc-samples", rec.mc_samples,
                    "bootstrap resamples for the diagnostics block");
  auto* rec_seed = c_rec->add_option("--seed", rec.seed, "RNG seed for resampling");
  c_rec->add_option("--grid-samples", rec.grid_samples,
                    "phase-grid resolution for derived quantities");

  AnalyzeArgs ana;
  auto* c_ana = app.add_subcommand("analyze",
                                   "witness report for a reconstructed state");
  c_ana->add_option("--config", ana.config_path, "analysis config (JSON)");
  c_ana->add_option("--rho", ana.density_path, "input density matrix JSON")->required();
  c_ana->add_option("--out", ana.out_report, "output witness report JSON")->required();
  c_ana->add_option("--counts", ana.counts_csv,
                    "counts CSV for the confidence interval");
  c_ana->add_option("--sidecar", ana.counts_metadata, "counts metadata JSON");
  c_ana->add_option("--mc-samples", ana.mc_samples, "bootstrap resamples for the CI");
  auto* ana_seed = c_ana->add_option("--seed", ana.seed, "RNG seed for resampling");
  c_ana->add_option("--grid-samples", ana.grid_samples, "phase-grid resolution");
  c_ana->add_option("--likelihood", ana.likelihood,
                    "likelihood for CI refits: multinomial (default) or poisson");

  SlmScanArgs scan;
  auto* c_scan = app.add_subcommand("slm-scan",
                                    "mode-conversion curve for a phase mask");
  c_scan->add_option("--config", scan.config_path, "scan config (JSON)");
  c_scan->add_option("--kind", scan.kind,
                     "vortex-diagonal, vortex-axis, or step");
  auto* scan_w0 = c_scan->add_option("--w0", scan.w0, "beam waist (default 1)");
  auto* scan_smin = c_scan->add_option("--s-min", scan.s_min, "scan start in waist units");
  auto* scan_smax = c_scan->add_option("--s-max", scan.s_max, "scan end in waist units");
  c_scan->add_option("--points", scan.points, "number of scan points (default 61)");
  c_scan->add_option("--out", scan.out_csv, "output scan CSV")->required();
  c_scan->add_option("--grid-samples", scan.grid_samples,
                     "quadrature subintervals per axis (default 1024)");
  c_scan->add_option("--half-extent", scan.half_extent,
                     "integration half-extent in waist units (default 8)");
  auto* scan_norm = c_scan->add_flag("--normalize", scan.normalize,
                                     "rescale the curve to unit peak");

  auto* c_g2 = app.add_subcommand("g2", "cross-correlation statistics");
  c_g2->require_subcommand(1);
  struct {
    double p = 5e-4;
    double eta = 0.012;
    double bg_s = 0.0;
    double bg_as = 0.0;
    std::string out;
  } g2m;
  auto* c_g2m = c_g2->add_subcommand("model", "forward g2 from rates");
  c_g2m->add_option("--p", g2m.p, "excitation probability per pulse");
  c_g2m->add_option("--eta", g2m.eta, "retrieval efficiency");
  c_g2m->add_option("--bg-stokes", g2m.bg_s, "Stokes-arm background per pulse");
  c_g2m->add_option("--bg-antistokes", g2m.bg_as, "anti-Stokes-arm background per pulse");
  c_g2m->add_option("--out", g2m.out, "write the report to a file");
  c_g2m->callback([&g2m]() {
    json j;
    j["g2"] = g2_model(g2m.p, g2m.eta, g2m.bg_s, g2m.bg_as);
    print_or_write(j, g2m.out);
  });

  struct {
    double target = 0.0;
    double p = 5e-4;
    double eta = 0.012;
    bool symmetric = false;
    std::string out;
  } g2i;
  auto* c_g2i = c_g2->add_subcommand("invert", "background level that yields a target g2");
  c_g2i->add_option("--target", g2i.target, "target g2")->required();
  c_g2i->add_option("--p", g2i.p, "excitation probability per pulse");
  c_g2i->add_option("--eta", g2i.eta, "retrieval efficiency");
  c_g2i->add_flag("--symmetric", g2i.symmetric, "equal background in both arms");
  c_g2i->add_option("--out", g2i.out, "write the report to a file");
  c_g2i->callback([&g2i]() {
    const double bg = g2_invert(g2i.target, g2i.p, g2i.eta, g2i.symmetric);
    const double round_trip = g2i.symmetric ? g2_model(g2i.p, g2i.eta, bg, bg)
                                            : g2_model(g2i.p, g2i.eta, bg, 0.0);
    json j;
    j["background"] = bg;
    j["symmetric"] = g2i.symmetric;
    j["round_trip_g2"] = round_trip;
    j["round_trip_error"] = std::abs(round_trip - g2i.target);
    print_or_write(j, g2i.out);
  });

  struct {
    std::int64_t stokes = 0;
    std::int64_t antistokes = 0;
    std::int64_t coincidences = 0;
    std::int64_t trials = 0;
    std::string out;
  } g2e;
  auto* c_g2e = c_g2->add_subcommand("estimate", "g2 from raw tallies");
  c_g2e->add_option("--stokes", g2e.stokes, "Stokes singles")->required();
  c_g2e->add_option("--antistokes", g2e.antistokes, "anti-Stokes singles")->required();
  c_g2e->add_option("--coincidences", g2e.coincidences, "coincidences")->required();
  c_g2e->add_option("--trials", g2e.trials, "number of trials")->required();
  c_g2e->add_option("--out", g2e.out, "write the report to a file");
  c_g2e->callback([&g2e]() {
    json j;
    j["g2_estimate"] =
        g2_estimate(g2e.stokes, g2e.antistokes, g2e.coincidences, g2e.trials);
    print_or_write(j, g2e.out);
  });

  ReproArgs rep;
  auto* c_rep = app.add_subcommand(
      "repro", "full pipeline at the reference operating point, with a summary");
  c_rep->add_option("--config", rep.config_path, "repro config (JSON)");
  c_rep->add_option("--out-dir", rep.out_dir, "output directory")->required();
  auto* rep_seed = c_rep->add_option("--seed", rep.seed, "RNG seed (default 7)");
  c_rep->add_option("--mc-samples", rep.mc_samples,
                    "bootstrap resamples for the CI (default 200)");
  c_rep->add_option("--grid-samples", rep.grid_samples,
                    "phase-grid resolution (default 721)");

  c_sim->callback([&]() {
    sim.seed_given = sim_seed->count() > 0;
    run_simulate(sim);
  });
  c_rec->callback([&]() {
    rec.seed_given = rec_seed->count() > 0;
    run_reconstruct(rec);
  });
  c_ana->callback([&]() {
    ana.seed_given = ana_seed->count() > 0;
    run_analyze(ana);
  });
  c_scan->callback([&]() {
    scan.w0_given = scan_w0->count() > 0;
    scan.s_min_given = scan_smin->count() > 0;
    scan.s_max_given = scan_smax->count() > 0;
    scan.normalize_given = scan_norm->count() > 0;
    run_slm_scan(scan);
  });
  c_rep->callback([&]() {
    rep.seed_given = rep_seed->count() > 0;
    run_repro(rep);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    if (code == 0) return 0;
    if (error_json) {
      report_error(true, 2, std::string("usage: ") + e.what());
    }
    return 2;
  } catch (const std::invalid_argument& e) {
    report_error(error_json, 2, e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error(error_json, 1, e.what());
    return 1;
  }
  return 0;
}
