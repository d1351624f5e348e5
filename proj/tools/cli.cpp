#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>

#include "msamp/error.hpp"
#include "msamp/experiment.hpp"
#include "msamp/parallel.hpp"
#include "msamp/rng.hpp"

namespace msamp::cli {

namespace {

namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

struct Globals {
  std::string spec;
  std::uint64_t seed = 1;
  std::string seeds;
  int threads = 0;
  bool json = false;
  std::string out;
  std::string cache_dir;
  bool no_cache = false;
  std::string command;
};

std::vector<double> parse_doubles(const std::string& text, const char* what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InvalidArgument(std::string(what) + ": cannot parse '" + tok + "' as a number");
    }
  }
  if (v.empty()) throw InvalidArgument(std::string(what) + " is empty");
  return v;
}

// "1,2,7" or "1-5".
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      const auto dash = tok.find('-');
      if (dash == std::string::npos) {
        out.push_back(std::stoull(tok));
      } else {
        const auto lo = std::stoull(tok.substr(0, dash));
        const auto hi = std::stoull(tok.substr(dash + 1));
        if (hi < lo || hi - lo > 100000) throw std::invalid_argument(tok);
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::exception&) {
      throw InvalidArgument("--seeds: cannot parse '" + tok + "'");
    }
  }
  if (out.empty()) throw InvalidArgument("--seeds is empty");
  return out;
}

std::vector<std::uint64_t> seed_list(const Globals& g) { return g.seeds.empty() ? std::vector{g.seed} : parse_seeds(g.seeds); }

int thread_count(const Globals& g) { return g.threads > 0 ? g.threads : default_threads(); }

Mixture load_mixture(const Globals& g) {
  if (g.spec.empty()) throw InvalidArgument("--spec is required");
  if (!fs::exists(g.spec)) throw InvalidArgument("spec file not found: " + g.spec);
  return Mixture(load_spec(g.spec));
}

HamiltonianInstance sample(const Globals& g, const Mixture& mix, int N, std::uint64_t seed) {
  if (!g.no_cache && !g.cache_dir.empty()) return sample_cached(mix, N, seed, g.cache_dir);
  return HamiltonianInstance::sample(mix, N, seed);
}

std::optional<PhiPath> resolve_path(const Globals& g, const Mixture& mix, const std::string& phi_file, int grid) {
  if (!phi_file.empty()) {
    if (!fs::exists(phi_file)) throw InvalidArgument("phi file not found: " + phi_file);
    PhiPath path = load_phi(phi_file);
    if (path.r() != mix.r()) throw InvalidArgument("phi file has the wrong number of species for the spec");
    path.residuals = verify_pseudomaximizer(mix, path);
    if (!path.residuals.passed(1e-6))
      throw InvalidArgument("phi file is not a pseudo-maximizer for this spec (worst residual " +
                            std::to_string(path.residuals.worst()) + ")");
    return path;
  }
  PhiSolverOptions opt;
  opt.grid_size = grid;
  opt.threads = thread_count(g);
  return alg_value(mix, opt).phi;
}

json envelope(const Globals& g, const Mixture& mix) {
  return {{"command", g.command}, {"version", kVersion}, {"spec_hash", spec_hash(mix.spec())}, {"spec", spec_to_json(mix.spec())}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write file: " + path);
  os << text;
}

// JSON on stdout with --json, otherwise the human text; the report also goes to --out.
void emit(const Globals& g, std::ostream& out, const json& report, const std::string& human) {
  if (g.json) {
    out << report.dump(2) << '\n';
  } else {
    out << human;
  }
  if (!g.out.empty()) write_json_file(g.out, report);
}

std::string fixed(double x, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

std::string vec_text(const Vec& v) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < v.size(); ++i) os << (i ? ", " : "") << fixed(v[i]);
  os << ')';
  return os.str();
}

int cmd_classify(const Globals& g, std::ostream& out, const std::string& x_text, double tol) {
  const Mixture mix = load_mixture(g);
  const std::vector<double> xs = parse_doubles(x_text, "--x");
  if (static_cast<int>(xs.size()) != mix.r())
    throw InvalidArgument("--x needs " + std::to_string(mix.r()) + " entries, got " + std::to_string(xs.size()));
  const Vec x = Eigen::Map<const Vec>(xs.data(), mix.r());
  const SolvabilityReport rep = classify(mix, x, tol);
  json j = envelope(g, mix);
  j["x"] = vec_to_json(x);
  j["report"] = to_json(rep);
  std::ostringstream h;
  h << to_string(rep.classification) << '\n';
  h << "min_eig " << rep.min_eig << "  tolerance " << rep.tolerance_used << '\n';
  emit(g, out, j, h.str());
  return kExitOk;
}

int cmd_alg(const Globals& g, std::ostream& out, int grid, int starts) {
  const Mixture mix = load_mixture(g);
  PhiSolverOptions opt;
  opt.grid_size = grid;
  opt.starts = starts;
  opt.threads = thread_count(g);
  const AlgResult res = alg_value(mix, opt);
  json j = envelope(g, mix);
  j["result"] = to_json(res);
  const std::string human =
      std::string("{\"value\": ") + fixed(res.value) + ", \"regime\": \"" + to_string(res.regime) + "\"}\n";
  emit(g, out, j, human);
  return kExitOk;
}

int cmd_phi_solve(const Globals& g, std::ostream& out, int grid, int starts, const std::string& phi_out) {
  const Mixture mix = load_mixture(g);
  PhiSolverOptions opt;
  opt.grid_size = grid;
  opt.starts = starts;
  opt.threads = thread_count(g);
  const AlgResult res = alg_value(mix, opt);
  if (!res.phi) throw InvalidArgument("the spec is super-solvable at the origin; there is no Phi path to solve");
  if (!phi_out.empty()) write_json_file(phi_out, to_json(*res.phi));
  json j = envelope(g, mix);
  j["result"] = to_json(res);
  std::ostringstream h;
  h << "q1 " << fixed(res.phi->q1) << "  Phi(q1) " << vec_text(res.phi->phi.front()) << '\n';
  h << "candidates " << res.candidates.size() << "  value " << fixed(res.value) << "  worst residual "
    << res.phi->residuals.worst() << '\n';
  if (!phi_out.empty()) h << "wrote " << phi_out << '\n';
  emit(g, out, j, h.str());
  return kExitOk;
}

int cmd_phi_verify(const Globals& g, std::ostream& out, const std::string& phi_file, double tol) {
  const Mixture mix = load_mixture(g);
  if (phi_file.empty()) throw InvalidArgument("--phi is required");
  if (!fs::exists(phi_file)) throw InvalidArgument("phi file not found: " + phi_file);
  const PhiPath path = load_phi(phi_file);
  if (path.r() != mix.r()) throw InvalidArgument("phi file has the wrong number of species for the spec");
  const PhiResiduals res = verify_pseudomaximizer(mix, path);
  const bool ok = res.passed(tol);
  json j = envelope(g, mix);
  j["residuals"] = to_json(res);
  j["tolerance"] = tol;
  j["passed"] = ok;
  j["alg_functional"] = number(alg_functional(mix, path));
  std::ostringstream h;
  h << "admissibility " << res.admissibility << "\nderivative_sum " << res.derivative_sum << "\nmonotonicity "
    << res.monotonicity << "\nsolvability " << res.solvability << "\nstart_derivative " << res.start_derivative
    << "\nterminal " << res.terminal << '\n'
    << (ok ? "pass" : "FAIL") << " at tolerance " << tol << '\n';
  emit(g, out, j, h.str());
  return ok ? kExitOk : kExitBreach;
}

int cmd_predict(const Globals& g, std::ostream& out, const std::string& phi_file, int grid, int ell, int k_max) {
  const Mixture mix = load_mixture(g);
  const std::optional<PhiPath> path = resolve_path(g, mix, phi_file, grid);
  const SEPrediction pred = predict(mix, path, ell, k_max);
  json j = envelope(g, mix);
  j["prediction"] = to_json(pred);
  std::ostringstream h;
  h << "Phi(q1) " << vec_text(pred.phi_q1) << "\nA(q1) " << vec_text(pred.a_vec) << '\n';
  for (const auto& [d, e] : pred.stage1_energy) h << "stage1 energy " << d << ' ' << fixed(e) << '\n';
  if (path) {
    h << "iamp energy " << fixed(pred.iamp_energy) << "\nalg functional " << fixed(pred.alg_functional) << '\n';
    if (pred.schedule) h << "stage II steps " << pred.schedule->steps() << '\n';
  } else {
    h << "super-solvable: Stage I alone\n";
  }
  emit(g, out, j, h.str());
  return kExitOk;
}

struct RunArgs {
  std::string phi;
  int N = 500;
  int ell = 25;
  int k_max = 25;
  int grid = 400;
  std::string sign;
  std::string onsager = "se";
  double onsager_scale = 1.0;
  bool orthogonalize = false;
  std::string trace;
  bool vectors = false;
  std::optional<double> tol;
};

AmpOptions amp_options(const RunArgs& a) {
  AmpOptions o;
  o.onsager = onsager_mode_from_string(a.onsager);
  o.onsager_scale = a.onsager_scale;
  o.orthogonalize = a.orthogonalize;
  return o;
}

int cmd_run(const Globals& g, std::ostream& out, const RunArgs& a) {
  const Mixture mix = load_mixture(g);
  if (!a.trace.empty() && !fs::is_directory(a.trace)) throw InvalidArgument("trace directory not found: " + a.trace);
  const SignPattern delta = a.sign.empty() ? SignPattern::ones(mix.r()) : SignPattern::parse(a.sign);
  if (delta.r() != mix.r()) throw InvalidArgument("--sign needs " + std::to_string(mix.r()) + " characters");
  const std::optional<PhiPath> path = resolve_path(g, mix, a.phi, a.grid);
  const bool plus = delta.signs == SignPattern::ones(mix.r()).signs;
  const bool two_stage = path.has_value() && plus;
  if (!two_stage && !mix.spec().has_field())
    throw InvalidArgument("without a field only the all-plus two-stage run is defined");
  const Vec phi_q1 = path ? path->phi.front() : Vec::Ones(mix.r());
  const double predicted = two_stage ? alg_functional(mix, *path) : stage1_energy(mix, phi_q1, delta);
  const AmpOptions opt = amp_options(a);
  const auto seeds = seed_list(g);

  std::vector<json> runs(seeds.size());
  std::vector<double> energies(seeds.size());
  parallel_for(static_cast<int>(seeds.size()), thread_count(g), [&](int i) {
    const auto H = sample(g, mix, a.N, seeds[i]);
    const AmpRun run = two_stage ? iamp_run(H, *path, a.ell, derive_seed(seeds[i], {1}), opt)
                                 : stage1_run(H, phi_q1, delta, a.k_max, opt);
    energies[i] = two_stage ? run.output_energy : run.m_energy.back();
    runs[i] = to_json(run, a.vectors);
    if (two_stage) {
      runs[i]["criticality"] =
          number(criticality_residual(H.layout(), run.n_gradient, run.unrounded, a_at_q(mix, *path, 1.0)));
    } else {
      runs[i]["criticality"] =
          number(criticality_residual(H.layout(), run.m_gradient, run.m.back(), a_signed(mix, phi_q1, delta)));
    }
    if (!a.trace.empty()) {
      const std::string stem = (fs::path(a.trace) / ("seed_" + std::to_string(seeds[i]))).string();
      if (!run.m.empty()) write_text(stem + "_stage1.csv", stage1_trace_csv(run));
      if (run.has_stage2) write_text(stem + "_stage2.csv", stage2_trace_csv(run));
    }
  });

  bool breach = false;
  json j = envelope(g, mix);
  j["N"] = a.N;
  j["sign"] = delta.str();
  j["mode"] = two_stage ? "two-stage" : "stage1";
  j["predicted_energy"] = number(predicted);
  j["runs"] = runs;
  std::ostringstream h;
  h << (two_stage ? "two-stage" : "stage I") << " run, N = " << a.N << ", predicted energy " << fixed(predicted)
    << '\n';
  h << "seed          energy     criticality\n";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    h << std::left << std::setw(12) << seeds[i] << "  " << fixed(energies[i]) << "   "
      << fixed(runs[i]["criticality"].is_null() ? NAN : runs[i]["criticality"].get<double>()) << '\n';
    if (a.tol && !(energies[i] >= predicted - *a.tol)) breach = true;
  }
  if (a.tol) {
    j["tolerance"] = *a.tol;
    j["passed"] = !breach;
    h << (breach ? "FAIL" : "pass") << ": energy >= predicted - " << *a.tol << '\n';
  }
  emit(g, out, j, h.str());
  return breach ? kExitBreach : kExitOk;
}

struct BranchArgs {
  RunArgs run;
  std::string tree_file;
  std::string depths;
  int K = 2;
  std::uint64_t tree_seed = 0;
  std::string rule = "matched";
  std::string csv_dir;
  std::string leaves;
};

std::string leaf_label(const std::vector<int>& path) {
  std::string s;
  for (std::size_t i = 0; i < path.size(); ++i) s += (i ? "." : "") + std::to_string(path[i]);
  return s;
}

// int32 leaf count, int32 N, then the rounded outputs as little-endian float64 rows.
void write_leaves(const std::string& file, const BranchResult& br) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw InvalidArgument("cannot write file: " + file);
  const std::int32_t L = br.size();
  const std::int32_t N = L ? static_cast<std::int32_t>(br.leaves.front().output.size()) : 0;
  os.write(reinterpret_cast<const char*>(&L), sizeof L);
  os.write(reinterpret_cast<const char*>(&N), sizeof N);
  for (const auto& leaf : br.leaves)
    os.write(reinterpret_cast<const char*>(leaf.output.data()), static_cast<std::streamsize>(sizeof(double) * N));
}

int cmd_branch(const Globals& g, std::ostream& out, const BranchArgs& b) {
  const Mixture mix = load_mixture(g);
  TreeSpec tree;
  if (!b.tree_file.empty()) {
    if (!fs::exists(b.tree_file)) throw InvalidArgument("tree file not found: " + b.tree_file);
    tree = tree_from_json(read_json_file(b.tree_file));
  } else {
    if (b.depths.empty()) throw InvalidArgument("--tree or --depths is required");
    tree.depths = parse_doubles(b.depths, "--depths");
    tree.K = b.K;
    tree.seed = b.tree_seed;
    tree.rule = injection_rule_from_string(b.rule);
  }
  if (!b.csv_dir.empty() && !fs::is_directory(b.csv_dir)) throw InvalidArgument("CSV directory not found: " + b.csv_dir);
  const std::optional<PhiPath> path = resolve_path(g, mix, b.run.phi, b.run.grid);
  if (!path) throw InvalidArgument("branching needs a Phi path; the spec is super-solvable");
  tree.validate(path->q1);
  const AmpOptions opt = amp_options(b.run);
  const std::uint64_t seed = seed_list(g).front();
  const auto H = sample(g, mix, b.run.N, seed);
  const AmpRun stage1 =
      mix.spec().has_field() ? stage1_run(H, path->phi.front(), SignPattern::ones(mix.r()), b.run.ell, opt) : AmpRun{};
  const BranchResult br = branching_run(H, stage1, *path, b.run.ell, derive_seed(seed, {1}), tree, opt);

  const auto got = br.overlaps(H);
  const auto want = br.predicted_overlaps(*path);
  const Mat dist = br.distances();
  std::vector<std::string> labels;
  for (const auto& p : br.paths) labels.push_back(leaf_label(p));
  double max_err = 0.0;
  for (std::size_t s = 0; s < got.size(); ++s) max_err = std::max(max_err, (got[s] - want[s]).cwiseAbs().maxCoeff());
  double min_dist = INFINITY;
  for (int i = 0; i < dist.rows(); ++i)
    for (int k = i + 1; k < dist.cols(); ++k) min_dist = std::min(min_dist, dist(i, k));

  json j = envelope(g, mix);
  j["N"] = b.run.N;
  j["seed"] = seed;
  j["tree"] = to_json(tree);
  j["leaves"] = labels;
  j["injection_steps"] = br.injection_steps;
  json energies = json::array(), ov = json::array(), pr = json::array();
  for (const auto& leaf : br.leaves) energies.push_back(number(leaf.output_energy));
  for (std::size_t s = 0; s < got.size(); ++s) {
    ov.push_back(mat_to_json(got[s]));
    pr.push_back(mat_to_json(want[s]));
  }
  j["leaf_energies"] = energies;
  j["overlaps"] = ov;
  j["predicted_overlaps"] = pr;
  j["distances"] = mat_to_json(dist);
  j["max_overlap_error"] = number(max_err);
  j["min_distance"] = number(min_dist);
  if (!b.csv_dir.empty()) {
    for (std::size_t s = 0; s < got.size(); ++s) {
      write_text((fs::path(b.csv_dir) / ("overlaps_s" + std::to_string(s) + ".csv")).string(), matrix_csv(got[s], labels));
      write_text((fs::path(b.csv_dir) / ("predicted_s" + std::to_string(s) + ".csv")).string(),
                 matrix_csv(want[s], labels));
    }
    write_text((fs::path(b.csv_dir) / "distances.csv").string(), matrix_csv(dist, labels));
  }
  if (!b.leaves.empty()) write_leaves(b.leaves, br);

  bool breach = false;
  std::ostringstream h;
  h << br.size() << " leaves, N = " << b.run.N << ", seed " << seed << '\n';
  h << "max overlap error " << fixed(max_err) << "\nmin leaf distance " << fixed(min_dist) << '\n';
  if (b.run.tol) {
    breach = !(max_err <= *b.run.tol);
    j["tolerance"] = *b.run.tol;
    j["passed"] = !breach;
    h << (breach ? "FAIL" : "pass") << ": overlaps within " << *b.run.tol << '\n';
  }
  emit(g, out, j, h.str());
  return breach ? kExitBreach : kExitOk;
}

int cmd_validate(const Globals& g, std::ostream& out, const std::string& config_file, const std::string& trace) {
  if (config_file.empty()) throw InvalidArgument("--config is required");
  if (!fs::exists(config_file)) throw InvalidArgument("config file not found: " + config_file);
  const std::string base = fs::path(config_file).parent_path().string();
  ExperimentConfig cfg = ExperimentConfig::from_json(read_json_file(config_file), base.empty() ? "." : base);
  if (g.threads > 0) cfg.threads = g.threads;
  if (!g.seeds.empty()) cfg.seeds = parse_seeds(g.seeds);
  if (!trace.empty()) cfg.trace_dir = trace;
  cfg.validate();
  const RunReport rep = validate_se(cfg);
  json j = rep.to_json();
  j["command"] = g.command;
  j["version"] = kVersion;
  std::ostringstream h;
  h << "status        measured      expected     tolerance  item\n";
  for (const auto& it : rep.items) {
    h << std::left << std::setw(13) << to_string(it.status) << std::right << std::setw(10) << fixed(it.measured)
      << "  " << std::setw(12) << fixed(it.expected) << "  " << std::setw(12) << fixed(it.tolerance) << "  "
      << it.name << '\n';
  }
  h << rep.count(CheckStatus::Pass) << " pass, " << rep.count(CheckStatus::Fail) << " fail, "
    << rep.count(CheckStatus::Inconclusive) << " inconclusive in " << fixed(rep.seconds, 1) << " s\n";
  if (!cfg.out.empty() && g.out.empty()) write_json_file(cfg.out, j);
  emit(g, out, j, h.str());
  return rep.passed() ? kExitOk : kExitBreach;
}

void add_run_options(CLI::App* sub, RunArgs& a, bool stage1_flags) {
  sub->add_option("--phi", a.phi, "Phi path JSON from 'phi solve' (solved on the fly when absent)");
  sub->add_option("--N", a.N, "dimension")->check(CLI::Range(2, 1000000));
  sub->add_option("--ell", a.ell, "Stage-II step count parameter")->check(CLI::Range(2, 100000));
  sub->add_option("--grid", a.grid, "Phi grid size when solving on the fly")->check(CLI::Range(4, 1000000));
  sub->add_option("--onsager", a.onsager, "Onsager coefficients: se or empirical");
  sub->add_option("--onsager-scale", a.onsager_scale, "multiplier on every Onsager term (ablation)");
  sub->add_flag("--orthogonalize", a.orthogonalize, "project Stage-II increments off past iterates");
  sub->add_option("--tol", a.tol, "exit 2 when the checked quantity misses by more than this");
  if (stage1_flags) {
    sub->add_option("--k", a.k_max, "Stage-I iterations for signed runs")->check(CLI::Range(1, 100000));
    sub->add_option("--sign", a.sign, "sign pattern such as +- (Stage I only unless all plus)");
    sub->add_option("--trace", a.trace, "directory for per-seed CSV traces");
    sub->add_flag("--vectors", a.vectors, "include iterate vectors in the JSON report");
  }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Globals g;
  for (std::size_t i = 0; i < args.size(); ++i) g.command += (i ? " " : "") + args[i];

  CLI::App app{"Two-stage AMP optimizer for multi-species spherical spin glasses", "msamp"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--spec", g.spec, "mixture spec JSON");
  app.add_option("--seed", g.seed, "Hamiltonian seed");
  app.add_option("--seeds", g.seeds, "seed list such as 1,2,3 or 1-5");
  app.add_option("--threads", g.threads, "worker threads (default MSAMP_THREADS or 1)")->check(CLI::Range(1, 1024));
  app.add_flag("--json", g.json, "print the JSON report instead of text");
  app.add_option("--out", g.out, "write the JSON report to this file");
  app.add_option("--cache-dir", g.cache_dir, "directory for sampled tensor caches");
  app.add_flag("--no-cache", g.no_cache, "ignore --cache-dir");

  auto* classify_cmd = app.add_subcommand("classify", "solvability class of M*(x)");
  std::string x_text;
  double classify_tol = 1e-8;
  classify_cmd->add_option("--x", x_text, "point x, comma separated")->required();
  classify_cmd->add_option("--tol", classify_tol, "eigenvalue tolerance");

  auto* alg_cmd = app.add_subcommand("alg", "algorithmic threshold ALG");
  int grid = 400, starts = 8;
  alg_cmd->add_option("--grid", grid, "Phi grid size")->check(CLI::Range(4, 1000000));
  alg_cmd->add_option("--starts", starts, "shooting starts")->check(CLI::Range(1, 10000));

  auto* phi_cmd = app.add_subcommand("phi", "pseudo-maximizer paths");
  phi_cmd->require_subcommand(1);
  auto* solve_cmd = phi_cmd->add_subcommand("solve", "solve for Phi and save it");
  std::string phi_out;
  solve_cmd->add_option("--grid", grid, "Phi grid size")->check(CLI::Range(4, 1000000));
  solve_cmd->add_option("--starts", starts, "shooting starts")->check(CLI::Range(1, 10000));
  solve_cmd->add_option("--phi-out", phi_out, "file for the Phi path JSON");
  auto* verify_cmd = phi_cmd->add_subcommand("verify", "re-run the pseudo-maximizer checks on a saved path");
  std::string phi_file;
  double phi_tol = 1e-6;
  verify_cmd->add_option("--phi", phi_file, "Phi path JSON")->required();
  verify_cmd->add_option("--tol", phi_tol, "residual tolerance");

  auto* predict_cmd = app.add_subcommand("predict", "state-evolution predictions");
  std::string predict_phi;
  int predict_ell = 25, predict_k = 500;
  predict_cmd->add_option("--phi", predict_phi, "Phi path JSON (solved on the fly when absent)");
  predict_cmd->add_option("--grid", grid, "Phi grid size when solving on the fly")->check(CLI::Range(4, 1000000));
  predict_cmd->add_option("--ell", predict_ell, "Stage-II step count parameter")->check(CLI::Range(2, 100000));
  predict_cmd->add_option("--k", predict_k, "overlap recursion iterations")->check(CLI::Range(1, 100000));

  auto* run_cmd = app.add_subcommand("run", "Stage I, or Stage I and II, on sampled Hamiltonians");
  RunArgs run_args;
  add_run_options(run_cmd, run_args, true);

  auto* branch_cmd = app.add_subcommand("branch", "branching IAMP on one Hamiltonian");
  BranchArgs branch_args;
  add_run_options(branch_cmd, branch_args.run, false);
  branch_cmd->add_option("--tree", branch_args.tree_file, "tree spec JSON");
  branch_cmd->add_option("--depths", branch_args.depths, "branch depths such as 0.2,0.6,1");
  branch_cmd->add_option("--K", branch_args.K, "children per node")->check(CLI::Range(1, 64));
  branch_cmd->add_option("--tree-seed", branch_args.tree_seed, "seed of the edge Gaussians");
  branch_cmd->add_option("--rule", branch_args.rule, "injection step rule: matched or ceil");
  branch_cmd->add_option("--csv", branch_args.csv_dir, "directory for overlap and distance CSV tables");
  branch_cmd->add_option("--leaves", branch_args.leaves, "binary file for the leaf outputs");

  auto* validate_cmd = app.add_subcommand("validate-se", "Monte Carlo check of every state-evolution table");
  std::string config_file, validate_trace;
  validate_cmd->add_option("--config", config_file, "experiment config JSON")->required();
  validate_cmd->add_option("--trace", validate_trace, "directory for per-seed CSV traces");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitError;
  }

  try {
    if (*classify_cmd) return cmd_classify(g, out, x_text, classify_tol);
    if (*alg_cmd) return cmd_alg(g, out, grid, starts);
    if (*solve_cmd) return cmd_phi_solve(g, out, grid, starts, phi_out);
    if (*verify_cmd) return cmd_phi_verify(g, out, phi_file, phi_tol);
    if (*predict_cmd) return cmd_predict(g, out, predict_phi, grid, predict_ell, predict_k);
    if (*run_cmd) return cmd_run(g, out, run_args);
    if (*branch_cmd) return cmd_branch(g, out, branch_args);
    if (*validate_cmd) return cmd_validate(g, out, config_file, validate_trace);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  err << app.help();
  return kExitError;
}

}  // namespace msamp::cli
