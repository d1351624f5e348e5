#include "msamp/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "msamp/error.hpp"
#include "msamp/parallel.hpp"
#include "msamp/rng.hpp"

namespace msamp {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? p : (fs::path(base_dir) / path).string();
}

void require_file(const std::string& path, const char* what) {
  if (!fs::exists(path)) throw InvalidArgument(std::string(what) + " file not found: " + path);
}

template <class T>
void check_range(const char* name, T v, T lo, T hi) {
  if (v < lo || v > hi) {
    std::ostringstream os;
    os << name << " = " << v << " is outside [" << lo << ", " << hi << "]";
    throw InvalidArgument(os.str());
  }
}

// Per-seed statistics; iterate vectors are dropped after reduction.
struct SeedStats {
  std::vector<Vec> m_self, m_step, w_mean, w_second, w_step;
  std::vector<double> m_energy;
  std::vector<std::pair<std::string, double>> signed_energy;
  std::vector<std::pair<std::string, Vec>> signed_self;
  std::vector<Vec> n_self, dz_var;
  double output_energy = 0.0;
  json summary;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write file: " + path);
  os << text;
}

SeedStats run_seed(const Mixture& mix, const ExperimentConfig& cfg, const std::optional<PhiPath>& path,
                   const Vec& phi_q1, std::uint64_t seed) {
  const auto H = HamiltonianInstance::sample(mix, cfg.N, seed);
  const auto& L = H.layout();
  const auto& lam = mix.lambda();
  const int r = mix.r();
  const Vec h = Eigen::Map<const Vec>(mix.h().data(), r);
  SeedStats st;
  st.summary = {{"seed", seed}};
  AmpRun stage1;
  if (mix.spec().has_field()) {
    const bool with2 = cfg.stage2 && path.has_value();
    const int K = std::max(cfg.k_max, with2 ? cfg.ell_lower : 0);
    stage1 = stage1_run(H, phi_q1, SignPattern::ones(r), K, cfg.amp);
    for (int k = 0; k <= cfg.k_max && k <= K; ++k) {
      const Vec wt = stage1.w[k] - H.field_vector();
      st.m_self.push_back(stage1.m_self[k]);
      st.m_step.push_back(stage1.m_step[k]);
      st.w_mean.push_back(overlap(L, lam, stage1.w[k], Vec::Ones(cfg.N)));
      st.w_second.push_back(overlap(L, lam, wt, wt));
      st.w_step.push_back(k == 0 ? Vec::Zero(r)
                                 : overlap(L, lam, wt, Vec(stage1.w[k - 1] - H.field_vector())));
      st.m_energy.push_back(stage1.m_energy[k]);
    }
    st.summary["stage1_energy"] = number(stage1.m_energy[cfg.k_max]);
    st.summary["stage1_self_overlap"] = vec_to_json(stage1.m_self[cfg.k_max]);
    for (const SignPattern& d : cfg.signs) {
      const AmpRun sr = stage1_run(H, phi_q1, d, cfg.k_max, cfg.amp);
      st.signed_energy.emplace_back(d.str(), sr.m_energy.back());
      st.signed_self.emplace_back(d.str(), sr.m_self.back());
    }
    if (!cfg.trace_dir.empty())
      write_text(resolve(cfg.trace_dir, "seed_" + std::to_string(seed) + "_stage1.csv"), stage1_trace_csv(stage1));
  }
  if (cfg.stage2 && path) {
    const AmpRun run = stage2_run(H, stage1, *path, cfg.ell_lower, derive_seed(seed, {1}), cfg.amp);
    st.n_self = run.n_self;
    for (std::size_t m = 1; m < run.z.size(); ++m) {
      const Vec dz = run.z[m] - run.z[m - 1];
      st.dz_var.push_back(overlap(L, lam, dz, dz));
    }
    st.output_energy = run.output_energy;
    st.summary["output_energy"] = number(run.output_energy);
    st.summary["rounding_distance"] = number(run.rounding_distance);
    st.summary["criticality"] =
        number(criticality_residual(L, run.n_gradient, run.unrounded, a_at_q(mix, *path, 1.0)));
    if (!cfg.trace_dir.empty())
      write_text(resolve(cfg.trace_dir, "seed_" + std::to_string(seed) + "_stage2.csv"), stage2_trace_csv(run));
  }
  return st;
}

template <class Get>
Vec average(const std::vector<SeedStats>& all, Get get) {
  Vec acc = get(all.front());
  for (std::size_t i = 1; i < all.size(); ++i) acc += get(all[i]);
  return acc / static_cast<double>(all.size());
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::string& base_dir) {
  ExperimentConfig c;
  try {
    const json& s = j.at("spec");
    if (s.is_string()) {
      c.spec_path = resolve(base_dir, s.get<std::string>());
      require_file(c.spec_path, "spec");
      c.spec = load_spec(c.spec_path);
    } else {
      c.spec = spec_from_json(s);
    }
    if (j.contains("phi")) {
      c.phi_path = resolve(base_dir, j.at("phi").get<std::string>());
      require_file(*c.phi_path, "phi");
    }
    if (j.contains("N")) c.N = j.at("N").get<int>();
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("ell_lower")) c.ell_lower = j.at("ell_lower").get<int>();
    if (j.contains("k_max")) c.k_max = j.at("k_max").get<int>();
    if (j.contains("grid")) c.grid = j.at("grid").get<int>();
    if (j.contains("tolerances")) {
      const json& t = j.at("tolerances");
      if (t.contains("se_scale")) c.tol.se_scale = t.at("se_scale").get<double>();
      if (t.contains("inconclusive_above")) c.tol.inconclusive_above = t.at("inconclusive_above").get<double>();
      if (t.contains("phi_residual")) c.tol.phi_residual = t.at("phi_residual").get<double>();
    }
    if (j.contains("amp")) c.amp = amp_options_from_json(j.at("amp"));
    if (j.contains("signs"))
      for (const auto& s2 : j.at("signs")) c.signs.push_back(SignPattern::parse(s2.get<std::string>()));
    if (j.contains("tree")) c.tree = tree_from_json(j.at("tree"));
    if (j.contains("stage2")) c.stage2 = j.at("stage2").get<bool>();
    if (j.contains("out")) c.out = resolve(base_dir, j.at("out").get<std::string>());
    if (j.contains("trace_dir")) c.trace_dir = resolve(base_dir, j.at("trace_dir").get<std::string>());
    c.threads = j.contains("threads") ? j.at("threads").get<int>() : default_threads();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config: malformed JSON: ") + e.what());
  }
  c.validate();
  return c;
}

json ExperimentConfig::to_json() const {
  json j{{"spec", spec_to_json(spec)},
         {"spec_hash", spec_hash(spec)},
         {"N", N},
         {"seeds", seeds},
         {"ell_lower", ell_lower},
         {"k_max", k_max},
         {"grid", grid},
         {"tolerances",
          {{"se_scale", tol.se_scale},
           {"inconclusive_above", tol.inconclusive_above},
           {"phi_residual", tol.phi_residual}}},
         {"amp", msamp::to_json(amp)},
         {"stage2", stage2},
         {"threads", threads}};
  if (!spec_path.empty()) j["spec_path"] = spec_path;
  if (phi_path) j["phi"] = *phi_path;
  json s = json::array();
  for (const auto& d : signs) s.push_back(d.str());
  j["signs"] = s;
  if (tree) j["tree"] = msamp::to_json(*tree);
  if (!out.empty()) j["out"] = out;
  if (!trace_dir.empty()) j["trace_dir"] = trace_dir;
  return j;
}

void ExperimentConfig::validate() const {
  msamp::validate(spec);
  check_range("N", N, 2, 1000000);
  if (N < spec.r) throw InvalidArgument("N must be at least the number of species");
  if (seeds.empty()) throw InvalidArgument("seeds must be nonempty");
  check_range("ell_lower", ell_lower, 2, 100000);
  check_range("k_max", k_max, 1, 100000);
  check_range("grid", grid, 4, 1000000);
  check_range("threads", threads, 1, 1024);
  if (!(tol.se_scale > 0.0) || !(tol.inconclusive_above > 0.0) || !(tol.phi_residual > 0.0))
    throw InvalidArgument("tolerances must be positive");
  for (const auto& d : signs)
    if (d.r() != spec.r) throw InvalidArgument("sign pattern " + d.str() + " has the wrong length");
  if (phi_path) require_file(*phi_path, "phi");
  if (!trace_dir.empty() && !fs::is_directory(trace_dir))
    throw InvalidArgument("trace directory not found: " + trace_dir);
}

const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass:
      return "pass";
    case CheckStatus::Fail:
      return "fail";
    default:
      return "inconclusive";
  }
}

CheckItem make_check(std::string name, std::string anchor, double measured, double expected, double tolerance,
                     double inconclusive_above) {
  CheckItem c{std::move(name), std::move(anchor), measured, expected, tolerance, CheckStatus::Pass};
  if (tolerance > inconclusive_above) {
    c.status = CheckStatus::Inconclusive;
  } else if (!(std::abs(measured - expected) <= tolerance)) {
    c.status = CheckStatus::Fail;
  }
  return c;
}

bool RunReport::passed() const { return count(CheckStatus::Fail) == 0; }

int RunReport::count(CheckStatus s) const {
  int n = 0;
  for (const auto& c : items) n += c.status == s;
  return n;
}

json RunReport::to_json() const {
  json items_j = json::array();
  for (const auto& c : items)
    items_j.push_back({{"name", c.name},
                       {"anchor", c.anchor},
                       {"measured", number(c.measured)},
                       {"expected", number(c.expected)},
                       {"tolerance", c.tolerance},
                       {"status", msamp::to_string(c.status)}});
  return {{"config", config},
          {"predictions", predictions},
          {"per_seed", per_seed},
          {"items", items_j},
          {"summary",
           {{"pass", count(CheckStatus::Pass)},
            {"fail", count(CheckStatus::Fail)},
            {"inconclusive", count(CheckStatus::Inconclusive)},
            {"passed", passed()}}},
          {"seconds", seconds}};
}

int default_threads() {
  if (const char* env = std::getenv("MSAMP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(std::min(v, 1024L));
  }
  return 1;
}

RunReport validate_se(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Mixture mix(cfg.spec);
  const int r = mix.r();
  PhiSolverOptions popt;
  popt.grid_size = cfg.grid;
  std::optional<PhiPath> path;
  if (cfg.phi_path) {
    path = load_phi(*cfg.phi_path);
  } else {
    path = alg_value(mix, popt).phi;
  }
  const Vec phi_q1 = path ? path->phi.front() : Vec::Ones(r);
  const bool stage2 = cfg.stage2 && path.has_value();

  std::vector<SeedStats> stats(cfg.seeds.size());
  parallel_for(static_cast<int>(cfg.seeds.size()), cfg.threads,
               [&](int i) { stats[i] = run_seed(mix, cfg, path, phi_q1, cfg.seeds[i]); });

  RunReport rep;
  rep.config = cfg.to_json();
  const SEPrediction pred = predict(mix, path, cfg.ell_lower);
  rep.predictions = to_json(pred);
  for (const auto& s : stats) rep.per_seed.push_back(s.summary);

  Vec tol(r);
  for (int s = 0; s < r; ++s) tol[s] = cfg.tol.se_scale / std::sqrt(mix.lambda()[s] * cfg.N);
  const double tol1 = cfg.tol.se_scale / std::sqrt(static_cast<double>(cfg.N));
  const double cap = cfg.tol.inconclusive_above;
  auto per_species = [&](const std::string& name, const std::string& anchor, const Vec& got, const Vec& want) {
    for (int s = 0; s < r; ++s)
      rep.items.push_back(make_check(name + "[" + std::to_string(s) + "]", anchor, got[s], want[s], tol[s], cap));
  };

  if (mix.spec().has_field()) {
    const Stage1Tables tab = stage1_covariances(mix, phi_q1, cfg.k_max, cfg.amp.init);
    const int K = static_cast<int>(stats.front().m_self.size()) - 1;
    for (int k = 0; k <= K; ++k) {
      const std::string ks = std::to_string(k);
      per_species("stage1.m_self[" + ks + "]", "E[(M^k)^2] = Phi(q1)",
                  average(stats, [&](const SeedStats& s) { return s.m_self[k]; }), tab.m_second);
      per_species("stage1.w_mean[" + ks + "]", "E[W^k]", average(stats, [&](const SeedStats& s) { return s.w_mean[k]; }),
                  tab.w_mean(k));
      per_species("stage1.w_second[" + ks + "]", "E[(W^k - h)^2]",
                  average(stats, [&](const SeedStats& s) { return s.w_second[k]; }), tab.w_second(k));
      if (k == 0) continue;
      per_species("stage1.m_cross[" + ks + "]", "E[M^{k-1} M^k] from the overlap recursion",
                  average(stats, [&](const SeedStats& s) { return s.m_step[k]; }), tab.m_cross[k - 1]);
      per_species("stage1.w_cross[" + ks + "]", "E[(W^{k-1} - h)(W^k - h)]",
                  average(stats, [&](const SeedStats& s) { return s.w_step[k]; }), tab.w_cross[k - 1]);
    }
    double e = 0.0;
    for (const auto& s : stats) e += s.m_energy[K];
    rep.items.push_back(make_check("stage1.energy[" + std::to_string(K) + "]", "Stage-I energy, all-plus signs",
                                   e / stats.size(), stage1_energy(mix, phi_q1, SignPattern::ones(r)), tol1, cap));
    for (std::size_t p = 0; p < cfg.signs.size(); ++p) {
      const std::string d = cfg.signs[p].str();
      double es = 0.0;
      for (const auto& s : stats) es += s.signed_energy[p].second;
      rep.items.push_back(make_check("stage1.energy[" + d + "]", "Stage-I energy with signs " + d, es / stats.size(),
                                     stage1_energy(mix, phi_q1, cfg.signs[p]), tol1, cap));
      per_species("stage1.m_self[" + d + "]", "E[(M^k)^2] = Phi(q1)",
                  average(stats, [&](const SeedStats& s) { return s.signed_self[p].second; }), phi_q1);
    }
  }

  if (stage2) {
    const BrownianTables bm = bm_covariances(mix, *path, cfg.ell_lower);
    const IampSchedule& sch = bm.schedule;
    const int steps = static_cast<int>(stats.front().n_self.size());
    for (int m = 0; m < steps; ++m) {
      const int ell = cfg.ell_lower + m;
      per_species("stage2.n_self[" + std::to_string(ell) + "]", "E[(N^l)^2] = Phi(q_{l+1})",
                  average(stats, [&](const SeedStats& s) { return s.n_self[m]; }), sch.phi[m + 1]);
      if (m + 1 < steps)
        per_species("stage2.dz_var[" + std::to_string(ell) + "]", "E[(Z^{l+1} - Z^l)^2] = xi increment",
                    average(stats, [&](const SeedStats& s) { return s.dz_var[m]; }), bm.z_increment_var(ell));
    }
    double e = 0.0;
    for (const auto& s : stats) e += s.output_energy;
    rep.items.push_back(make_check("stage2.output_energy", "algorithmic threshold", e / stats.size(),
                                   alg_functional(mix, *path), tol1, cap));
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

std::string stage1_trace_csv(const AmpRun& run) {
  std::ostringstream os;
  os.precision(17);
  const int r = run.phi_q1.size();
  os << "k,energy";
  for (int s = 0; s < r; ++s) os << ",self_" << s;
  for (int s = 0; s < r; ++s) os << ",step_" << s;
  os << '\n';
  for (std::size_t k = 0; k < run.m_self.size(); ++k) {
    os << k << ',' << run.m_energy[k];
    for (int s = 0; s < r; ++s) os << ',' << run.m_self[k][s];
    for (int s = 0; s < r; ++s) os << ',' << run.m_step[k][s];
    os << '\n';
  }
  return os.str();
}

std::string stage2_trace_csv(const AmpRun& run) {
  std::ostringstream os;
  os.precision(17);
  const int r = run.phi_q1.size();
  os << "l,energy";
  for (int s = 0; s < r; ++s) os << ",self_" << s;
  os << '\n';
  for (std::size_t m = 0; m < run.n_self.size(); ++m) {
    os << run.ell_lower + static_cast<int>(m) << ',' << run.n_energy[m];
    for (int s = 0; s < r; ++s) os << ',' << run.n_self[m][s];
    os << '\n';
  }
  return os.str();
}

std::string matrix_csv(const Mat& m, const std::vector<std::string>& labels) {
  std::ostringstream os;
  os.precision(17);
  os << "leaf";
  for (const auto& l : labels) os << ',' << l;
  os << '\n';
  for (int i = 0; i < m.rows(); ++i) {
    os << labels[i];
    for (int j = 0; j < m.cols(); ++j) os << ',' << m(i, j);
    os << '\n';
  }
  return os.str();
}

}  // namespace msamp
