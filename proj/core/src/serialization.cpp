#include "msamp/serialization.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "msamp/error.hpp"

namespace msamp {

namespace {

// Flatten a nested array of depth k into row-major order.
void flatten(const json& j, int depth, int r, std::vector<double>& out) {
  if (depth == 0) {
    if (!j.is_number()) throw InvalidArgument("spec: coefficient tensor entries must be numbers");
    out.push_back(j.get<double>());
    return;
  }
  if (!j.is_array() || static_cast<int>(j.size()) != r)
    throw InvalidArgument("spec: coefficient tensor must be a nested array with r entries per level");
  for (const auto& e : j) flatten(e, depth - 1, r, out);
}

json nest(const std::vector<double>& flat, std::size_t& pos, int depth, int r) {
  if (depth == 0) return flat[pos++];
  json a = json::array();
  for (int s = 0; s < r; ++s) a.push_back(nest(flat, pos, depth - 1, r));
  return a;
}

}  // namespace

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json vec_to_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

Vec vec_from_json(const json& j) {
  if (!j.is_array()) throw InvalidArgument("expected a numeric array");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& e = j[i];
    if (e.is_null()) {
      v[static_cast<int>(i)] = std::numeric_limits<double>::quiet_NaN();
    } else if (e.is_number()) {
      v[static_cast<int>(i)] = e.get<double>();
    } else {
      throw InvalidArgument("expected a numeric array");
    }
  }
  return v;
}

json mat_to_json(const Mat& m) {
  json a = json::array();
  for (int i = 0; i < m.rows(); ++i) a.push_back(vec_to_json(m.row(i).transpose()));
  return a;
}

MixtureSpec spec_from_json(const json& j) {
  MixtureSpec spec;
  try {
    spec.r = j.at("r").get<int>();
    spec.lambda = j.at("lambda").get<std::vector<double>>();
    spec.h = j.contains("h") ? j.at("h").get<std::vector<double>>() : std::vector<double>(spec.r, 0.0);
    for (const auto& [key, val] : j.at("gammas").items()) {
      const int k = std::stoi(key);
      if (k < 2) throw InvalidArgument("spec: degrees must be >= 2");
      std::vector<double> flat;
      flatten(val, k, spec.r, flat);
      spec.gammas[k] = std::move(flat);
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("spec: malformed JSON: ") + e.what());
  }
  validate(spec);
  return spec;
}

json spec_to_json(const MixtureSpec& spec) {
  json j;
  j["r"] = spec.r;
  j["lambda"] = spec.lambda;
  j["h"] = spec.h;
  json g = json::object();
  for (const auto& [k, flat] : spec.gammas) {
    std::size_t pos = 0;
    g[std::to_string(k)] = nest(flat, pos, k, spec.r);
  }
  j["gammas"] = g;
  return j;
}

std::uint64_t spec_hash(const MixtureSpec& spec) {
  const std::string text = spec_to_json(spec).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

json read_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open file: " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw InvalidArgument("invalid JSON in " + path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write file: " + path);
  os << j.dump(2) << '\n';
}

MixtureSpec load_spec(const std::string& path) { return spec_from_json(read_json_file(path)); }

json to_json(const SolvabilityReport& rep) {
  json j;
  j["classification"] = to_string(rep.classification);
  j["min_eig"] = rep.min_eig;
  j["tolerance_used"] = rep.tolerance_used;
  j["perron_vector"] = vec_to_json(rep.perron_vector);
  j["m_star"] = mat_to_json(rep.m_star);
  j["zero_convention"] = rep.zero_convention;
  return j;
}

namespace {

json vecs_to_json(const std::vector<Vec>& vs) {
  json a = json::array();
  for (const Vec& v : vs) a.push_back(vec_to_json(v));
  return a;
}

std::vector<Vec> vecs_from_json(const json& j) {
  if (!j.is_array()) throw InvalidArgument("expected an array of vectors");
  std::vector<Vec> out;
  for (const auto& e : j) out.push_back(vec_from_json(e));
  return out;
}

json doubles_to_json(const std::vector<double>& xs) {
  json a = json::array();
  for (double x : xs) a.push_back(number(x));
  return a;
}

}  // namespace

json to_json(const PhiResiduals& res) {
  return {{"admissibility", number(res.admissibility)},
          {"derivative_sum", number(res.derivative_sum)},
          {"monotonicity", number(res.monotonicity)},
          {"solvability", number(res.solvability)},
          {"start_derivative", number(res.start_derivative)},
          {"terminal", number(res.terminal)},
          {"psi_spread", number(res.psi_spread)},
          {"singular_nodes", res.singular_nodes},
          {"worst", number(res.worst())}};
}

json to_json(const PhiPath& path) {
  return {{"q1", path.q1},
          {"grid", doubles_to_json(path.grid)},
          {"phi", vecs_to_json(path.phi)},
          {"dphi", vecs_to_json(path.dphi)},
          {"psi", doubles_to_json(path.psi)},
          {"residuals", to_json(path.residuals)}};
}

PhiPath phi_from_json(const json& j) {
  PhiPath p;
  try {
    p.q1 = j.at("q1").get<double>();
    const Vec grid = vec_from_json(j.at("grid"));
    p.grid.assign(grid.data(), grid.data() + grid.size());
    p.phi = vecs_from_json(j.at("phi"));
    p.dphi = vecs_from_json(j.at("dphi"));
    if (j.contains("psi")) {
      const Vec psi = vec_from_json(j.at("psi"));
      p.psi.assign(psi.data(), psi.data() + psi.size());
    }
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("phi: malformed JSON: ") + e.what());
  }
  const std::size_t n = p.grid.size();
  if (n == 0 || p.phi.size() != n || p.dphi.size() != n)
    throw InvalidArgument("phi: grid, phi and dphi must be nonempty and of equal length");
  if (p.psi.empty()) p.psi.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (p.psi.size() != n) throw InvalidArgument("phi: psi must match the grid length");
  const int r = p.r();
  for (std::size_t i = 0; i < n; ++i) {
    if (p.phi[i].size() != r || p.dphi[i].size() != r)
      throw InvalidArgument("phi: every node needs r values of phi and dphi");
    if (i > 0 && !(p.grid[i] > p.grid[i - 1])) throw InvalidArgument("phi: grid must increase strictly");
  }
  if (std::abs(p.grid.front() - p.q1) > 1e-12 || std::abs(p.grid.back() - 1.0) > 1e-12)
    throw InvalidArgument("phi: grid must run from q1 to 1");
  return p;
}

PhiPath load_phi(const std::string& path) { return phi_from_json(read_json_file(path)); }

json to_json(const AlgResult& res) {
  json j{{"value", number(res.value)}, {"regime", to_string(res.regime)}};
  if (res.phi) {
    j["q1"] = res.phi->q1;
    j["phi_q1"] = vec_to_json(res.phi->phi.front());
  }
  json c = json::array();
  for (const auto& [path, value] : res.candidates)
    c.push_back({{"q1", path.q1}, {"phi_q1", vec_to_json(path.phi.front())}, {"value", number(value)}});
  j["candidates"] = c;
  return j;
}

json to_json(const IampSchedule& sch) {
  return {{"q1", sch.q1},
          {"delta", sch.delta},
          {"ell_lower", sch.ell_lower},
          {"ell_upper", sch.ell_upper},
          {"q", doubles_to_json(sch.q)},
          {"phi", vecs_to_json(sch.phi)},
          {"xi", vecs_to_json(sch.xi)},
          {"u", vecs_to_json(sch.u)},
          {"a", vec_to_json(sch.a)}};
}

json to_json(const SEPrediction& pred) {
  json j{{"phi_q1", vec_to_json(pred.phi_q1)},
         {"a", vec_to_json(pred.a_vec)},
         {"overlaps", vecs_to_json(pred.overlaps)},
         {"overlaps_converged", pred.overlaps_converged},
         {"overlap_gap", number(pred.overlap_gap)},
         {"iamp_energy", number(pred.iamp_energy)},
         {"alg_functional", number(pred.alg_functional)},
         {"grid", doubles_to_json(pred.grid)},
         {"a_of_q", vecs_to_json(pred.a_of_q)},
         {"c_hat", vecs_to_json(pred.c_hat)}};
  json e = json::object();
  for (const auto& [k, v] : pred.stage1_energy) e[k] = number(v);
  j["stage1_energy"] = e;
  json a = json::object();
  for (const auto& [k, v] : pred.a_q1_signed) a[k] = vec_to_json(v);
  j["a_q1_signed"] = a;
  j["schedule"] = pred.schedule ? to_json(*pred.schedule) : json(nullptr);
  return j;
}

json to_json(const AmpOptions& opt) {
  return {{"init", to_string(opt.init)},
          {"init_seed", opt.init_seed},
          {"onsager", to_string(opt.onsager)},
          {"convergence_threshold", opt.convergence_threshold},
          {"onsager_scale", opt.onsager_scale},
          {"orthogonalize", opt.orthogonalize}};
}

AmpOptions amp_options_from_json(const json& j) {
  AmpOptions opt;
  try {
    if (j.contains("init")) opt.init = stage1_init_from_string(j.at("init").get<std::string>());
    if (j.contains("init_seed")) opt.init_seed = j.at("init_seed").get<std::uint64_t>();
    if (j.contains("onsager")) opt.onsager = onsager_mode_from_string(j.at("onsager").get<std::string>());
    if (j.contains("convergence_threshold")) opt.convergence_threshold = j.at("convergence_threshold").get<double>();
    if (j.contains("onsager_scale")) opt.onsager_scale = j.at("onsager_scale").get<double>();
    if (j.contains("orthogonalize")) opt.orthogonalize = j.at("orthogonalize").get<bool>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("options: malformed JSON: ") + e.what());
  }
  return opt;
}

json to_json(const AmpRun& run, bool vectors) {
  json j{{"hamiltonian_seed", run.hamiltonian_seed},
         {"g_seed", run.g_seed},
         {"options", to_json(run.options)},
         {"delta", run.delta.str()},
         {"phi_q1", vec_to_json(run.phi_q1)},
         {"a", vec_to_json(run.a)},
         {"stage1",
          {{"iterations", static_cast<int>(run.m.size()) - 1},
           {"self_overlap", vecs_to_json(run.m_self)},
           {"step_overlap", vecs_to_json(run.m_step)},
           {"onsager_b", vecs_to_json(run.onsager_b)},
           {"energy", doubles_to_json(run.m_energy)},
           {"last_step", number(run.stage1_step)}}},
         {"has_stage2", run.has_stage2}};
  if (run.has_stage2) {
    j["stage2"] = {{"ell_lower", run.ell_lower},
                   {"ell_upper", run.ell_upper},
                   {"self_overlap", vecs_to_json(run.n_self)},
                   {"energy", doubles_to_json(run.n_energy)},
                   {"injections", run.injections},
                   {"unrounded_energy", number(run.unrounded_energy)},
                   {"output_energy", number(run.output_energy)},
                   {"rounding_distance", number(run.rounding_distance)}};
  }
  if (vectors) {
    j["vectors"] = {{"m", vecs_to_json(run.m)}, {"n", vecs_to_json(run.n)}, {"output", vec_to_json(run.output)}};
  }
  return j;
}

json to_json(const TreeSpec& tree) {
  return {{"depths", doubles_to_json(tree.depths)},
          {"K", tree.K},
          {"seed", tree.seed},
          {"rule", to_string(tree.rule)}};
}

TreeSpec tree_from_json(const json& j) {
  TreeSpec t;
  try {
    t.depths = j.at("depths").get<std::vector<double>>();
    t.K = j.at("K").get<int>();
    if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("rule")) t.rule = injection_rule_from_string(j.at("rule").get<std::string>());
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("tree: malformed JSON: ") + e.what());
  }
  return t;
}

}  // namespace msamp
