#include "msamp/hamiltonian.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "msamp/error.hpp"
#include "msamp/rng.hpp"

namespace msamp {

static_assert(std::endian::native == std::endian::little, "tensor cache assumes a little-endian host");

SpeciesLayout build_layout(int N, const std::vector<double>& lambda) {
  const int r = static_cast<int>(lambda.size());
  if (r < 1) throw InvalidArgument("build_layout: empty lambda");
  if (N < r) throw InvalidArgument("build_layout: N must be at least the number of species");
  SpeciesLayout out;
  out.N = N;
  out.sizes.assign(r, 0);
  std::vector<double> frac(r);
  int assigned = 0;
  for (int s = 0; s < r; ++s) {
    const double share = lambda[s] * N;
    out.sizes[s] = static_cast<int>(std::floor(share));
    frac[s] = share - out.sizes[s];
    assigned += out.sizes[s];
  }
  std::vector<int> order(r);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
  for (int i = 0; assigned < N; ++i, ++assigned) out.sizes[order[i % r]] += 1;
  // Empty blocks borrow one coordinate from the currently largest block.
  for (int s = 0; s < r; ++s) {
    if (out.sizes[s] > 0) continue;
    const int donor = static_cast<int>(std::max_element(out.sizes.begin(), out.sizes.end()) - out.sizes.begin());
    out.sizes[donor] -= 1;
    out.sizes[s] = 1;
  }
  out.offsets.assign(r + 1, 0);
  for (int s = 0; s < r; ++s) out.offsets[s + 1] = out.offsets[s] + out.sizes[s];
  out.species_of.resize(N);
  for (int s = 0; s < r; ++s)
    for (int i = out.offsets[s]; i < out.offsets[s + 1]; ++i) out.species_of[i] = s;
  return out;
}

Vec overlap(const SpeciesLayout& layout, const std::vector<double>& lambda, const Vec& a, const Vec& b) {
  if (a.size() != layout.N || b.size() != layout.N) throw InvalidArgument("overlap: dimension mismatch");
  const int r = layout.r();
  Vec out(r);
  for (int s = 0; s < r; ++s) {
    const int lo = layout.offsets[s], n = layout.sizes[s];
    out[s] = a.segment(lo, n).dot(b.segment(lo, n)) / (lambda[s] * layout.N);
  }
  return out;
}

double norm_N(const Vec& u) { return std::sqrt(u.squaredNorm() / static_cast<double>(u.size())); }

Vec diamond(const SpeciesLayout& layout, const Vec& v) {
  Vec out(layout.N);
  for (int s = 0; s < layout.r(); ++s) out.segment(layout.offsets[s], layout.sizes[s]).setConstant(v[s]);
  return out;
}

Vec diamond(const SpeciesLayout& layout, const Vec& v, const Vec& x) {
  Vec out(layout.N);
  for (int s = 0; s < layout.r(); ++s) {
    const int lo = layout.offsets[s], n = layout.sizes[s];
    out.segment(lo, n) = v[s] * x.segment(lo, n);
  }
  return out;
}

std::size_t packed_count(int N, int k) {
  // C(N + k - 1, k)
  long double c = 1.0L;
  for (int a = 1; a <= k; ++a) c = c * (N + a - 1) / a;
  return static_cast<std::size_t>(std::llround(c));
}

namespace {

std::uint64_t stream_offset(int N, int k) {
  std::uint64_t off = 0;
  for (int kk = 2; kk < k; ++kk) {
    std::uint64_t p = 1;
    for (int a = 0; a < kk; ++a) p *= static_cast<std::uint64_t>(N);
    off += p;
  }
  return off;
}

// Sum of a raw-entry functor over the distinct permutations of a sorted
// multi-index, in lexicographic order of the permuted tuples.
template <class Raw>
double fold_generic(int k, std::uint64_t N, std::array<int, 4> idx, const Raw& raw) {
  double s = 0.0;
  do {
    std::uint64_t lin = 0;
    for (int a = 0; a < k; ++a) lin = lin * N + idx[a];
    s += raw(lin);
  } while (std::next_permutation(idx.begin(), idx.begin() + k));
  return s;
}

template <class T, class Raw>
void fill_packed(std::vector<T>& out, int k, int N, const Raw& raw) {
  out.resize(packed_count(N, k));
  const std::uint64_t n = static_cast<std::uint64_t>(N);
  std::size_t p = 0;
  if (k == 2) {
    for (std::uint64_t i = 0; i < n; ++i) {
      out[p++] = static_cast<T>(raw(i * n + i));
      for (std::uint64_t j = i + 1; j < n; ++j) out[p++] = static_cast<T>(raw(i * n + j) + raw(j * n + i));
    }
  } else if (k == 3) {
    auto lin = [n](std::uint64_t a, std::uint64_t b, std::uint64_t c) { return (a * n + b) * n + c; };
    for (std::uint64_t i = 0; i < n; ++i)
      for (std::uint64_t j = i; j < n; ++j)
        for (std::uint64_t l = j; l < n; ++l) {
          double s;
          if (i < j && j < l)
            s = raw(lin(i, j, l)) + raw(lin(i, l, j)) + raw(lin(j, i, l)) + raw(lin(j, l, i)) + raw(lin(l, i, j)) +
                raw(lin(l, j, i));
          else if (i == j && j < l)
            s = raw(lin(i, i, l)) + raw(lin(i, l, i)) + raw(lin(l, i, i));
          else if (i < j && j == l)
            s = raw(lin(i, j, j)) + raw(lin(j, i, j)) + raw(lin(j, j, i));
          else
            s = raw(lin(i, i, i));
          out[p++] = static_cast<T>(s);
        }
  } else {
    std::array<int, 4> idx{};
    std::function<void(int, int)> rec = [&](int depth, int start) {
      if (depth == k) {
        out[p++] = static_cast<T>(fold_generic(k, n, idx, raw));
        return;
      }
      for (int v = start; v < N; ++v) {
        idx[depth] = v;
        rec(depth + 1, v);
      }
    };
    rec(0, 0);
  }
}

// Species segments [lo, hi) of the coordinate range [from, N).
struct Segment {
  int lo, hi, s;
};

std::vector<Segment> segments_from(const SpeciesLayout& layout, int from) {
  std::vector<Segment> out;
  for (int s = 0; s < layout.r(); ++s) {
    const int lo = std::max(from, layout.offsets[s]), hi = layout.offsets[s + 1];
    if (lo < hi) out.push_back({lo, hi, s});
  }
  return out;
}

template <class T>
void grad2(const T* S, const SpeciesLayout& layout, const std::vector<double>& gam, const double* x, double* g) {
  const int N = layout.N, r = layout.r();
  std::size_t p = 0;
  for (int i = 0; i < N; ++i) {
    const int si = layout.species_of[i];
    const double xi = x[i];
    double acc = 0.0;
    for (const Segment& seg : segments_from(layout, i)) {
      const double c = gam[si * r + seg.s];
      const T* row = S + p + (seg.lo - i);
      if (c != 0.0) {
        double dot = 0.0;
        const double cx = c * xi;
        for (int j = seg.lo; j < seg.hi; ++j) {
          const double v = row[j - seg.lo];
          dot += v * x[j];
          g[j] += cx * v;
        }
        acc += c * dot;
      }
    }
    g[i] += acc;
    p += static_cast<std::size_t>(N - i);
  }
}

template <class T>
void grad3(const T* S, const SpeciesLayout& layout, const std::vector<double>& gam, const double* x, double* g) {
  const int N = layout.N, r = layout.r();
  std::size_t p = 0;
  std::vector<std::vector<Segment>> segs(N);
  for (int j = 0; j < N; ++j) segs[j] = segments_from(layout, j);
  for (int i = 0; i < N; ++i) {
    const int si = layout.species_of[i];
    const double xi = x[i];
    double gi = 0.0;
    for (int j = i; j < N; ++j) {
      const int sj = layout.species_of[j];
      const double xj = x[j];
      const double xij = xi * xj;
      double acc = 0.0;
      for (const Segment& seg : segs[j]) {
        const double c = gam[(si * r + sj) * r + seg.s];
        if (c == 0.0) continue;
        const T* row = S + p + (seg.lo - j);
        const double cx = c * xij;
        double dot = 0.0;
        for (int l = seg.lo; l < seg.hi; ++l) {
          const double v = row[l - seg.lo];
          dot += v * x[l];
          g[l] += cx * v;
        }
        acc += c * dot;
      }
      gi += xj * acc;
      g[j] += xi * acc;
      p += static_cast<std::size_t>(N - j);
    }
    g[i] += gi;
  }
}

template <class T>
void grad4(const T* S, const SpeciesLayout& layout, const std::vector<double>& gam, const double* x, double* g) {
  const int N = layout.N, r = layout.r();
  std::size_t p = 0;
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j)
      for (int l = j; l < N; ++l) {
        const int si = layout.species_of[i], sj = layout.species_of[j], sl = layout.species_of[l];
        double acc = 0.0;
        for (const Segment& seg : segments_from(layout, l)) {
          const double c = gam[((si * r + sj) * r + sl) * r + seg.s];
          if (c == 0.0) continue;
          const T* row = S + p + (seg.lo - l);
          const double cx = c * x[i] * x[j] * x[l];
          double dot = 0.0;
          for (int m = seg.lo; m < seg.hi; ++m) {
            const double v = row[m - seg.lo];
            dot += v * x[m];
            g[m] += cx * v;
          }
          acc += c * dot;
        }
        g[i] += x[j] * x[l] * acc;
        g[j] += x[i] * x[l] * acc;
        g[l] += x[i] * x[j] * acc;
        p += static_cast<std::size_t>(N - l);
      }
}

// Adds the Hessian of sum_I gamma_I S_I x^I (unscaled) into H. Every
// ordered pair of distinct slots of the sorted multi-index contributes the
// product of the remaining slots, which handles repeated indices.
template <class T>
void hess_generic(const T* S, int k, const SpeciesLayout& layout, const std::vector<double>& gam, const double* x,
                  Mat& H) {
  const int N = layout.N, r = layout.r();
  std::array<int, 4> idx{};
  std::size_t p = 0;
  std::function<void(int, int)> rec = [&](int depth, int start) {
    if (depth == k) {
      std::size_t flat = 0;
      for (int a = 0; a < k; ++a) flat = flat * r + layout.species_of[idx[a]];
      const double c = gam[flat] * static_cast<double>(S[p++]);
      if (c == 0.0) return;
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b) {
          if (a == b) continue;
          double rest = c;
          for (int e = 0; e < k; ++e)
            if (e != a && e != b) rest *= x[idx[e]];
          H(idx[a], idx[b]) += rest;
        }
      return;
    }
    for (int v = start; v < N; ++v) {
      idx[depth] = v;
      rec(depth + 1, v);
    }
  };
  rec(0, 0);
}

double degree_scale(int N, int k) { return std::pow(static_cast<double>(N), -(k - 1) / 2.0); }

}  // namespace

HamiltonianInstance::HamiltonianInstance(const Mixture& mix, SpeciesLayout layout, std::uint64_t seed)
    : mix_(mix), layout_(std::move(layout)), seed_(seed) {}

std::size_t HamiltonianInstance::required_bytes(const MixtureSpec& spec, int N, TensorPrecision precision) {
  const std::size_t width = precision == TensorPrecision::Float32 ? sizeof(float) : sizeof(double);
  std::size_t total = 0;
  for (const auto& [k, g] : spec.gammas) total += packed_count(N, k) * width;
  return total;
}

namespace {

TensorPrecision resolve_precision(const MixtureSpec& spec, int N, const HamiltonianOptions& opt) {
  if (opt.precision != TensorPrecision::Auto) {
    const std::size_t need = HamiltonianInstance::required_bytes(spec, N, opt.precision);
    if (need > opt.byte_budget)
      throw InvalidArgument("hamiltonian: tensors need " + std::to_string(need) + " bytes, budget is " +
                            std::to_string(opt.byte_budget));
    return opt.precision;
  }
  if (HamiltonianInstance::required_bytes(spec, N, TensorPrecision::Float64) <= opt.byte_budget)
    return TensorPrecision::Float64;
  const std::size_t need = HamiltonianInstance::required_bytes(spec, N, TensorPrecision::Float32);
  if (need > opt.byte_budget)
    throw InvalidArgument("hamiltonian: tensors need " + std::to_string(need) + " bytes even as float32, budget is " +
                          std::to_string(opt.byte_budget));
  return TensorPrecision::Float32;
}

void check_degrees(const MixtureSpec& spec) {
  for (const auto& [k, g] : spec.gammas)
    if (k > 4) throw InvalidArgument("hamiltonian: degrees above 4 are not supported");
}

}  // namespace

HamiltonianInstance HamiltonianInstance::sample(const Mixture& mix, int N, std::uint64_t seed,
                                                const HamiltonianOptions& opt) {
  check_degrees(mix.spec());
  const TensorPrecision prec = resolve_precision(mix.spec(), N, opt);
  HamiltonianInstance H(mix, build_layout(N, mix.lambda()), seed);
  const CounterStream stream(seed);
  for (const auto& [k, g] : mix.spec().gammas) {
    PackedTensor t;
    t.k = k;
    t.N = N;
    const std::uint64_t off = stream_offset(N, k);
    auto raw = [&stream, off](std::uint64_t lin) { return stream.normal(off + lin); };
    if (prec == TensorPrecision::Float32)
      fill_packed(t.f32, k, N, raw);
    else
      fill_packed(t.f64, k, N, raw);
    H.tensors_.emplace(k, std::move(t));
  }
  return H;
}

HamiltonianInstance HamiltonianInstance::from_raw(const Mixture& mix, int N,
                                                  const std::map<int, std::vector<double>>& raw,
                                                  TensorPrecision precision) {
  check_degrees(mix.spec());
  HamiltonianInstance H(mix, build_layout(N, mix.lambda()), 0);
  for (const auto& [k, g] : mix.spec().gammas) {
    auto it = raw.find(k);
    if (it == raw.end()) throw InvalidArgument("from_raw: missing raw tensor for degree " + std::to_string(k));
    std::size_t need = 1;
    for (int a = 0; a < k; ++a) need *= static_cast<std::size_t>(N);
    if (it->second.size() != need) throw InvalidArgument("from_raw: raw tensor must have N^k entries");
    PackedTensor t;
    t.k = k;
    t.N = N;
    const std::vector<double>& data = it->second;
    auto rawf = [&data](std::uint64_t lin) { return data[lin]; };
    if (precision == TensorPrecision::Float32)
      fill_packed(t.f32, k, N, rawf);
    else
      fill_packed(t.f64, k, N, rawf);
    H.tensors_.emplace(k, std::move(t));
  }
  return H;
}

double HamiltonianInstance::raw_entry(std::uint64_t seed, int N, int k, const std::vector<int>& idx) {
  if (static_cast<int>(idx.size()) != k) throw InvalidArgument("raw_entry: index length must equal k");
  std::uint64_t lin = 0;
  for (int a = 0; a < k; ++a) lin = lin * static_cast<std::uint64_t>(N) + static_cast<std::uint64_t>(idx[a]);
  return CounterStream(seed).normal(stream_offset(N, k) + lin);
}

std::size_t HamiltonianInstance::bytes() const {
  std::size_t b = 0;
  for (const auto& [k, t] : tensors_) b += t.bytes();
  return b;
}

void HamiltonianInstance::check_dim(const Vec& v, const char* who) const {
  if (v.size() != layout_.N) throw InvalidArgument(std::string(who) + ": dimension mismatch");
}

void HamiltonianInstance::accumulate_gradient(const PackedTensor& t, const Vec& sigma, Vec& g) const {
  const auto& gam = mix_.spec().gammas.at(t.k);
  auto run = [&](const auto* S) {
    switch (t.k) {
      case 2:
        grad2(S, layout_, gam, sigma.data(), g.data());
        break;
      case 3:
        grad3(S, layout_, gam, sigma.data(), g.data());
        break;
      default:
        grad4(S, layout_, gam, sigma.data(), g.data());
        break;
    }
  };
  if (t.f64.empty())
    run(t.f32.data());
  else
    run(t.f64.data());
}

Evaluation HamiltonianInstance::evaluate(const Vec& sigma) const {
  check_dim(sigma, "evaluate");
  Evaluation out;
  const Vec field = field_vector();
  out.gradient = field;
  out.energy = field.dot(sigma);
  for (const auto& [k, t] : tensors_) {
    Vec gk = Vec::Zero(layout_.N);
    accumulate_gradient(t, sigma, gk);
    gk *= degree_scale(layout_.N, k);
    // Euler's identity for the degree-k homogeneous part.
    const double ek = gk.dot(sigma) / k;
    out.degree_energy[k] = ek;
    out.energy += ek;
    out.gradient += gk;
  }
  return out;
}

double HamiltonianInstance::energy(const Vec& sigma) const { return evaluate(sigma).energy; }

Vec HamiltonianInstance::gradient(const Vec& sigma) const { return evaluate(sigma).gradient; }

Vec HamiltonianInstance::tensor_apply(int k, const Vec& u) const {
  check_dim(u, "tensor_apply");
  const int D = mix_.spec().max_degree();
  if (k < 2 || k > D) throw InvalidArgument("tensor_apply: degree out of range");
  Vec g = Vec::Zero(layout_.N);
  auto it = tensors_.find(k);
  if (it == tensors_.end()) return g;
  accumulate_gradient(it->second, u, g);
  return g * degree_scale(layout_.N, k);
}

Mat HamiltonianInstance::hessian(const Vec& sigma, int cap) const {
  check_dim(sigma, "hessian");
  if (layout_.N > cap) throw InvalidArgument("hessian: N exceeds the cap of " + std::to_string(cap));
  Mat H = Mat::Zero(layout_.N, layout_.N);
  for (const auto& [k, t] : tensors_) {
    Mat Hk = Mat::Zero(layout_.N, layout_.N);
    const auto& gam = mix_.spec().gammas.at(k);
    if (t.f64.empty())
      hess_generic(t.f32.data(), k, layout_, gam, sigma.data(), Hk);
    else
      hess_generic(t.f64.data(), k, layout_, gam, sigma.data(), Hk);
    H += Hk * degree_scale(layout_.N, k);
  }
  return 0.5 * (H + H.transpose());
}

Vec HamiltonianInstance::field_vector() const {
  Vec h(mix_.r());
  for (int s = 0; s < mix_.r(); ++s) h[s] = mix_.h()[s];
  return diamond(layout_, h);
}

namespace {

constexpr char kMagic[8] = {'M', 'S', 'A', 'M', 'P', 'T', 'N', 'S'};
constexpr std::uint32_t kCacheVersion = 1;

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw InvalidArgument("tensor cache: truncated file");
  return v;
}

}  // namespace

void HamiltonianInstance::save_cache(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("tensor cache: cannot write " + path);
  os.write(kMagic, sizeof(kMagic));
  put(os, kCacheVersion);
  put(os, spec_hash(mix_.spec()));
  put(os, seed_);
  put(os, static_cast<std::uint64_t>(layout_.N));
  put(os, static_cast<std::uint32_t>(tensors_.size()));
  std::vector<double> buf;
  for (const auto& [k, t] : tensors_) {
    put(os, static_cast<std::uint32_t>(k));
    put(os, static_cast<std::uint64_t>(t.size()));
    constexpr std::size_t chunk = 1 << 20;
    for (std::size_t p = 0; p < t.size(); p += chunk) {
      const std::size_t n = std::min(chunk, t.size() - p);
      buf.resize(n);
      for (std::size_t q = 0; q < n; ++q) buf[q] = t.at(p + q);
      os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(double)));
    }
  }
  if (!os) throw InvalidArgument("tensor cache: write failed for " + path);
}

HamiltonianInstance HamiltonianInstance::load_cache(const std::string& path, const Mixture& mix, int N,
                                                    std::uint64_t seed, const HamiltonianOptions& opt) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("tensor cache: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw InvalidArgument("tensor cache: bad magic in " + path);
  if (get<std::uint32_t>(is) != kCacheVersion) throw InvalidArgument("tensor cache: unsupported version in " + path);
  if (get<std::uint64_t>(is) != spec_hash(mix.spec())) throw InvalidArgument("tensor cache: spec hash mismatch");
  if (get<std::uint64_t>(is) != seed) throw InvalidArgument("tensor cache: seed mismatch");
  if (get<std::uint64_t>(is) != static_cast<std::uint64_t>(N)) throw InvalidArgument("tensor cache: N mismatch");
  const TensorPrecision prec = resolve_precision(mix.spec(), N, opt);
  HamiltonianInstance H(mix, build_layout(N, mix.lambda()), seed);
  const auto count = get<std::uint32_t>(is);
  for (std::uint32_t d = 0; d < count; ++d) {
    PackedTensor t;
    t.k = static_cast<int>(get<std::uint32_t>(is));
    t.N = N;
    const auto n = get<std::uint64_t>(is);
    if (!mix.spec().gammas.count(t.k) || n != packed_count(N, t.k))
      throw InvalidArgument("tensor cache: degree layout mismatch");
    std::vector<double> buf(n);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw InvalidArgument("tensor cache: truncated file");
    if (prec == TensorPrecision::Float32)
      t.f32.assign(buf.begin(), buf.end());
    else
      t.f64 = std::move(buf);
    H.tensors_.emplace(t.k, std::move(t));
  }
  if (H.tensors_.size() != mix.spec().gammas.size()) throw InvalidArgument("tensor cache: missing degrees");
  return H;
}

HamiltonianInstance sample_cached(const Mixture& mix, int N, std::uint64_t seed, const std::string& cache_dir,
                                  std::size_t max_cache_bytes, const HamiltonianOptions& opt) {
  if (cache_dir.empty()) return HamiltonianInstance::sample(mix, N, seed, opt);
  std::ostringstream name;
  name << "H_" << std::hex << spec_hash(mix.spec()) << std::dec << "_N" << N << "_s" << seed << ".bin";
  const std::filesystem::path path = std::filesystem::path(cache_dir) / name.str();
  if (std::filesystem::exists(path)) return HamiltonianInstance::load_cache(path.string(), mix, N, seed, opt);
  HamiltonianInstance H = HamiltonianInstance::sample(mix, N, seed, opt);
  const std::size_t file_bytes = HamiltonianInstance::required_bytes(mix.spec(), N, TensorPrecision::Float64);
  if (file_bytes <= max_cache_bytes) {
    std::filesystem::create_directories(cache_dir);
    H.save_cache(path.string());
  }
  return H;
}

bool CovarianceReport::all_within() const {
  return std::none_of(pairs.begin(), pairs.end(), [](const CovariancePair& p) { return p.flagged; });
}

CovarianceReport covariance_mc_check(const Mixture& mix, int N, const std::vector<std::pair<Vec, Vec>>& points,
                                     int n_seeds, std::uint64_t base_seed) {
  CovarianceReport rep;
  rep.n_seeds = n_seeds;
  const std::size_t P = points.size();
  std::vector<double> sum(P, 0.0), sumsq(P, 0.0);
  for (int k = 0; k < n_seeds; ++k) {
    const HamiltonianInstance H = HamiltonianInstance::sample(mix, N, base_seed + static_cast<std::uint64_t>(k));
    const Vec field = H.field_vector();
    for (std::size_t p = 0; p < P; ++p) {
      const double a = H.energy(points[p].first) - field.dot(points[p].first);
      const double b = H.energy(points[p].second) - field.dot(points[p].second);
      sum[p] += a * b;
      sumsq[p] += a * b * a * b;
    }
  }
  const SpeciesLayout layout = build_layout(N, mix.lambda());
  for (std::size_t p = 0; p < P; ++p) {
    CovariancePair c;
    c.overlap_xi = N * mix.xi(overlap(layout, mix.lambda(), points[p].first, points[p].second));
    c.empirical = sum[p] / n_seeds;
    const double var = std::max(0.0, sumsq[p] / n_seeds - c.empirical * c.empirical);
    c.std_error = std::sqrt(var / std::max(1, n_seeds - 1));
    c.flagged = std::abs(c.empirical - c.overlap_xi) > 4.0 * c.std_error + 1e-12;
    rep.pairs.push_back(c);
  }
  return rep;
}

}  // namespace msamp
