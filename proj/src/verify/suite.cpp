#include "verify/suite.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "core/ops.hpp"
#include "core/parallel.hpp"
#include "core/profile.hpp"
#include "core/rng.hpp"
#include "json.hpp"
#include "model/model.hpp"
#include "nn/csa.hpp"
#include "nn/rasa.hpp"
#include "verify/gradcheck.hpp"
#include "verify/oracle.hpp"

namespace lvt {

bool CheckReport::all_pass() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string CheckReport::to_json() const {
  nlohmann::json j;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"name", c.name},
                           {"pass", c.pass},
                           {"measured", c.measured},
                           {"tolerance", c.tolerance},
                           {"elapsed_s", c.elapsed_s},
                           {"note", c.note}});
  }
  j["all_pass"] = all_pass();
  return j.dump(2);
}

namespace {

using Clock = std::chrono::steady_clock;

/// Collects sub-assertions of one check; measured is the failure count.
struct Tally {
  double fails = 0;
  std::string note;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      fails += 1;
      append("FAIL " + what);
    }
  }
  void append(const std::string& s) {
    if (!note.empty()) note += "; ";
    note += s;
  }
};

class Runner {
 public:
  Runner(CheckReport& report, unsigned long long seed) : report_(report), seed_(seed) {}

  /// Body draws from its own rng, fills note, returns the measured value.
  void check(const std::string& name, double tolerance,
             const std::function<double(Rng&, std::string&)>& body) {
    CheckResult res;
    res.name = name;
    res.tolerance = tolerance;
    const auto t0 = Clock::now();
    try {
      Rng rng(seed_ ^ hash64(name.c_str()));
      res.measured = body(rng, res.note);
      res.pass = res.measured <= tolerance;
    } catch (const std::exception& e) {
      res.pass = false;
      res.measured = std::numeric_limits<double>::infinity();
      if (!res.note.empty()) res.note += "; ";
      res.note += std::string("exception: ") + e.what();
    }
    res.elapsed_s = std::chrono::duration<double>(Clock::now() - t0).count();
    report_.checks.push_back(res);
  }

 private:
  CheckReport& report_;
  unsigned long long seed_;
};

/// Denominator floor for gradient comparisons: with the 1e-4 tolerance this
/// grants an absolute allowance of 1e-9 for gradients whose true value is
/// zero (see rasa.key_bias_invariance).
constexpr double kGradFloor = 1e-5;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

/// Scale-normalized worst deviation: max|a-b| / (max|ref| + 1).
template <typename T>
double agreement_err(const TensorT<T>& got, const TensorT<T>& ref) {
  return double(max_abs_diff(got, ref)) / (double(max_abs(ref)) + 1.0);
}

template <typename T>
CsaParamsT<T> random_csa(int dim, int heads, Rng& rng, bool raw_division) {
  CsaParamsT<T> p;
  p.dim = dim;
  p.heads = heads;
  p.raw_division = raw_division;
  const index_t k2 = index_t(p.kernel) * p.kernel;
  const index_t dh = p.head_dim();
  p.w_filter = rng.trunc_normal_tensor<T>({k2, heads, dh, dh}, 0.2);
  // Raw division is only defined away from zero row sums; keep the score
  // weights (and the inputs the caller draws) positive in that regime.
  p.w_qk = raw_division ? rng.uniform_tensor<T>({heads * k2 * k2, dim}, 0.2, 1.0)
                        : rng.trunc_normal_tensor<T>({heads * k2 * k2, dim}, 0.2);
  p.w_out = rng.trunc_normal_tensor<T>({dim, dim}, 0.2);
  return p;
}

template <typename T>
AsaParamsT<T> random_asa(int dim, int heads, int ratio, Rng& rng) {
  AsaParamsT<T> p;
  p.dim = dim;
  p.attn.dim = dim;
  p.attn.heads = heads;
  p.w_q1 = rng.trunc_normal_tensor<T>({dim, dim}, 0.2);
  p.b_q1 = rng.uniform_tensor<T>({dim}, -0.1, 0.1);
  p.w_qd = rng.trunc_normal_tensor<T>({dim, 1, 3, 3}, 0.2);
  p.b_qd = rng.uniform_tensor<T>({dim}, -0.1, 0.1);
  p.w_k = rng.trunc_normal_tensor<T>({dim, dim}, 0.2);
  p.b_k = rng.uniform_tensor<T>({dim}, -0.1, 0.1);
  p.w_v = rng.trunc_normal_tensor<T>({dim, dim}, 0.2);
  p.b_v = rng.uniform_tensor<T>({dim}, -0.1, 0.1);
  p.w_out = rng.trunc_normal_tensor<T>({dim, dim}, 0.2);
  p.b_out = rng.uniform_tensor<T>({dim}, -0.1, 0.1);
  p.sr.dim = dim;
  p.sr.ratio = ratio;
  if (ratio > 1) {
    p.sr.proj_w = rng.trunc_normal_tensor<T>({dim, dim, ratio, ratio}, 0.2);
    p.sr.proj_b = rng.uniform_tensor<T>({dim}, -0.1, 0.1);
    p.sr.gamma = rng.uniform_tensor<T>({dim}, 0.5, 1.5);
    p.sr.beta = rng.uniform_tensor<T>({dim}, -0.2, 0.2);
  }
  return p;
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.write(bytes.data(), std::streamsize(bytes.size()))) {
    throw IoError("cannot write " + path);
  }
}

// --------------------------------------------------------------------------
// tensor scope: kernel-level identities, oracle agreement and the finite-
// difference machinery itself.

template <typename T>
void tensor_checks(Runner& r) {
  constexpr bool wide = sizeof(T) == 8;
  const double tight = wide ? 1e-10 : 1e-4;

  r.check("tensor.unfold_fold_adjoint", tight, [](Rng& rng, std::string& note) {
    double worst = 0;
    const struct {
      int c, h, w, k, s, p, d;
    } geoms[] = {{3, 7, 9, 3, 2, 1, 1}, {2, 8, 8, 3, 1, 1, 2}, {4, 6, 5, 2, 2, 0, 1}};
    for (const auto& g : geoms) {
      ConvSpec spec;
      spec.kernel = g.k;
      spec.stride = g.s;
      spec.padding = g.p;
      spec.dilation = g.d;
      TensorT<T> x = rng.trunc_normal_tensor<T>({g.c, g.h, g.w}, 1.0);
      const index_t l = spec.out_extent(g.h) * spec.out_extent(g.w);
      TensorT<T> w = rng.trunc_normal_tensor<T>({l, index_t(g.k) * g.k, g.c}, 1.0);
      // <unfold(x), w> must equal <x, fold(w)>: fold is unfold's adjoint.
      const double lhs = double(dot(unfold(x, spec), w));
      const double rhs = double(dot(x, fold(w, g.h, g.w, spec)));
      worst = std::max(worst, rel_err(lhs, rhs));
    }
    note = "3 geometries incl. dilation/no-padding";
    return worst;
  });

  r.check("tensor.fold_mutation_detected", 0, [](Rng& rng, std::string& note) {
    // Teeth: a fold that drops window 0 must break the adjoint identity.
    ConvSpec spec;
    spec.kernel = 3;
    spec.stride = 2;
    spec.padding = 1;
    const index_t h = 8, w = 10, c = 3;
    TensorT<T> x = rng.uniform_tensor<T>({c, h, w}, 0.5, 1.5);
    const index_t l = spec.out_extent(h) * spec.out_extent(w);
    TensorT<T> win = rng.uniform_tensor<T>({l, 9, c}, 0.5, 1.5);
    TensorT<T> bad({c, h, w});
    const index_t gw = spec.out_extent(w);
    for (index_t li = 1; li < l; ++li) {  // li = 0 deliberately skipped
      const index_t wi = li / gw, wj = li % gw;
      for (index_t q = 0; q < 9; ++q) {
        const index_t rr = wi * spec.stride - spec.padding + q / 3;
        const index_t cc = wj * spec.stride - spec.padding + q % 3;
        if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
        for (index_t ch = 0; ch < c; ++ch) bad(ch, rr, cc) += win(li, q, ch);
      }
    }
    const double gap = rel_err(double(dot(unfold(x, spec), win)), double(dot(x, bad)));
    note = "corrupted-fold adjoint gap " + fmt(gap);
    return gap > 1e-3 ? 0.0 : 1.0;
  });

  r.check("tensor.softmax_rows", wide ? 1e-12 : 1e-5, [](Rng& rng, std::string& note) {
    TensorT<T> x = rng.trunc_normal_tensor<T>({5, 7}, 4.0);
    TensorT<T> y = softmax(x, 1);
    double worst = 0;
    for (index_t i = 0; i < 5; ++i) {
      double sum = 0;
      for (index_t j = 0; j < 7; ++j) {
        sum += double(y(i, j));
        if (y(i, j) < 0) worst = 1;
      }
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    TensorT<T> shifted = x;
    for (index_t i = 0; i < shifted.numel(); ++i) shifted[i] += T(3.7);
    worst = std::max(worst, double(max_abs_diff(softmax(shifted, 1), y)));
    note = "rows sum to 1, nonnegative, shift-invariant";
    return worst;
  });

  r.check("tensor.conv_linearity", wide ? 1e-12 : 1e-5, [](Rng& rng, std::string& note) {
    ConvSpec spec;
    spec.kernel = 3;
    spec.stride = 1;
    spec.padding = 1;
    TensorT<T> x1 = rng.trunc_normal_tensor<T>({3, 6, 7}, 1.0);
    TensorT<T> x2 = rng.trunc_normal_tensor<T>({3, 6, 7}, 1.0);
    TensorT<T> w = rng.trunc_normal_tensor<T>({4, 3, 3, 3}, 0.5);
    const T a = T(0.7), b = T(-1.3);
    TensorT<T> mix = add(scale(x1, a), scale(x2, b));
    TensorT<T> lhs = conv2d<T>(mix, w, nullptr, spec);
    TensorT<T> rhs = add(scale(conv2d<T>(x1, w, nullptr, spec), a),
                         scale(conv2d<T>(x2, w, nullptr, spec), b));
    note = "conv(0.7*x1 - 1.3*x2) vs linear combination";
    return agreement_err(lhs, rhs);
  });

  r.check("tensor.conv_identity", 0, [](Rng& rng, std::string& note) {
    TensorT<T> x = rng.trunc_normal_tensor<T>({3, 6, 8}, 1.0);
    // Depthwise 3x3 with a centered one-hot kernel.
    ConvSpec dws;
    dws.kernel = 3;
    dws.stride = 1;
    dws.padding = 1;
    dws.groups = 3;
    TensorT<T> wd({3, 1, 3, 3});
    for (index_t c = 0; c < 3; ++c) wd(c, 0, 1, 1) = T(1);
    double worst = double(max_abs_diff(conv2d<T>(x, wd, nullptr, dws), x));
    // 1x1 with the identity channel mix.
    ConvSpec one;
    TensorT<T> wi({3, 3, 1, 1});
    for (index_t c = 0; c < 3; ++c) wi(c, c, 0, 0) = T(1);
    worst = std::max(worst, double(max_abs_diff(conv2d<T>(x, wi, nullptr, one), x)));
    note = "one-hot depthwise 3x3 and identity 1x1 reproduce input bitwise";
    return worst;
  });

  r.check("tensor.conv_oracle", tight, [](Rng& rng, std::string& note) {
    const struct {
      int cin, cout, k, s, p, d, g, h, w;
    } cases[] = {{3, 5, 3, 2, 1, 1, 1, 9, 11},
                 {4, 4, 3, 1, 2, 2, 4, 8, 8},
                 {6, 8, 2, 2, 0, 1, 2, 10, 12},
                 {4, 6, 5, 3, 2, 1, 1, 12, 9}};
    double worst = 0;
    for (const auto& cs : cases) {
      ConvSpec spec;
      spec.kernel = cs.k;
      spec.stride = cs.s;
      spec.padding = cs.p;
      spec.dilation = cs.d;
      spec.groups = cs.g;
      TensorT<T> x = rng.trunc_normal_tensor<T>({cs.cin, cs.h, cs.w}, 1.0);
      TensorT<T> w =
          rng.trunc_normal_tensor<T>({cs.cout, cs.cin / cs.g, cs.k, cs.k}, 0.5);
      TensorT<T> bias = rng.uniform_tensor<T>({cs.cout}, -0.5, 0.5);
      worst = std::max(
          worst, agreement_err(conv2d(x, w, &bias, spec), oracle_conv2d(x, w, &bias, spec)));
    }
    note = "4 geometries incl. grouped/dilated/strided";
    return worst;
  });

  r.check("tensor.attention_oracle", tight, [](Rng& rng, std::string& note) {
    AttentionConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    double worst = 0;
    for (const auto& [n, m] : {std::pair<index_t, index_t>{10, 12}, {1, 7}, {6, 1}}) {
      TensorT<T> q = rng.trunc_normal_tensor<T>({n, 8}, 1.0);
      TensorT<T> k = rng.trunc_normal_tensor<T>({m, 8}, 1.0);
      TensorT<T> v = rng.trunc_normal_tensor<T>({m, 8}, 1.0);
      worst = std::max(worst, agreement_err(scaled_dot_attention(q, k, v, cfg),
                                            oracle_attention(q, k, v, cfg)));
    }
    note = "heads=2 over [10x12],[1x7],[6x1] query/key grids";
    return worst;
  });

  r.check("tensor.bitwise_repeat", 0, [](Rng& rng, std::string& note) {
    ConvSpec spec;
    spec.kernel = 3;
    spec.stride = 1;
    spec.padding = 1;
    TensorT<T> x = rng.trunc_normal_tensor<T>({4, 7, 7}, 1.0);
    TensorT<T> w = rng.trunc_normal_tensor<T>({4, 4, 3, 3}, 0.3);
    TensorT<T> gamma = rng.uniform_tensor<T>({4}, 0.5, 1.5);
    TensorT<T> beta = rng.uniform_tensor<T>({4}, -0.2, 0.2);
    auto run = [&] {
      TensorT<T> y = conv2d<T>(x, w, nullptr, spec);
      TensorT<T> t = layer_norm(to_tokens(y), gamma, beta, 1e-5);
      return softmax(t, 1);
    };
    note = "conv -> layer_norm -> softmax chain repeated";
    return double(max_abs_diff(run(), run()));
  });
}

void tensor_checks_f64_only(Runner& r) {
  r.check("tensor.fd_quadratic", 2.0, [](Rng& rng, std::string& note) {
    // Central differences converge quadratically: halving eps should shrink
    // the deviation from the analytic gradient by ~4x.
    ConvSpec spec;
    spec.kernel = 3;
    spec.stride = 1;
    spec.padding = 1;
    TensorT<double> x = rng.trunc_normal_tensor<double>({2, 5, 5}, 1.0);
    TensorT<double> w = rng.trunc_normal_tensor<double>({3, 2, 3, 3}, 0.5);
    auto f = [&](const TensorT<double>& probe) {
      TensorT<double> y = silu(conv2d<double>(probe, w, nullptr, spec));
      double sum = 0;
      for (index_t i = 0; i < y.numel(); ++i) sum += y[i];
      return sum;
    };
    TensorT<double> pre = conv2d<double>(x, w, nullptr, spec);
    TensorT<double> dpre = silu_backward(pre, TensorT<double>::full(pre.shape(), 1.0));
    TensorT<double> analytic = conv2d_backward(x, w, false, spec, dpre).dx;
    auto l1 = [&](double eps) {
      TensorT<double> fd = finite_diff_grad(f, x, eps);
      double s = 0;
      for (index_t i = 0; i < fd.numel(); ++i) s += std::abs(fd[i] - analytic[i]);
      return s;
    };
    const double coarse = l1(2e-3), fine = l1(1e-3);
    const double ratio = coarse / std::max(fine, 1e-300);
    note = "fd error ratio at eps 2e-3 vs 1e-3: " + fmt(ratio) + " (want ~4)";
    if (fine > 1e-4) return 1e9;  // checker itself is broken
    return std::abs(ratio - 4.0);
  });
}

// --------------------------------------------------------------------------
// csa scope. Forward agreement and gradients always run in double.

void csa_checks(Runner& r) {
  r.check("csa.window_grid", 0, [](Rng& rng, std::string& note) {
    Tally t;
    CsaParamsT<double> p = random_csa<double>(8, 2, rng, false);
    ConvSpec spec;
    spec.kernel = p.kernel;
    spec.stride = p.stride;
    spec.padding = p.padding();
    t.require(spec.out_extent(56) == 28, "56 -> 28 windows per side");
    TensorT<double> x = rng.trunc_normal_tensor<double>({8, 12, 16}, 1.0);
    t.require(unfold(x, spec).extent(0) == 6 * 8, "12x16 -> 6x8 window grid");
    TensorT<double> y = csa_forward(x, p);
    t.require(y.same_shape(x), "output extents equal input extents");
    t.append("stride-2 windows, resolution-preserving fold");
    note = t.note;
    return t.fails;
  });

  r.check("csa.alpha_simplex", 1e-9, [](Rng& rng, std::string& note) {
    double worst = 0;
    for (bool raw : {false, true}) {
      CsaParamsT<double> p = random_csa<double>(8, 2, rng, raw);
      TensorT<double> centers = raw ? rng.uniform_tensor<double>({20, 8}, 0.1, 1.0)
                                    : rng.trunc_normal_tensor<double>({20, 8}, 2.0);
      TensorT<double> a = csa_alpha(centers, p);
      for (index_t l = 0; l < 20; ++l)
        for (index_t h = 0; h < 2; ++h)
          for (index_t i = 0; i < 9; ++i) {
            double sum = 0;
            for (index_t j = 0; j < 9; ++j) {
              sum += a(l, h, i, j);
              if (!raw && a(l, h, i, j) < 0) worst = 1;
            }
            worst = std::max(worst, std::abs(sum - 1.0));
          }
    }
    note = "rows sum to 1 for exponential and raw-division normalization";
    return worst;
  });

  r.check("csa.wqk_zero_uniform", 1e-12, [](Rng& rng, std::string& note) {
    CsaParamsT<double> p = random_csa<double>(8, 2, rng, false);
    p.w_qk = TensorT<double>::zeros(p.w_qk.shape());
    TensorT<double> centers = rng.trunc_normal_tensor<double>({15, 8}, 1.0);
    TensorT<double> a = csa_alpha(centers, p);
    double worst = 0;
    for (index_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a[i] - 1.0 / 9));
    note = "zero score weights -> uniform 1/9 attention";
    return worst;
  });

  r.check("csa.conv_reduction", 1e-5, [](Rng& rng, std::string& note) {
    // With the summation weights frozen at one and the output projection at
    // identity, the layer computes exactly a strided grouped convolution at
    // the window centers.
    const int d = 8, heads = 2, dh = 4;
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
      CsaParamsT<double> p = random_csa<double>(d, heads, rng, false);
      p.w_out = TensorT<double>::eye(d);
      TensorT<double> x = rng.trunc_normal_tensor<double>({d, 10, 12}, 1.0);
      const index_t l = 5 * 6;
      TensorT<double> ones = TensorT<double>::full({l, heads, 9, 9}, 1.0);
      TensorT<double> y = csa_forward(x, p, &ones);

      TensorT<double> wconv({d, dh, 3, 3});
      for (index_t h = 0; h < heads; ++h)
        for (index_t c = 0; c < dh; ++c)
          for (index_t e = 0; e < dh; ++e)
            for (index_t a = 0; a < 3; ++a)
              for (index_t b = 0; b < 3; ++b)
                wconv(h * dh + c, e, a, b) = p.w_filter(a * 3 + b, h, c, e);
      ConvSpec spec;
      spec.kernel = 3;
      spec.stride = 2;
      spec.padding = 1;
      spec.groups = heads;
      TensorT<double> yc = oracle_conv2d<double>(x, wconv, nullptr, spec);
      // Even positions receive exactly one window's center value.
      for (index_t c = 0; c < d; ++c)
        for (index_t a = 0; a < yc.extent(1); ++a)
          for (index_t b = 0; b < yc.extent(2); ++b)
            worst = std::max(worst, rel_err(y(c, 2 * a, 2 * b), yc(c, a, b)));
    }
    note = "frozen weights == strided conv at window centers, 20 trials";
    return worst;
  });

  r.check("csa.attention_reduction", 1e-5, [](Rng& rng, std::string& note) {
    // Tying every position's projection to one matrix turns the layer into
    // windowed attention with that matrix as the value projection.
    double worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
      CsaParamsT<double> p = random_csa<double>(8, 2, rng, false);
      for (index_t j = 1; j < 9; ++j)
        for (index_t h = 0; h < 2; ++h)
          for (index_t c = 0; c < 4; ++c)
            for (index_t e = 0; e < 4; ++e) p.w_filter(j, h, c, e) = p.w_filter(0, h, c, e);
      TensorT<double> x = rng.trunc_normal_tensor<double>({8, 9, 11}, 1.0);
      worst = std::max(worst,
                       agreement_err(csa_forward(x, p), oracle_windowed_attention(x, p)));
    }
    note = "tied projections == windowed attention, 10 trials";
    return worst;
  });

  r.check("csa.locality", 0, [](Rng& rng, std::string& note) {
    CsaParamsT<double> p = random_csa<double>(8, 2, rng, false);
    TensorT<double> x = rng.trunc_normal_tensor<double>({8, 16, 16}, 1.0);
    const index_t pi = 7, pj = 8;
    TensorT<double> base = csa_forward(x, p);
    auto probe_diff = [&](index_t bi, index_t bj) {
      TensorT<double> bumped = x;
      bumped(0, bi, bj) += 5.0;
      bumped(3, bi, bj) -= 2.0;
      TensorT<double> y = csa_forward(bumped, p);
      double diff = 0;
      for (index_t c = 0; c < 8; ++c)
        diff = std::max(diff, std::abs(y(c, pi, pj) - base(c, pi, pj)));
      return diff;
    };
    double far = 0;  // Chebyshev distance >= 3: bitwise no effect
    for (const auto& [bi, bj] :
         {std::pair<index_t, index_t>{10, 8}, {7, 5}, {4, 11}, {10, 11}, {15, 15}, {7, 11}}) {
      far = std::max(far, probe_diff(bi, bj));
    }
    Tally t;
    t.require(probe_diff(9, 8) > 0, "distance-2 perturbation reaches the probe");
    t.append("distance>=3 perturbations leave probe bitwise unchanged");
    note = t.note;
    return std::max(far, t.fails);
  });

  r.check("csa.finite_output", 0, [](Rng& rng, std::string& note) {
    CsaParamsT<double> p = random_csa<double>(8, 2, rng, false);
    TensorT<double> x = rng.trunc_normal_tensor<double>({8, 10, 10}, 1000.0);
    TensorT<double> y = csa_forward(x, p);  // forward throws on non-finite
    note = "1e3-scale inputs, max |y| = " + fmt(double(max_abs(y)));
    return 0.0;
  });

  r.check("csa.oracle_agreement", 1e-5, [](Rng& rng, std::string& note) {
    const int dims[] = {4, 8, 12, 16};
    double worst = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const int d = dims[rng.next_u64() % 4];
      std::vector<int> hs;
      for (int h : {1, 2, 4})
        if (d % h == 0) hs.push_back(h);
      const int heads = hs[rng.next_u64() % hs.size()];
      const index_t hh = 4 + index_t(rng.next_u64() % 11), ww = 4 + index_t(rng.next_u64() % 11);
      const bool raw = trial % 5 == 4;
      CsaParamsT<double> p = random_csa<double>(d, heads, rng, raw);
      TensorT<double> x = raw ? rng.uniform_tensor<double>({d, hh, ww}, 0.1, 1.0)
                              : rng.trunc_normal_tensor<double>({d, hh, ww}, 1.0);
      if (trial % 7 == 6 && !raw) {
        ConvSpec spec;
        spec.kernel = 3;
        spec.stride = 2;
        spec.padding = 1;
        const index_t l = spec.out_extent(hh) * spec.out_extent(ww);
        TensorT<double> ov = rng.uniform_tensor<double>({l, heads, 9, 9}, 0.0, 1.0);
        worst = std::max(worst, agreement_err(csa_forward(x, p, &ov), oracle_csa(x, p, &ov)));
      } else {
        worst = std::max(worst, agreement_err(csa_forward(x, p), oracle_csa(x, p)));
      }
    }
    note = "50 random shapes incl. raw-division and override variants";
    return worst;
  });

  r.check("csa.gradcheck", 1e-4, [](Rng& rng, std::string& note) {
    const double eps = 1e-5;
    double worst = 0;
    const struct {
      int d, heads, h, w;
      bool raw, override_alpha;
    } cases[] = {{4, 2, 5, 6, false, false}, {6, 3, 4, 4, true, false}, {4, 1, 6, 5, false, true}};
    for (const auto& cs : cases) {
      CsaParamsT<double> p = random_csa<double>(cs.d, cs.heads, rng, cs.raw);
      TensorT<double> x = cs.raw ? rng.uniform_tensor<double>({cs.d, cs.h, cs.w}, 0.1, 1.0)
                                 : rng.trunc_normal_tensor<double>({cs.d, cs.h, cs.w}, 1.0);
      TensorT<double> proj = rng.trunc_normal_tensor<double>({cs.d, cs.h, cs.w}, 1.0);
      TensorT<double> ov;
      const TensorT<double>* ovp = nullptr;
      if (cs.override_alpha) {
        ConvSpec spec;
        spec.kernel = 3;
        spec.stride = 2;
        spec.padding = 1;
        const index_t l = spec.out_extent(cs.h) * spec.out_extent(cs.w);
        ov = rng.uniform_tensor<double>({l, cs.heads, 9, 9}, 0.0, 1.0);
        ovp = &ov;
      }
      CsaGrads<double> g = csa_backward(x, p, proj, ovp);
      auto loss_with = [&](const std::function<void(CsaParamsT<double>&,
                                                    const TensorT<double>&)>& set) {
        return [&, set](const TensorT<double>& probe) {
          CsaParamsT<double> q = p;
          set(q, probe);
          return dot(csa_forward(x, q, ovp), proj);
        };
      };
      worst = std::max(worst, max_rel_err(g.dx, finite_diff_grad(
          [&](const TensorT<double>& probe) { return dot(csa_forward(probe, p, ovp), proj); },
          x, eps), kGradFloor));
      worst = std::max(worst, max_rel_err(g.dw_filter, finite_diff_grad(
          loss_with([](auto& q, const auto& t) { q.w_filter = t; }), p.w_filter, eps), kGradFloor));
      worst = std::max(worst, max_rel_err(g.dw_qk, finite_diff_grad(
          loss_with([](auto& q, const auto& t) { q.w_qk = t; }), p.w_qk, eps), kGradFloor));
      worst = std::max(worst, max_rel_err(g.dw_out, finite_diff_grad(
          loss_with([](auto& q, const auto& t) { q.w_out = t; }), p.w_out, eps), kGradFloor));
    }
    note = "input + all parameters, softmax/raw-division/override cases";
    return worst;
  });
}

// --------------------------------------------------------------------------
// rasa scope.

void rasa_checks(Runner& r) {
  r.check("rasa.attention_rows", 1e-9, [](Rng& rng, std::string& note) {
    AttentionConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    TensorT<double> q = rng.trunc_normal_tensor<double>({10, 8}, 2.0);
    TensorT<double> k = rng.trunc_normal_tensor<double>({7, 8}, 2.0);
    double worst = 0;
    for (int h = 0; h < 2; ++h) {
      TensorT<double> w = attention_weights(q, k, cfg, h);
      for (index_t i = 0; i < 10; ++i) {
        double sum = 0;
        for (index_t j = 0; j < 7; ++j) {
          sum += w(i, j);
          if (w(i, j) < 0) worst = 1;
        }
        worst = std::max(worst, std::abs(sum - 1.0));
      }
    }
    note = "per-head weight rows are simplex points";
    return worst;
  });

  r.check("rasa.kv_permutation", 1e-6, [](Rng& rng, std::string& note) {
    AttentionConfig cfg;
    cfg.dim = 8;
    cfg.heads = 2;
    const index_t m = 11;
    TensorT<double> q = rng.trunc_normal_tensor<double>({9, 8}, 1.0);
    TensorT<double> k = rng.trunc_normal_tensor<double>({m, 8}, 1.0);
    TensorT<double> v = rng.trunc_normal_tensor<double>({m, 8}, 1.0);
    std::vector<index_t> perm(m);
    for (index_t i = 0; i < m; ++i) perm[i] = i;
    for (index_t i = m - 1; i > 0; --i)
      std::swap(perm[i], perm[index_t(rng.next_u64() % std::uint64_t(i + 1))]);
    TensorT<double> kp({m, 8}), vp({m, 8});
    for (index_t i = 0; i < m; ++i)
      for (index_t c = 0; c < 8; ++c) {
        kp(i, c) = k(perm[i], c);
        vp(i, c) = v(perm[i], c);
      }
    note = "jointly permuting keys/values leaves attention unchanged";
    return agreement_err(scaled_dot_attention(q, kp, vp, cfg),
                         scaled_dot_attention(q, k, v, cfg));
  });

  r.check("rasa.key_bias_invariance", 1e-12, [](Rng& rng, std::string& note) {
    // Shifting every key by a constant vector adds a per-row constant to the
    // logits, which softmax cancels: the key bias cannot change the output
    // (and its true gradient is exactly zero — see kGradFloor).
    AsaParamsT<double> p = random_asa<double>(8, 2, 2, rng);
    TensorT<double> x = rng.trunc_normal_tensor<double>({8, 7, 9}, 1.0);
    AsaParamsT<double> shifted = p;
    for (index_t c = 0; c < 8; ++c) shifted.b_k[c] += 3.0 - 0.5 * double(c);
    note = "output invariant under arbitrary key-bias shifts";
    return agreement_err(asa_forward(x, shifted), asa_forward(x, p));
  });

  r.check("rasa.sr_identity", 0, [](Rng& rng, std::string& note) {
    SrParamsT<double> p;
    p.dim = 8;
    p.ratio = 1;
    TensorT<double> x = rng.trunc_normal_tensor<double>({8, 9, 7}, 1.0);
    note = "ratio 1 bypasses projection and norm";
    return double(max_abs_diff(spatial_reduction(x, p), to_tokens(x)));
  });

  r.check("rasa.sr_shapes", 0, [](Rng& rng, std::string& note) {
    Tally t;
    {
      AsaParamsT<double> p = random_asa<double>(8, 2, 4, rng);
      TensorT<double> x = rng.trunc_normal_tensor<double>({8, 12, 10}, 1.0);
      TensorT<double> tok = spatial_reduction(x, p.sr);
      t.require(tok.extent(0) == 3 * 3 && tok.extent(1) == 8, "12x10 R=4 -> 9 tokens");
    }
    {
      AsaParamsT<double> p = random_asa<double>(4, 1, 4, rng);
      TensorT<double> x = rng.trunc_normal_tensor<double>({4, 28, 28}, 1.0);
      t.require(spatial_reduction(x, p.sr).extent(0) == 49, "28x28 R=4 -> 49 tokens");
    }
    {
      AsaParamsT<double> p = random_asa<double>(8, 2, 2, rng);
      TensorT<double> x = rng.trunc_normal_tensor<double>({8, 7, 9}, 1.0);
      t.require(spatial_reduction(x, p.sr).extent(0) == 4 * 5,
                "7x9 R=2 pads to 8x10 -> 20 tokens");
    }
    note = t.note.empty() ? "reduced grids use ceil(extent/R)" : t.note;
    return t.fails;
  });

  r.check("rasa.kernel_sharing", 1e-9, [](Rng& rng, std::string& note) {
    const int d = 6;
    AsaParamsT<double> p = random_asa<double>(d, 2, 1, rng);
    TensorT<double> x = rng.trunc_normal_tensor<double>({d, 10, 10}, 1.0);
    auto branch = [&](const AsaParamsT<double>& q, int rate) {
      TensorT<double> qhat = to_map(linear(to_tokens(x), q.w_q1, &q.b_q1), d, 10, 10);
      ConvSpec spec;
      spec.kernel = 3;
      spec.dilation = rate;
      spec.padding = ConvSpec::same_padding(3, rate);
      spec.groups = d;
      return silu(conv2d(qhat, q.w_qd, &q.b_qd, spec));
    };
    // The query is the sum of the three branches, all reading one kernel.
    TensorT<double> manual = add(add(branch(p, 1), branch(p, 3)), branch(p, 5));
    double worst = agreement_err(asa_query(x, p), manual);
    AsaParamsT<double> bumped = p;
    bumped.w_qd(2, 0, 0, 1) += 0.05;
    Tally t;
    for (int rate : {1, 3, 5}) {
      t.require(max_abs_diff(branch(bumped, rate), branch(p, rate)) > 0,
                "kernel bump alters dilation-" + std::to_string(rate) + " branch");
    }
    AsaParamsT<double> refit = p;
    refit.dilation_rates = {2, 4};  // different branch count, same tensors
    t.require(refit.param_count() == p.param_count(),
              "parameter tally invariant under rate reconfiguration");
    t.append("shared 3x3 kernel feeds every dilation branch");
    note = t.note;
    return std::max(worst, t.fails);
  });

  r.check("rasa.query_interior", 1e-9, [](Rng& rng, std::string& note) {
    // On a constant image every branch is constant in the interior, so the
    // query must equal 3 * silu(branch value) there.
    const int d = 6;
    AsaParamsT<double> p = random_asa<double>(d, 2, 1, rng);
    TensorT<double> x({d, 16, 16});
    for (index_t c = 0; c < d; ++c)
      for (index_t i = 0; i < 16; ++i)
        for (index_t j = 0; j < 16; ++j) x(c, i, j) = 0.1 * double(c + 1);
    TensorT<double> q = asa_query(x, p);
    double worst = 0;
    for (index_t c = 0; c < d; ++c) {
      double u = p.b_q1[c];
      for (index_t e = 0; e < d; ++e) u += p.w_q1(c, e) * 0.1 * double(e + 1);
      double ks = 0;
      for (index_t a = 0; a < 3; ++a)
        for (index_t b = 0; b < 3; ++b) ks += p.w_qd(c, 0, a, b);
      const double g = p.b_qd[c] + ks * u;
      const double expect = 3.0 * g / (1.0 + std::exp(-g));
      for (index_t i = 5; i <= 10; ++i)
        for (index_t j = 5; j <= 10; ++j) worst = std::max(worst, rel_err(q(c, i, j), expect));
    }
    note = "interior query == 3*silu(const branch) on constant input";
    return worst;
  });

  r.check("rasa.depth1_bitwise", 0, [](Rng& rng, std::string& note) {
    AsaParamsT<double> p = random_asa<double>(8, 2, 2, rng);
    TensorT<double> x = rng.trunc_normal_tensor<double>({8, 7, 9}, 1.0);
    note = "depth 1 recursion is one plain application";
    return double(max_abs_diff(rasa_forward(x, p, RasaConfig{1}), asa_forward(x, p)));
  });

  r.check("rasa.depth2_explicit", 0, [](Rng& rng, std::string& note) {
    AsaParamsT<double> p = random_asa<double>(8, 2, 2, rng);
    TensorT<double> x = rng.trunc_normal_tensor<double>({8, 7, 9}, 1.0);
    TensorT<double> x1 = asa_forward(x, p);
    note = "X2 == ASA(X1 + X0) with combine weights one";
    return double(max_abs_diff(rasa_forward(x, p, RasaConfig{2}), asa_forward(add(x1, x), p)));
  });

  r.check("rasa.depth_params", 0, [](Rng&, std::string& note) {
    Tally t;
    index_t base = -1;
    for (int depth = 1; depth <= 4; ++depth) {
      ModelConfig cfg;
      cfg.stages = {StageSpec{SaType::kRasa, 1, 16, 2, 2, 2, depth}};
      cfg.input_channels = 3;
      cfg.num_classes = 0;
      Model m = build_model(cfg, 7);
      const index_t total = m.count_params().total();
      if (base < 0) base = total;
      t.require(total == base, "depth " + std::to_string(depth) + " changes the tally");
    }
    t.append("recursion depth 1..4, identical parameter count " + std::to_string(base));
    note = t.note;
    return t.fails;
  });

  r.check("rasa.finite_output", 0, [](Rng& rng, std::string& note) {
    AsaParamsT<double> p = random_asa<double>(8, 2, 2, rng);
    TensorT<double> x = rng.trunc_normal_tensor<double>({8, 9, 9}, 1000.0);
    TensorT<double> y = rasa_forward(x, p, RasaConfig{2});
    note = "1e3-scale inputs through depth-2 recursion, max |y| = " + fmt(double(max_abs(y)));
    return 0.0;
  });

  r.check("rasa.shape_preservation", 0, [](Rng& rng, std::string& note) {
    Tally t;
    const struct {
      int d, heads, ratio;
    } rows[] = {{64, 2, 4}, {160, 5, 2}, {256, 8, 1}};
    for (const auto& row : rows) {
      AsaParamsT<double> p = random_asa<double>(row.d, row.heads, row.ratio, rng);
      TensorT<double> x = rng.trunc_normal_tensor<double>({row.d, 7, 9}, 1.0);
      t.require(rasa_forward(x, p, RasaConfig{2}).same_shape(x),
                "d=" + std::to_string(row.d) + " preserves extents");
    }
    t.append("stage-table widths 64/160/256");
    note = t.note;
    return t.fails;
  });

  r.check("rasa.oracle_agreement", 1e-5, [](Rng& rng, std::string& note) {
    const int dims[] = {4, 6, 8, 12, 16};
    double worst = 0;
    for (int trial = 0; trial < 50; ++trial) {
      const int d = dims[rng.next_u64() % 5];
      std::vector<int> hs;
      for (int h : {1, 2, 4})
        if (d % h == 0) hs.push_back(h);
      const int heads = hs[rng.next_u64() % hs.size()];
      const int ratio = 1 + int(rng.next_u64() % 3);
      const index_t hh = 4 + index_t(rng.next_u64() % 9), ww = 4 + index_t(rng.next_u64() % 9);
      AsaParamsT<double> p = random_asa<double>(d, heads, ratio, rng);
      TensorT<double> x = rng.trunc_normal_tensor<double>({d, hh, ww}, 1.0);
      worst = std::max(worst, agreement_err(asa_forward(x, p), oracle_asa(x, p)));
    }
    note = "50 random shapes over ratios 1..3";
    return worst;
  });

  r.check("rasa.gradcheck", 1e-4, [](Rng& rng, std::string& note) {
    const double eps = 1e-5;
    double worst = 0;
    const struct {
      int d, heads, ratio, h, w, depth;
    } cases[] = {{4, 2, 2, 5, 6, 1}, {4, 1, 1, 4, 5, 2}, {6, 3, 3, 6, 4, 1}};
    for (const auto& cs : cases) {
      AsaParamsT<double> p = random_asa<double>(cs.d, cs.heads, cs.ratio, rng);
      RasaConfig rc{cs.depth};
      TensorT<double> x = rng.trunc_normal_tensor<double>({cs.d, cs.h, cs.w}, 1.0);
      TensorT<double> proj = rng.trunc_normal_tensor<double>({cs.d, cs.h, cs.w}, 1.0);
      AsaGrads<double> g = rasa_backward(x, p, rc, proj);
      auto loss_with = [&](const std::function<void(AsaParamsT<double>&,
                                                    const TensorT<double>&)>& set) {
        return [&, set](const TensorT<double>& probe) {
          AsaParamsT<double> q = p;
          set(q, probe);
          return dot(rasa_forward(x, q, rc), proj);
        };
      };
      auto check = [&](const TensorT<double>& analytic, const TensorT<double>& at,
                       const std::function<void(AsaParamsT<double>&, const TensorT<double>&)>&
                           set) {
        if (at.numel() == 0) return;
        worst = std::max(worst,
                         max_rel_err(analytic, finite_diff_grad(loss_with(set), at, eps),
                                     kGradFloor));
      };
      worst = std::max(worst, max_rel_err(g.dx, finite_diff_grad(
          [&](const TensorT<double>& probe) { return dot(rasa_forward(probe, p, rc), proj); },
          x, eps), kGradFloor));
      check(g.dw_q1, p.w_q1, [](auto& q, const auto& t) { q.w_q1 = t; });
      check(g.db_q1, p.b_q1, [](auto& q, const auto& t) { q.b_q1 = t; });
      check(g.dw_qd, p.w_qd, [](auto& q, const auto& t) { q.w_qd = t; });
      check(g.db_qd, p.b_qd, [](auto& q, const auto& t) { q.b_qd = t; });
      check(g.dw_k, p.w_k, [](auto& q, const auto& t) { q.w_k = t; });
      check(g.db_k, p.b_k, [](auto& q, const auto& t) { q.b_k = t; });
      check(g.dw_v, p.w_v, [](auto& q, const auto& t) { q.w_v = t; });
      check(g.db_v, p.b_v, [](auto& q, const auto& t) { q.b_v = t; });
      check(g.dw_out, p.w_out, [](auto& q, const auto& t) { q.w_out = t; });
      check(g.db_out, p.b_out, [](auto& q, const auto& t) { q.b_out = t; });
      if (cs.ratio > 1) {
        check(g.sr.dproj_w, p.sr.proj_w, [](auto& q, const auto& t) { q.sr.proj_w = t; });
        check(g.sr.dproj_b, p.sr.proj_b, [](auto& q, const auto& t) { q.sr.proj_b = t; });
        check(g.sr.dgamma, p.sr.gamma, [](auto& q, const auto& t) { q.sr.gamma = t; });
        check(g.sr.dbeta, p.sr.beta, [](auto& q, const auto& t) { q.sr.beta = t; });
      }
    }
    note = "input + all parameters incl. shared kernel, depths 1 and 2";
    return worst;
  });
}

// --------------------------------------------------------------------------
// backbone scope: the assembled float model.

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.stages = {StageSpec{SaType::kCsa, 1, 8, 2, 2, 1, 2},
                StageSpec{SaType::kRasa, 1, 12, 2, 2, 2, 2}};
  cfg.input_channels = 3;
  cfg.num_classes = 10;
  cfg.image_size = 32;
  return cfg;
}

void backbone_checks(Runner& r, unsigned long long seed) {
  // One full-size model shared by the checks below; per-check rngs stay
  // independent of it.
  Model model = build_model(ModelConfig::lvt_default(), seed ^ hash64("backbone.model"));

  r.check("backbone.stride_chain", 0, [&](Rng& rng, std::string& note) {
    Tally t;
    Tensor x = rng.uniform_tensor<float>({3, 224, 224}, 0.0, 1.0);
    std::vector<Tensor> maps = model.forward_features(x);
    const index_t want[4][3] = {{64, 56, 56}, {64, 28, 28}, {160, 14, 14}, {256, 7, 7}};
    t.require(maps.size() == 4, "four stage maps");
    for (std::size_t s = 0; s < maps.size(); ++s) {
      t.require(maps[s].rank() == 3 && maps[s].extent(0) == want[s][0] &&
                    maps[s].extent(1) == want[s][1] && maps[s].extent(2) == want[s][2],
                "stage " + std::to_string(s + 1) + " is " + maps[s].shape_str());
    }
    Tensor logits = model.forward_classify(x);
    t.require(logits.rank() == 1 && logits.extent(0) == 1000, "classifier emits 1000 logits");
    t.append("224x224 -> 56/28/14/7 at widths 64/64/160/256");
    note = t.note;
    return t.fails;
  });

  r.check("backbone.param_budget", 0, [&](Rng&, std::string& note) {
    Tally t;
    CountReport cr = model.count_params();
    t.require(cr.encoder_total() >= 3060000 && cr.encoder_total() <= 3740000,
              "encoder " + std::to_string(cr.encoder_total()) + " outside [3.06M, 3.74M]");
    t.require(cr.head_params == 257000, "head tally " + std::to_string(cr.head_params));
    WeightStore store = model.to_store();
    t.require(store.total_params() == cr.total(), "store tally mismatch");
    t.require(index_t(cr.rows.size()) == index_t(store.size()), "row/tensor count mismatch");
    t.append("encoder " + std::to_string(cr.encoder_total()) + " in [3.06M, 3.74M], head " +
             std::to_string(cr.head_params) + ", " + std::to_string(store.size()) + " tensors");
    note = t.note;
    return t.fails;
  });

  r.check("backbone.flops_budget", 0.25, [&](Rng&, std::string& note) {
    FlopsReport fr = model.estimate_flops(224, 224);
    const double giga = double(fr.encoder_macs) / 1e9;
    const double ratio = giga / 0.9;
    note = "encoder " + fmt(giga) + " GMACs vs 0.9 G nominal (ratio " + fmt(ratio) + ")";
    return std::abs(ratio - 1.0);
  });

  r.check("backbone.flops_instrumented", 0, [&](Rng& rng, std::string& note) {
    Model toy = build_model(toy_config(), 11);
    Tensor x = rng.uniform_tensor<float>({3, 32, 32}, 0.0, 1.0);
    const std::uint64_t estimate = toy.estimate_flops(32, 32).total();
    mac_count_reset();
    (void)toy.forward_classify(x);
    const std::uint64_t counted = mac_count_read();
    note = "estimate " + std::to_string(estimate) + " MACs, counter " + std::to_string(counted);
    return std::abs(double(counted) - double(estimate));
  });

  r.check("backbone.determinism", 1e-6, [&](Rng& rng, std::string& note) {
    Tensor x = rng.uniform_tensor<float>({3, 64, 64}, 0.0, 1.0);
    auto run = [&] { return model.forward_features(x); };
    std::vector<Tensor> a = run(), b = run();
    double worst = 0;
    for (std::size_t s = 0; s < a.size(); ++s)
      worst = std::max(worst, double(max_abs_diff(a[s], b[s])));
    const int before = num_threads();
    set_num_threads(4);
    std::vector<Tensor> mt = run();
    set_num_threads(before);
    for (std::size_t s = 0; s < a.size(); ++s)
      worst = std::max(worst, double(max_abs_diff(a[s], mt[s])));
    note = "repeat and 1-vs-4-thread runs, max |diff| = " + fmt(worst);
    return worst;
  });

  r.check("backbone.batch_consistency", 0, [&](Rng& rng, std::string& note) {
    Tensor xb = rng.uniform_tensor<float>({2, 3, 48, 48}, 0.0, 1.0);
    Tensor x0({3, 48, 48}), x1({3, 48, 48});
    for (index_t i = 0; i < x0.numel(); ++i) {
      x0[i] = xb[i];
      x1[i] = xb[x0.numel() + i];
    }
    std::vector<Tensor> batched = model.forward_features(xb);
    std::vector<Tensor> s0 = model.forward_features(x0);
    std::vector<Tensor> s1 = model.forward_features(x1);
    double worst = 0;
    for (std::size_t s = 0; s < batched.size(); ++s) {
      const index_t n = s0[s].numel();
      for (index_t i = 0; i < n; ++i) {
        worst = std::max(worst, std::abs(double(batched[s][i]) - double(s0[s][i])));
        worst = std::max(worst, std::abs(double(batched[s][n + i]) - double(s1[s][i])));
      }
    }
    Tensor lb = model.forward_classify(xb);
    Tensor l0 = model.forward_classify(x0);
    for (index_t i = 0; i < 1000; ++i)
      worst = std::max(worst, std::abs(double(lb[i]) - double(l0[i])));
    note = "batch of 2 equals stacked single passes bitwise";
    return worst;
  });

  r.check("backbone.weight_roundtrip", 0, [&](Rng& rng, std::string& note) {
    Tally t;
    const std::string path = "/tmp/lvt_check_" + std::to_string(rng.next_u64() % 100000) + ".lvtw";
    Model toy = build_model(toy_config(), 21);
    Tensor x = rng.uniform_tensor<float>({3, 32, 32}, 0.0, 1.0);
    Tensor before = toy.forward_classify(x);
    toy.save_weights(path);
    Model copy = build_model(toy_config(), 22);
    copy.load_weights(path);
    t.require(max_abs_diff(copy.forward_classify(x), before) == 0,
              "reloaded weights reproduce logits bitwise");

    const std::string bytes = read_bytes(path);
    auto expect_throws = [&](const std::string& mutated, const char* kind, auto catcher) {
      const std::string tmp = path + "." + kind;
      write_bytes(tmp, mutated);
      bool threw = false;
      try {
        (void)WeightStore::load(tmp);
      } catch (const std::decay_t<decltype(catcher)>&) {
        threw = true;
      }
      std::remove(tmp.c_str());
      t.require(threw, std::string("corruption raises ") + kind);
    };
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    expect_throws(bad_magic, "FormatError(magic)", FormatError(""));
    std::string bad_payload = bytes;
    bad_payload[bytes.size() - 5] ^= char(0x40);  // last data byte, before its CRC
    expect_throws(bad_payload, "ChecksumError", ChecksumError(""));
    expect_throws(bytes.substr(0, bytes.size() - 1), "FormatError(truncated)", FormatError(""));
    std::remove(path.c_str());
    t.append("save/load bitwise; magic, payload and truncation corruption detected");
    note = t.note;
    return t.fails;
  });

  r.check("backbone.store_names", 0, [&](Rng& rng, std::string& note) {
    Tally t;
    Model toy = build_model(toy_config(), 31);
    WeightStore store = toy.to_store();
    CountReport cr = toy.count_params();
    t.require(store.size() == cr.rows.size(), "one stored tensor per counted parameter");
    for (const auto& row : cr.rows)
      t.require(store.contains(row.path), "missing tensor " + row.path);
    Tensor x = rng.uniform_tensor<float>({3, 32, 32}, 0.0, 1.0);
    Tensor before = toy.forward_classify(x);
    Model rebound = build_model(toy_config(), 32);
    rebound.bind_from_store(store);
    t.require(max_abs_diff(rebound.forward_classify(x), before) == 0,
              "export/import round trip reproduces logits bitwise");
    WeightStore extra = toy.to_store();
    extra.put("stage9.bogus", Tensor({2, 2}));
    bool threw = false;
    try {
      Model victim = build_model(toy_config(), 33);
      victim.bind_from_store(extra);
    } catch (const FormatError&) {
      threw = true;
    }
    t.require(threw, "orphan tensor raises FormatError");
    t.append(std::to_string(store.size()) + " uniquely named tensors; orphan rejected");
    note = t.note;
    return t.fails;
  });

  r.check("backbone.padded_input", 0, [&](Rng& rng, std::string& note) {
    Tally t;
    Tensor x = rng.uniform_tensor<float>({3, 50, 70}, 0.0, 1.0);
    std::vector<Tensor> maps = model.forward_features(x);
    const index_t want[4][3] = {{64, 13, 18}, {64, 7, 9}, {160, 4, 5}, {256, 2, 3}};
    for (std::size_t s = 0; s < maps.size(); ++s) {
      t.require(maps[s].extent(0) == want[s][0] && maps[s].extent(1) == want[s][1] &&
                    maps[s].extent(2) == want[s][2],
                "50x70 stage " + std::to_string(s + 1) + " is " + maps[s].shape_str());
    }
    Tensor floor = rng.uniform_tensor<float>({3, 32, 32}, 0.0, 1.0);
    t.require(model.forward_features(floor)[3].extent(1) == 1, "32x32 reaches a 1x1 top map");
    bool threw = false;
    try {
      (void)model.forward_features(rng.uniform_tensor<float>({3, 31, 31}, 0.0, 1.0));
    } catch (const ShapeError&) {
      threw = true;
    }
    t.require(threw, "31x31 raises ShapeError");
    t.append("odd extents pad to 32 internally, maps crop to ceil(extent/stride)");
    note = t.note;
    return t.fails;
  });
}

}  // namespace

CheckReport run_invariant_suite(const std::string& scope, unsigned long long seed, bool f64) {
  if (scope != "all" && scope != "tensor" && scope != "csa" && scope != "rasa" &&
      scope != "backbone") {
    throw ConfigError("unknown check scope '" + scope +
                      "' (expected all, tensor, csa, rasa or backbone)");
  }
  CheckReport report;
  Runner r(report, seed);
  if (scope == "all" || scope == "tensor") {
    if (f64) {
      tensor_checks<double>(r);
    } else {
      tensor_checks<float>(r);
    }
    tensor_checks_f64_only(r);
  }
  if (scope == "all" || scope == "csa") csa_checks(r);
  if (scope == "all" || scope == "rasa") rasa_checks(r);
  if (scope == "all" || scope == "backbone") backbone_checks(r, seed);
  return report;
}

}  // namespace lvt
