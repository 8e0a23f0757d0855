#include "hessmatch/cg_model.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "hessmatch/text_io.hpp"

namespace hm {
namespace {

// ---------------------------------------------------------------------------
// Scalar 2-jet in the pair distance d: value, d/dd, d^2/dd^2.
struct SJet {
  double v = 0.0, d1 = 0.0, d2 = 0.0;
};

SJet jmul(const SJet& a, const SJet& b) {
  return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + 2.0 * a.d1 * b.d1 + a.v * b.d2};
}

struct Silu3 {
  double f, f1, f2, f3;
};

Silu3 silu_derivs(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  const double s1 = s * (1.0 - s);
  const double s2 = s1 * (1.0 - 2.0 * s);
  const double s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1;
  return {x * s, s + x * s1, 2.0 * s1 + x * s2, 3.0 * s2 + x * s3};
}

// ---------------------------------------------------------------------------
// MLP parameter layout

std::vector<int> layer_dims(const MlpPotential& m) {
  std::vector<int> dims;
  dims.push_back(m.features.rbf_count);
  for (int w : m.hidden) dims.push_back(w);
  dims.push_back(1);
  return dims;
}

std::size_t mlp_param_count(const MlpPotential& m) {
  const std::vector<int> dims = layer_dims(m);
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l)
    n += static_cast<std::size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
  return n;
}

// ---------------------------------------------------------------------------
// Feature jets

void feature_jets(const FeatureConfig& fc, double d, std::vector<SJet>& x) {
  const int nf = fc.rbf_count;
  x.assign(nf, SJet{});
  const double span = fc.cutoff_high - fc.cutoff_low;
  const double mu_min = std::exp(-span);
  const double beta_rbf = std::pow(2.0 * (1.0 - mu_min) / nf, -2.0);

  // s(d) = exp(-(d - cutoff_low)); s' = -s; s'' = s
  const double s = std::exp(-(d - fc.cutoff_low));
  for (int j = 0; j < nf; ++j) {
    const double mu = nf == 1 ? mu_min : mu_min + (1.0 - mu_min) * j / (nf - 1.0);
    const double t = s - mu;
    const double e = std::exp(-beta_rbf * t * t);
    // g = -beta (s - mu)^2; dg/dd = 2 beta t s; d2g/dd2 = -2 beta (s^2 + t s)... via chain:
    const double g1 = -2.0 * beta_rbf * t * (-s);
    const double g2 = -2.0 * beta_rbf * (s * s + t * s);
    x[j].v = e;
    x[j].d1 = e * g1;
    x[j].d2 = e * (g1 * g1 + g2);
  }
}

SJet switch_jet(const FeatureConfig& fc, double d) {
  if (d <= fc.cutoff_low) return {1.0, 0.0, 0.0};
  const double span = fc.cutoff_high - fc.cutoff_low;
  const double w = std::numbers::pi * (d - fc.cutoff_low) / span;
  const double a = std::numbers::pi / span;
  return {0.5 * (1.0 + std::cos(w)), -0.5 * a * std::sin(w), -0.5 * a * a * std::cos(w)};
}

// ---------------------------------------------------------------------------
// Pair network forward/backward.
//
// Forward propagates 2-jets in d through the MLP and the cutoff switch,
// returning phi = (value, dphi/dd, d2phi/dd2). The stored activations let
// the backward pass turn cotangents on (phi, phi', phi'') into parameter
// gradients exactly: the adjoint of a jet node is itself a 3-vector.
struct PairTape {
  std::vector<std::vector<SJet>> h;  // inputs to each layer (h[0] = features)
  std::vector<std::vector<SJet>> z;  // pre-activations per layer
  SJet out;                          // network output (before the switch)
  SJet fcut;
  SJet phi;
};

void pair_forward(const MlpPotential& m, double d, PairTape& tape) {
  const std::vector<int> dims = layer_dims(m);
  const std::size_t n_layers = dims.size() - 1;
  tape.h.assign(n_layers, {});
  tape.z.assign(n_layers, {});

  std::vector<SJet> cur;
  feature_jets(m.features, d, cur);

  std::size_t off = 0;
  for (std::size_t l = 0; l < n_layers; ++l) {
    tape.h[l] = cur;
    const int in = dims[l], out = dims[l + 1];
    std::vector<SJet> z(out);
    for (int i = 0; i < out; ++i) {
      SJet acc{m.params[off + static_cast<std::size_t>(out) * in + i], 0.0, 0.0};  // bias
      for (int j = 0; j < in; ++j) {
        const double w = m.params[off + static_cast<std::size_t>(i) * in + j];
        acc.v += w * cur[j].v;
        acc.d1 += w * cur[j].d1;
        acc.d2 += w * cur[j].d2;
      }
      z[i] = acc;
    }
    tape.z[l] = z;
    off += static_cast<std::size_t>(out) * in + out;
    if (l + 1 < n_layers) {
      cur.assign(out, SJet{});
      for (int i = 0; i < out; ++i) {
        const Silu3 f = silu_derivs(z[i].v);
        cur[i].v = f.f;
        cur[i].d1 = f.f1 * z[i].d1;
        cur[i].d2 = f.f2 * z[i].d1 * z[i].d1 + f.f1 * z[i].d2;
      }
    } else {
      cur = z;  // linear output
    }
  }
  tape.out = cur[0];
  tape.fcut = switch_jet(m.features, d);
  tape.phi = jmul(tape.fcut, tape.out);
}

struct JetAdj {
  double a0 = 0.0, a1 = 0.0, a2 = 0.0;
};

// Accumulates d(loss)/d(params) for one pair given cotangents on
// (phi, phi', phi'').
void pair_backward(const MlpPotential& m, const PairTape& tape, double w0, double w1, double w2,
                   Vec& grad) {
  const std::vector<int> dims = layer_dims(m);
  const std::size_t n_layers = dims.size() - 1;

  // phi = fcut * out, fcut parameter-free
  JetAdj obar;
  const SJet& a = tape.fcut;
  obar.a0 = w0 * a.v + w1 * a.d1 + w2 * a.d2;
  obar.a1 = w1 * a.v + 2.0 * w2 * a.d1;
  obar.a2 = w2 * a.v;

  std::vector<JetAdj> zbar(1, obar);

  // offsets of each layer's parameter block
  std::vector<std::size_t> offs(n_layers);
  {
    std::size_t off = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
      offs[l] = off;
      off += static_cast<std::size_t>(dims[l + 1]) * dims[l] + dims[l + 1];
    }
  }

  for (std::size_t l = n_layers; l-- > 0;) {
    const int in = dims[l], out = dims[l + 1];
    const std::vector<SJet>& h = tape.h[l];
    const std::size_t off = offs[l];

    std::vector<JetAdj> hbar(in);
    for (int i = 0; i < out; ++i) {
      const JetAdj& zb = zbar[i];
      grad[off + static_cast<std::size_t>(out) * in + i] += zb.a0;  // bias
      for (int j = 0; j < in; ++j) {
        const std::size_t wi = off + static_cast<std::size_t>(i) * in + j;
        grad[wi] += zb.a0 * h[j].v + zb.a1 * h[j].d1 + zb.a2 * h[j].d2;
        const double w = m.params[wi];
        hbar[j].a0 += w * zb.a0;
        hbar[j].a1 += w * zb.a1;
        hbar[j].a2 += w * zb.a2;
      }
    }
    if (l == 0) break;

    // h of this layer came from silu(z) of layer l-1
    const std::vector<SJet>& zprev = tape.z[l - 1];
    std::vector<JetAdj> zprev_bar(in);
    for (int j = 0; j < in; ++j) {
      const Silu3 f = silu_derivs(zprev[j].v);
      const double z1 = zprev[j].d1, z2 = zprev[j].d2;
      const JetAdj& hb = hbar[j];
      zprev_bar[j].a0 = hb.a0 * f.f1 + hb.a1 * f.f2 * z1 + hb.a2 * (f.f3 * z1 * z1 + f.f2 * z2);
      zprev_bar[j].a1 = hb.a1 * f.f1 + 2.0 * hb.a2 * f.f2 * z1;
      zprev_bar[j].a2 = hb.a2 * f.f1;
    }
    zbar = std::move(zprev_bar);
  }
}

// ---------------------------------------------------------------------------
// Pair geometry

struct PairIter {
  int b = 0, c = 0;       // bead indices
  double d = 0.0;
  Vec unit;               // (R_b - R_c)/d
};

template <class Fn>
void for_each_pair(const MlpPotential& m, const Vec& r, Fn&& fn) {
  const int dim = m.dim;
  PairIter p;
  p.unit.resize(dim);
  for (int b = 0; b < m.n_beads; ++b)
    for (int c = b + 1; c < m.n_beads; ++c) {
      double d2 = 0.0;
      for (int a = 0; a < dim; ++a) {
        p.unit[a] = r[b * dim + a] - r[c * dim + a];
        d2 += p.unit[a] * p.unit[a];
      }
      const double d = std::sqrt(d2);
      if (d >= m.features.cutoff_high || d < 1e-12) continue;
      for (double& x : p.unit) x /= d;
      p.b = b;
      p.c = c;
      p.d = d;
      fn(p);
    }
}

}  // namespace

// ---------------------------------------------------------------------------

CGModelState make_quadratic_baseline(const Mat& a, const Vec& r_ref) {
  if (a.rows() != a.cols() || a.rows() != r_ref.size())
    throw DimensionMismatch("make_quadratic_baseline: shape mismatch");
  return CGModelState{QuadraticBaseline{a, r_ref}};
}

CGModelState make_mlp(int n_beads, int dim, const std::vector<int>& hidden,
                      const FeatureConfig& features, RngState& init_rng) {
  if (features.cutoff_low >= features.cutoff_high)
    throw ValidationError("make_mlp: cutoff_low must be below cutoff_high");
  if (features.rbf_count < 1) throw ValidationError("make_mlp: rbf_count must be >= 1");
  MlpPotential m;
  m.n_beads = n_beads;
  m.dim = dim;
  m.features = features;
  m.hidden = hidden;
  m.params.assign(mlp_param_count(m), 0.0);

  const std::vector<int> dims = layer_dims(m);
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int in = dims[l], out = dims[l + 1];
    const double scale = std::sqrt(2.0 / (in + out));
    const Vec z = standard_normals(init_rng, static_cast<std::size_t>(in) * out);
    for (std::size_t i = 0; i < z.size(); ++i) m.params[off + i] = scale * z[i];
    off += static_cast<std::size_t>(in) * out + out;  // biases stay zero
  }
  return CGModelState{std::move(m)};
}

double model_energy(const CGModelState& ms, const Vec& r) {
  if (const auto* q = std::get_if<QuadraticBaseline>(&ms.kind)) {
    Vec x(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) x[i] = r[i] - q->r_ref[i];
    return 0.5 * dot(x, matvec(q->a, x));
  }
  const auto& m = std::get<MlpPotential>(ms.kind);
  double e = 0.0;
  PairTape tape;
  for_each_pair(m, r, [&](const PairIter& p) {
    pair_forward(m, p.d, tape);
    e += tape.phi.v;
  });
  return e;
}

Vec model_forces(const CGModelState& ms, const Vec& r) {
  if (const auto* q = std::get_if<QuadraticBaseline>(&ms.kind)) {
    Vec x(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) x[i] = r[i] - q->r_ref[i];
    Vec f = matvec(q->a, x);
    for (double& v : f) v = -v;
    return f;
  }
  const auto& m = std::get<MlpPotential>(ms.kind);
  Vec f(r.size(), 0.0);
  PairTape tape;
  for_each_pair(m, r, [&](const PairIter& p) {
    pair_forward(m, p.d, tape);
    const double dphi = tape.phi.d1;
    for (int a = 0; a < m.dim; ++a) {
      f[p.b * m.dim + a] -= dphi * p.unit[a];
      f[p.c * m.dim + a] += dphi * p.unit[a];
    }
  });
  return f;
}

Vec model_hvp(const CGModelState& ms, const Vec& r, const Vec& v) {
  if (v.size() != r.size()) throw DimensionMismatch("model_hvp: direction length mismatch");
  if (const auto* q = std::get_if<QuadraticBaseline>(&ms.kind)) return matvec(q->a, v);

  const auto& m = std::get<MlpPotential>(ms.kind);
  Vec out(r.size(), 0.0);
  PairTape tape;
  for_each_pair(m, r, [&](const PairIter& p) {
    pair_forward(m, p.d, tape);
    const double p1 = tape.phi.d1, p2 = tape.phi.d2;
    // w = v_b - v_c; Hv block = p2 (u.w) u + p1 (w - (u.w) u)/d
    double alpha = 0.0;
    for (int a = 0; a < m.dim; ++a)
      alpha += p.unit[a] * (v[p.b * m.dim + a] - v[p.c * m.dim + a]);
    for (int a = 0; a < m.dim; ++a) {
      const double w = v[p.b * m.dim + a] - v[p.c * m.dim + a];
      const double contrib = p2 * alpha * p.unit[a] + p1 * (w - alpha * p.unit[a]) / p.d;
      out[p.b * m.dim + a] += contrib;
      out[p.c * m.dim + a] -= contrib;
    }
  });
  return out;
}

Vec model_param_grad(const CGModelState& ms, const Vec& r, const ModelCotangents& cot) {
  if (cot.probes.size() != cot.hvps.size())
    throw DimensionMismatch("model_param_grad: probes/hvp cotangents mismatch");

  if (const auto* q = std::get_if<QuadraticBaseline>(&ms.kind)) {
    const std::size_t d = q->r_ref.size();
    Vec x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = r[i] - q->r_ref[i];
    Vec grad(param_count(ms), 0.0);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j, ++idx) {
        double g = 0.0;
        // energy: dE/dA_ij
        if (cot.energy != 0.0)
          g += cot.energy * (i == j ? 0.5 * x[i] * x[i] : x[i] * x[j]);
        // forces: F = -A x
        if (!cot.forces.empty()) {
          if (i == j) g += cot.forces[i] * (-x[i]);
          else g += cot.forces[i] * (-x[j]) + cot.forces[j] * (-x[i]);
        }
        // hvp: H v = A v
        for (std::size_t k = 0; k < cot.probes.size(); ++k) {
          const Vec& v = cot.probes[k];
          const Vec& hb = cot.hvps[k];
          if (i == j) g += hb[i] * v[i];
          else g += hb[i] * v[j] + hb[j] * v[i];
        }
        grad[idx] = g;
      }
    return grad;
  }

  const auto& m = std::get<MlpPotential>(ms.kind);
  Vec grad(m.params.size(), 0.0);
  PairTape tape;
  for_each_pair(m, r, [&](const PairIter& p) {
    pair_forward(m, p.d, tape);
    double w0 = cot.energy, w1 = 0.0, w2 = 0.0;
    if (!cot.forces.empty()) {
      double fdot = 0.0;
      for (int a = 0; a < m.dim; ++a)
        fdot += (cot.forces[p.b * m.dim + a] - cot.forces[p.c * m.dim + a]) * p.unit[a];
      w1 -= fdot;  // F block is -phi' u at b, +phi' u at c
    }
    for (std::size_t k = 0; k < cot.probes.size(); ++k) {
      const Vec& v = cot.probes[k];
      const Vec& hb = cot.hvps[k];
      double alpha = 0.0, hdotu = 0.0;
      Vec w(m.dim), h(m.dim);
      for (int a = 0; a < m.dim; ++a) {
        w[a] = v[p.b * m.dim + a] - v[p.c * m.dim + a];
        h[a] = hb[p.b * m.dim + a] - hb[p.c * m.dim + a];
        alpha += p.unit[a] * w[a];
        hdotu += p.unit[a] * h[a];
      }
      w2 += hdotu * alpha;
      for (int a = 0; a < m.dim; ++a) w1 += h[a] * (w[a] - alpha * p.unit[a]) / p.d;
    }
    if (w0 != 0.0 || w1 != 0.0 || w2 != 0.0) pair_backward(m, tape, w0, w1, w2, grad);
  });
  return grad;
}

std::size_t param_count(const CGModelState& ms) {
  if (const auto* q = std::get_if<QuadraticBaseline>(&ms.kind)) {
    const std::size_t d = q->r_ref.size();
    return d * (d + 1) / 2;
  }
  return std::get<MlpPotential>(ms.kind).params.size();
}

Vec get_params(const CGModelState& ms) {
  if (const auto* q = std::get_if<QuadraticBaseline>(&ms.kind)) {
    const std::size_t d = q->r_ref.size();
    Vec p;
    p.reserve(d * (d + 1) / 2);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) p.push_back(q->a(i, j));
    return p;
  }
  return std::get<MlpPotential>(ms.kind).params;
}

void set_params(CGModelState& ms, const Vec& params) {
  if (params.size() != param_count(ms))
    throw DimensionMismatch("set_params: parameter count mismatch");
  if (auto* q = std::get_if<QuadraticBaseline>(&ms.kind)) {
    const std::size_t d = q->r_ref.size();
    std::size_t idx = 0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j, ++idx) q->a(i, j) = q->a(j, i) = params[idx];
    return;
  }
  std::get<MlpPotential>(ms.kind).params = params;
}

void write_checkpoint(const std::string& path, const CGModelState& ms) {
  std::ostringstream out;
  if (const auto* q = std::get_if<QuadraticBaseline>(&ms.kind)) {
    out << "CGMODEL v1 kind=quadratic\n";
    out << "shape d=" << q->r_ref.size() << " rref " << join_g17(q->r_ref) << "\n";
  } else {
    const auto& m = std::get<MlpPotential>(ms.kind);
    out << "CGMODEL v1 kind=mlp\n";
    out << "shape beads=" << m.n_beads << " dim=" << m.dim << " rbf=" << m.features.rbf_count
        << " clow=" << g17(m.features.cutoff_low) << " chigh=" << g17(m.features.cutoff_high)
        << " hidden";
    for (int w : m.hidden) out << " " << w;
    out << "\n";
  }
  for (double p : get_params(ms)) out << g17(p) << "\n";
  atomic_write(path, out.str());
}

CGModelState read_checkpoint(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty checkpoint");
  const std::vector<std::string> head = split_ws(line);
  if (head.size() != 3 || head[0] != "CGMODEL" || head[1] != "v1")
    throw ParseError(path + ": bad checkpoint header");
  const std::string kind = head[2].substr(5);

  if (!std::getline(in, line)) throw ParseError(path + ": missing shape line");
  const std::vector<std::string> shape = split_ws(line);

  CGModelState ms;
  if (kind == "quadratic") {
    const std::size_t d = std::stoul(shape[1].substr(2));
    Vec rref;
    for (std::size_t i = 3; i < shape.size(); ++i) rref.push_back(std::stod(shape[i]));
    if (rref.size() != d) throw ParseError(path + ": rref length mismatch");
    ms = CGModelState{QuadraticBaseline{Mat(d, d), rref}};
  } else if (kind == "mlp") {
    MlpPotential m;
    m.n_beads = std::stoi(shape[1].substr(6));
    m.dim = std::stoi(shape[2].substr(4));
    m.features.rbf_count = std::stoi(shape[3].substr(4));
    m.features.cutoff_low = std::stod(shape[4].substr(5));
    m.features.cutoff_high = std::stod(shape[5].substr(6));
    for (std::size_t i = 7; i < shape.size(); ++i) m.hidden.push_back(std::stoi(shape[i]));
    m.params.assign(mlp_param_count(m), 0.0);
    ms = CGModelState{std::move(m)};
  } else {
    throw ParseError(path + ": unknown model kind " + kind);
  }

  Vec params;
  params.reserve(param_count(ms));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    params.push_back(std::stod(line));
  }
  set_params(ms, params);
  return ms;
}

}  // namespace hm
