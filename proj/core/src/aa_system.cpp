#include "hessmatch/aa_system.hpp"

#include <cmath>

namespace hm {
namespace {

// Second-order jet over m local coordinates: value, gradient, Hessian.
// The Hessian accumulation rules are written symmetrically, so per-term
// Hessians are exactly symmetric by construction.
struct Jet2 {
  double v = 0.0;
  Vec g;
  Mat h;

  explicit Jet2(std::size_t m, double value = 0.0) : v(value), g(m, 0.0), h(m, m) {}
};

Jet2 seed(std::size_t m, std::size_t idx, double value) {
  Jet2 j(m, value);
  j.g[idx] = 1.0;
  return j;
}

Jet2 operator+(const Jet2& a, const Jet2& b) {
  Jet2 c(a.g.size(), a.v + b.v);
  for (std::size_t i = 0; i < a.g.size(); ++i) c.g[i] = a.g[i] + b.g[i];
  for (std::size_t i = 0; i < c.h.data().size(); ++i)
    c.h.data()[i] = a.h.data()[i] + b.h.data()[i];
  return c;
}

Jet2 operator-(const Jet2& a, const Jet2& b) {
  Jet2 c(a.g.size(), a.v - b.v);
  for (std::size_t i = 0; i < a.g.size(); ++i) c.g[i] = a.g[i] - b.g[i];
  for (std::size_t i = 0; i < c.h.data().size(); ++i)
    c.h.data()[i] = a.h.data()[i] - b.h.data()[i];
  return c;
}

Jet2 operator*(const Jet2& a, const Jet2& b) {
  const std::size_t m = a.g.size();
  Jet2 c(m, a.v * b.v);
  for (std::size_t i = 0; i < m; ++i) c.g[i] = a.g[i] * b.v + b.g[i] * a.v;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      c.h(i, j) = a.h(i, j) * b.v + b.h(i, j) * a.v + a.g[i] * b.g[j] + b.g[i] * a.g[j];
  return c;
}

Jet2 operator*(double s, const Jet2& a) {
  Jet2 c = a;
  c.v *= s;
  for (double& x : c.g) x *= s;
  for (double& x : c.h.data()) x *= s;
  return c;
}

Jet2 operator-(const Jet2& a, double s) {
  Jet2 c = a;
  c.v -= s;
  return c;
}

// Chain rule for unary f with derivatives f1, f2 at a.v.
Jet2 chain(const Jet2& a, double f0, double f1, double f2) {
  const std::size_t m = a.g.size();
  Jet2 c(m, f0);
  for (std::size_t i = 0; i < m; ++i) c.g[i] = f1 * a.g[i];
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) c.h(i, j) = f1 * a.h(i, j) + f2 * a.g[i] * a.g[j];
  return c;
}

Jet2 jet_sqrt(const Jet2& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s, -0.25 / (s * a.v));
}

Jet2 jet_inv(const Jet2& a) {
  const double inv = 1.0 / a.v;
  return chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}

Jet2 jet_acos(const Jet2& a) {
  const double x = a.v;
  const double w = 1.0 - x * x;
  const double s = std::sqrt(w);
  return chain(a, std::acos(x), -1.0 / s, -x / (w * s));
}

// Per-term local evaluation. Returns the energy jet over the term's
// local coordinates (the concatenated coordinates of its atoms).

Jet2 pair_distance(const Vec& r, int dim, std::size_t off_i, std::size_t off_j,
                   std::size_t m) {
  Jet2 d2(m, 0.0);
  for (int a = 0; a < dim; ++a) {
    const Jet2 xi = seed(m, off_i + a, r[off_i + a]);
    const Jet2 xj = seed(m, off_j + a, r[off_j + a]);
    const Jet2 diff = xi - xj;
    d2 = d2 + diff * diff;
  }
  return jet_sqrt(d2);
}

struct TermEval {
  std::vector<int> atoms;  // local atom order
  Jet2 energy;
};

TermEval eval_term(const HarmonicBond& t, const Vec& local, int dim) {
  if (t.j < 0) {
    // partner pinned at the origin; only atom i carries coordinates
    const std::size_t m = dim;
    Jet2 d2(m, 0.0);
    for (int c = 0; c < dim; ++c) {
      const Jet2 x = seed(m, c, local[c]);
      d2 = d2 + x * x;
    }
    const Jet2 dev = jet_sqrt(d2) - t.r0;
    return {{t.i}, 0.5 * t.k * (dev * dev)};
  }
  const std::size_t m = 2 * dim;
  const Jet2 d = pair_distance(local, dim, 0, dim, m);
  const Jet2 dev = d - t.r0;
  return {{t.i, t.j}, 0.5 * t.k * (dev * dev)};
}

TermEval eval_term(const HarmonicAngle& t, const Vec& local, int dim) {
  const std::size_t m = 3 * dim;
  // local layout: atom i, atom j (vertex), atom k
  Jet2 ab(m, 0.0), a2(m, 0.0), b2(m, 0.0);
  for (int c = 0; c < dim; ++c) {
    const Jet2 xi = seed(m, 0 * dim + c, local[0 * dim + c]);
    const Jet2 xj = seed(m, 1 * dim + c, local[1 * dim + c]);
    const Jet2 xk = seed(m, 2 * dim + c, local[2 * dim + c]);
    const Jet2 a = xi - xj;
    const Jet2 b = xk - xj;
    ab = ab + a * b;
    a2 = a2 + a * a;
    b2 = b2 + b * b;
  }
  const Jet2 cosang = ab * jet_inv(jet_sqrt(a2 * b2));
  const Jet2 theta = jet_acos(cosang);
  const Jet2 dev = theta - t.theta0;
  return {{t.i, t.j, t.k}, 0.5 * t.k_theta * (dev * dev)};
}

TermEval eval_term(const LennardJones& t, const Vec& local, int dim) {
  const std::size_t m = 2 * dim;
  const Jet2 d = pair_distance(local, dim, 0, dim, m);
  if (d.v < 1e-8) throw DivergentGeometry("LennardJones pair distance below 1e-8");
  const Jet2 sr = t.sigma * jet_inv(d);
  const Jet2 sr2 = sr * sr;
  const Jet2 sr6 = sr2 * sr2 * sr2;
  const Jet2 sr12 = sr6 * sr6;
  return {{t.i, t.j}, 4.0 * t.epsilon * (sr12 - sr6)};
}

TermEval eval_term(const HarmonicWell& t, const Vec& local, int dim) {
  const std::size_t m = dim;
  Jet2 e(m, 0.0);
  for (int c = 0; c < dim; ++c) {
    const Jet2 x = seed(m, c, local[c]);
    const Jet2 dev = x - t.center[c];
    e = e + dev * dev;
  }
  return {{t.i}, 0.5 * t.k * e};
}

std::vector<int> term_atoms(const ForceFieldTerm& term) {
  return std::visit(
      [](const auto& t) -> std::vector<int> {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, HarmonicBond>)
          return t.j < 0 ? std::vector<int>{t.i} : std::vector<int>{t.i, t.j};
        else if constexpr (std::is_same_v<T, HarmonicAngle>) return {t.i, t.j, t.k};
        else if constexpr (std::is_same_v<T, LennardJones>) return {t.i, t.j};
        else if constexpr (std::is_same_v<T, HarmonicWell>) return {t.i};
        else return {};
      },
      term);
}

Vec gather_local(const Vec& r, const std::vector<int>& atoms, int dim) {
  Vec local(atoms.size() * dim);
  for (std::size_t a = 0; a < atoms.size(); ++a)
    for (int c = 0; c < dim; ++c) local[a * dim + c] = r[atoms[a] * dim + c];
  return local;
}

// Visits every term, dispatching QuadraticForm analytically and the rest
// through the jet evaluator; `emit` receives (atoms, energy jet).
template <class EmitJet, class EmitQuad>
void visit_terms(const Vec& r, const ForceField& ff, EmitJet&& emit_jet,
                 EmitQuad&& emit_quad) {
  for (const ForceFieldTerm& term : ff.terms) {
    if (const auto* q = std::get_if<QuadraticForm>(&term)) {
      emit_quad(*q);
      continue;
    }
    const std::vector<int> atoms = term_atoms(term);
    const Vec local = gather_local(r, atoms, ff.dim);
    const TermEval ev = std::visit(
        [&](const auto& t) -> TermEval {
          using T = std::decay_t<decltype(t)>;
          if constexpr (std::is_same_v<T, QuadraticForm>) {
            throw std::logic_error("unreachable");
          } else {
            return eval_term(t, local, ff.dim);
          }
        },
        term);
    emit_jet(atoms, ev.energy);
  }
}

}  // namespace

double aa_energy(const AtomisticFrame& frame, const ForceField& ff) {
  const Vec& r = frame.positions;
  if (static_cast<int>(r.size()) != ff.n_coords())
    throw DimensionMismatch("aa_energy: frame/forcefield size mismatch");
  double e = 0.0;
  visit_terms(
      r, ff, [&](const std::vector<int>&, const Jet2& jet) { e += jet.v; },
      [&](const QuadraticForm& q) {
        const Vec kr = matvec(q.k, r);
        e += 0.5 * dot(r, kr);
      });
  return e;
}

Vec aa_forces(const AtomisticFrame& frame, const ForceField& ff) {
  const Vec& r = frame.positions;
  if (static_cast<int>(r.size()) != ff.n_coords())
    throw DimensionMismatch("aa_forces: frame/forcefield size mismatch");
  Vec f(r.size(), 0.0);
  visit_terms(
      r, ff,
      [&](const std::vector<int>& atoms, const Jet2& jet) {
        for (std::size_t a = 0; a < atoms.size(); ++a)
          for (int c = 0; c < ff.dim; ++c)
            f[atoms[a] * ff.dim + c] -= jet.g[a * ff.dim + c];
      },
      [&](const QuadraticForm& q) {
        const Vec kr = matvec(q.k, r);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] -= kr[i];
      });
  return f;
}

Mat aa_hessian(const AtomisticFrame& frame, const ForceField& ff) {
  const Vec& r = frame.positions;
  if (static_cast<int>(r.size()) != ff.n_coords())
    throw DimensionMismatch("aa_hessian: frame/forcefield size mismatch");
  const std::size_t n = r.size();
  Mat h(n, n);
  visit_terms(
      r, ff,
      [&](const std::vector<int>& atoms, const Jet2& jet) {
        const std::size_t na = atoms.size();
        for (std::size_t a = 0; a < na; ++a)
          for (int ca = 0; ca < ff.dim; ++ca)
            for (std::size_t b = 0; b < na; ++b)
              for (int cb = 0; cb < ff.dim; ++cb)
                h(atoms[a] * ff.dim + ca, atoms[b] * ff.dim + cb) +=
                    jet.h(a * ff.dim + ca, b * ff.dim + cb);
      },
      [&](const QuadraticForm& q) { h += q.k; });
  return h;
}

Vec aa_hvp_fd(const AtomisticFrame& frame, const ForceField& ff, const Vec& direction,
              double epsilon) {
  if (norm2(direction) <= 0.0) throw ValidationError("aa_hvp_fd: zero direction");
  if (epsilon <= 0.0) throw ValidationError("aa_hvp_fd: epsilon must be positive");
  AtomisticFrame plus = frame, minus = frame;
  for (std::size_t i = 0; i < frame.positions.size(); ++i) {
    plus.positions[i] += epsilon * direction[i];
    minus.positions[i] -= epsilon * direction[i];
  }
  const Vec fp = aa_forces(plus, ff);
  const Vec fm = aa_forces(minus, ff);
  Vec out(fp.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = -(fp[i] - fm[i]) / (2.0 * epsilon);
  return out;
}

std::vector<AtomisticFrame> sample_boltzmann(const ForceField& ff, double beta, int count,
                                             const SampleOptions& opts, RngState& rng) {
  if (beta <= 0.0) throw ValidationError("sample_boltzmann: beta must be positive");
  if (count < 1) throw ValidationError("sample_boltzmann: count must be >= 1");

  Vec r = opts.initial;
  if (r.empty()) {
    r.assign(ff.n_coords(), 0.0);
    // Spread atoms along the first axis when LJ terms are present, so the
    // initial state has no overlapping pairs.
    double max_sigma = 0.0;
    for (const auto& term : ff.terms)
      if (const auto* lj = std::get_if<LennardJones>(&term))
        max_sigma = std::max(max_sigma, lj->sigma);
    if (max_sigma > 0.0) {
      const double spacing = std::pow(2.0, 1.0 / 6.0) * max_sigma;
      for (int a = 0; a < ff.n_atoms; ++a) r[a * ff.dim] = a * spacing;
    }
  }
  if (static_cast<int>(r.size()) != ff.n_coords())
    throw DimensionMismatch("sample_boltzmann: initial state size mismatch");

  const double drift = opts.dt / opts.friction;
  const double noise = std::isinf(beta) ? 0.0 : std::sqrt(2.0 * opts.dt / (beta * opts.friction));

  AtomisticFrame scratch{r, 0};
  double energy = aa_energy(scratch, ff);

  auto step = [&]() {
    scratch.positions = r;
    const Vec f = aa_forces(scratch, ff);
    const Vec z = noise > 0.0 ? standard_normals(rng, r.size()) : Vec(r.size(), 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += drift * f[i] + noise * z[i];
    scratch.positions = r;
    const double e = aa_energy(scratch, ff);
    if (e - energy > 1e6) throw StepTooLarge("sample_boltzmann: energy jump above 1e6");
    energy = e;
  };

  const long burn_in = 10L * count;
  for (long s = 0; s < burn_in; ++s) step();

  std::vector<AtomisticFrame> frames;
  frames.reserve(count);
  for (int t = 0; t < count; ++t) {
    for (int s = 0; s < opts.thinning; ++s) step();
    frames.push_back(AtomisticFrame{r, t});
  }
  return frames;
}

}  // namespace hm
