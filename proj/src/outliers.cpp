#include "outlierlab/outliers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <limits>

#include <Eigen/Eigenvalues>

namespace outlierlab {

namespace {

bool finite(cd z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace

std::vector<cd> perturbed_spectrum_dense(const EnsembleSample& sample, const EmbeddedPerturbation& ep) {
  if (ep.n() != sample.dim()) throw InvalidArgument("perturbation and sample dimensions differ");
  MatrixXcd m = sample.to_dense();
  m.noalias() += ep.isometry * ep.a0 * ep.isometry.adjoint();
  Eigen::ComplexEigenSolver<MatrixXcd> es(m, false);
  if (es.info() != Eigen::Success) throw SolverError("complex eigensolver did not converge");
  const VectorXcd& v = es.eigenvalues();
  return {v.data(), v.data() + v.size()};
}

cd characteristic_f(const ProjectedResolvent& r, const MatrixXcd& a0, cd z) {
  const Index d = a0.rows();
  return (MatrixXcd::Identity(d, d) - r.block(z) * a0).determinant();
}

cd characteristic_f(const EnsembleSample& sample, const EmbeddedPerturbation& ep, cd z) {
  return characteristic_f(ProjectedResolvent(sample, ep.isometry), ep.a0, z);
}

cd limit_f0(const SpectralMeasure& mu, const std::vector<std::pair<cd, int>>& eigenvalues, cd z) {
  const cd g = cauchy_transform(mu, z);
  cd f = 1.0;
  for (const auto& [theta, k] : eigenvalues) f *= std::pow(1.0 - g * theta, k);
  return f;
}

cd limit_f0(const SpectralMeasure& mu, const JordanSpec& spec, cd z) {
  std::vector<std::pair<cd, int>> ev;
  for (const auto& e : spec.entries()) ev.emplace_back(e.theta, e.multiplicity());
  return limit_f0(mu, ev, z);
}

NewtonResult newton_on_f(const ProjectedResolvent& r, const MatrixXcd& a0, cd seed, const std::vector<cd>& deflate,
                         const NewtonOptions& opts) {
  const Index d = a0.rows();
  const MatrixXcd eye = MatrixXcd::Identity(d, d);
  NewtonResult res;
  cd z = seed;
  try {
    for (int it = 0; it < opts.max_iter; ++it) {
      res.iterations = it + 1;
      const auto [rz, drz] = r.block_with_derivative(z);
      Eigen::PartialPivLU<MatrixXcd> lu(eye - rz * a0);
      const cd f = lu.determinant();
      res.abs_f = std::abs(f);
      if (f == cd(0.0)) {
        res.root = z;
        res.converged = true;
        return res;
      }
      cd dlog = -(lu.solve(drz * a0)).trace();
      for (const cd& q : deflate) dlog -= 1.0 / (z - q);
      cd step = 1.0 / dlog;
      if (!finite(step)) return res;
      if (std::abs(step) > 1.0) step /= std::abs(step);
      const cd next = z - step;
      if (opts.admissible && !opts.admissible(next)) return res;
      z = next;
      if (std::abs(step) <= opts.step_tol * (1.0 + std::abs(z))) {
        res.root = z;
        res.converged = true;
        res.abs_f = std::abs(characteristic_f(r, a0, z));
        return res;
      }
    }
  } catch (const DomainError&) {
    return res;
  }
  res.root = z;
  return res;
}

ExteriorRegion::ExteriorRegion(const SpectralMeasure& mu, double delta) : mu_(&mu), delta_(delta) {
  if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
  for (const auto& p : mu.pieces()) {
    if (!components_.empty() && p.lo - components_.back().hi <= 2.0 * delta) {
      components_.back().hi = std::max(components_.back().hi, p.hi);
      components_.back().pieces.push_back(p);
    } else {
      components_.push_back({p.lo, p.hi, {p}});
    }
  }
}

bool ExteriorRegion::contains(cd z) const { return support_distance(*mu_, z) > delta_; }

cd ExteriorRegion::boundary_point(std::size_t c, double t) const {
  const Component& comp = components_.at(c);
  const double phi = 2.0 * kPi * t;
  const double half = 0.5 * (comp.hi - comp.lo) + delta_;
  const double x = 0.5 * (comp.lo + comp.hi) + half * std::cos(phi);
  double h = 0.0;
  for (const auto& p : comp.pieces) {
    const double dx = x < p.lo ? p.lo - x : (x > p.hi ? x - p.hi : 0.0);
    h = std::max(h, std::sqrt(std::max(0.0, delta_ * delta_ - dx * dx)));
  }
  return {x, std::sin(phi) >= 0.0 ? h : -h};
}

std::vector<Interval> ExteriorRegion::real_gaps() const {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<Interval> gaps;
  double left = -inf;
  for (const auto& c : components_) {
    gaps.push_back({left, c.lo - delta_});
    left = c.hi + delta_;
  }
  gaps.push_back({left, inf});
  return gaps;
}

RootCensus exterior_roots(const ProjectedResolvent& r, const MatrixXcd& a0, const SpectralMeasure& mu, double delta,
                          const std::vector<cd>& seeds, const CensusOptions& opts) {
  const ExteriorRegion region(mu, delta);
  RootCensus census;
  const Index d = a0.rows();
  const MatrixXcd eye = MatrixXcd::Identity(d, d);

  // Eigenvalues of H in the region are poles of f.
  const double bound = r.norm_bound() + 1.0;
  for (const auto& g : region.real_gaps()) {
    const auto ev = r.eigenvalues_in(std::max(g.lo, -bound), std::min(g.hi, bound));
    census.natural.insert(census.natural.end(), ev.begin(), ev.end());
  }

  auto f_at = [&](cd z) {
    ++census.evaluations;
    return (eye - r.block(z) * a0).determinant();
  };

  const double max_step = 0.5;
  // Total change of arg f along a closed path, or nothing if unresolved.
  auto winding = [&](const std::function<cd(double)>& path, int samples) -> std::optional<long> {
    bool ok = true;
    auto segment = [&](auto&& self, double t0, double t1, cd f0, cd f1, int depth) -> double {
      const cd ratio = f1 / f0;
      if (!finite(ratio) || f0 == cd(0.0) || f1 == cd(0.0)) {
        ok = false;
        return 0.0;
      }
      if (std::abs(ratio - 1.0) <= max_step) return std::arg(ratio);
      if (depth >= opts.max_bisections) {
        ok = false;
        return std::arg(ratio);
      }
      const double tm = 0.5 * (t0 + t1);
      const cd fm = f_at(path(tm));
      return self(self, t0, tm, f0, fm, depth + 1) + self(self, tm, t1, fm, f1, depth + 1);
    };
    double total = 0.0;
    try {
      const cd first = f_at(path(0.0));
      cd prev = first;
      for (int i = 0; i < samples && ok; ++i) {
        const cd next = (i + 1 == samples) ? first : f_at(path(static_cast<double>(i + 1) / samples));
        total += segment(segment, static_cast<double>(i) / samples, static_cast<double>(i + 1) / samples, prev, next, 0);
        prev = next;
      }
    } catch (const DomainError&) {
      ok = false;
    }
    const double w = total / (2.0 * kPi);
    const long wi = std::lround(w);
    if (!ok || std::abs(w - static_cast<double>(wi)) > 0.05) return std::nullopt;
    return wi;
  };

  long wind_total = 0;
  for (std::size_t c = 0; c < region.components().size(); ++c) {
    const auto w = winding([&](double t) { return region.boundary_point(c, t); }, opts.initial_samples);
    if (!w) census.contour_resolved = false;
    census.winding.push_back(w.value_or(0));
    wind_total += w.value_or(0);
  }
  census.expected = static_cast<Index>(census.natural.size()) - wind_total;

  NewtonOptions nopts = opts.newton;
  if (!nopts.admissible) nopts.admissible = [&](cd z) { return support_distance(mu, z) > 0.5 * delta; };
  std::vector<cd> converged;  // every root found, deflated in later runs
  auto done = [&] { return static_cast<Index>(census.roots.size()) >= census.expected; };
  auto newton_from = [&](cd seed, const NewtonOptions& o) -> std::optional<cd> {
    const NewtonResult nr = newton_on_f(r, a0, seed, converged, o);
    if (!nr.converged) return std::nullopt;
    if (std::any_of(converged.begin(), converged.end(),
                    [&](cd q) { return std::abs(q - nr.root) <= 1e-9 * (1.0 + std::abs(q)); }))
      return std::nullopt;
    converged.push_back(nr.root);
    if (region.contains(nr.root)) census.roots.push_back(nr.root);
    return nr.root;
  };

  for (const cd& s : seeds) {
    for (Index attempt = 0; attempt < census.expected && !done() && region.contains(s); ++attempt)
      if (!newton_from(s, nopts)) break;
  }
  if (!done() && census.contour_resolved) {
    // Every eigenvalue of H + U A0 U^* lies in |Re z| <= max|lambda(H)| + |A0|,
    // |Im z| <= |A0|. Odd offsets keep box edges off the real axis.
    const double nb = r.norm_bound() + 1.0;
    const Index n_all = r.count_above(-nb);
    auto edge = [&](Index target) {  // smallest x with count_above(x) <= target
      double lo = -nb, hi = nb;
      for (int it = 0; it < 60; ++it) {
        const double m = 0.5 * (lo + hi);
        (r.count_above(m) > target ? lo : hi) = m;
      }
      return hi;
    };
    const double lam = std::max(std::abs(edge(0)), std::abs(edge(n_all - 1)));
    const double a0_norm = a0.operatorNorm();
    const double xr = 1.01 * (lam + a0_norm) + delta, yr = 1.01 * a0_norm + delta;
    struct Box {
      double x0, x1, y0, y1;
    };
    auto inside = [](const Box& b, cd z) { return z.real() >= b.x0 && z.real() < b.x1 && z.imag() >= b.y0 && z.imag() < b.y1; };
    // Lower bound on the support distance over the box, and whether the box
    // lies wholly in the region.
    auto box_distance = [&](const Box& b) {
      const double dy = (b.y0 <= 0.0 && b.y1 >= 0.0) ? 0.0 : std::min(std::abs(b.y0), std::abs(b.y1));
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : mu.pieces()) {
        const double dx = b.x1 < p.lo ? p.lo - b.x1 : (b.x0 > p.hi ? b.x0 - p.hi : 0.0);
        best = std::min(best, std::hypot(dx, dy));
      }
      return best;
    };
    auto box_winding = [&](const Box& b) {
      return winding(
          [&](double t) {
            const double s = 4.0 * t;
            if (s < 1.0) return cd(b.x0 + s * (b.x1 - b.x0), b.y0);
            if (s < 2.0) return cd(b.x1, b.y0 + (s - 1.0) * (b.y1 - b.y0));
            if (s < 3.0) return cd(b.x1 - (s - 2.0) * (b.x1 - b.x0), b.y1);
            return cd(b.x0, b.y1 - (s - 3.0) * (b.y1 - b.y0));
          },
          16);
    };
    NewtonOptions local = nopts;
    int boxes = 0;
    std::vector<Box> stack = {{-xr * 1.0123, xr * 0.9931, -yr * 1.0171, yr * 0.9897}};
    while (!stack.empty() && !done() && boxes < opts.max_boxes) {
      const Box b = stack.back();
      stack.pop_back();
      ++boxes;
      const double side = std::max(b.x1 - b.x0, b.y1 - b.y0);
      const double dist = box_distance(b);
      const cd centre(0.5 * (b.x0 + b.x1), 0.5 * (b.y0 + b.y1));
      if (dist + side * std::sqrt(2.0) <= delta) continue;  // wholly in the bulk zone
      auto split = [&] {
        const double xm = 0.5 * (b.x0 + b.x1) + 1e-3 * (b.x1 - b.x0);
        const double ym = 0.5 * (b.y0 + b.y1) + 1.7e-3 * (b.y1 - b.y0);
        stack.push_back({b.x0, xm, b.y0, ym});
        stack.push_back({xm, b.x1, b.y0, ym});
        stack.push_back({b.x0, xm, ym, b.y1});
        stack.push_back({xm, b.x1, ym, b.y1});
      };
      if (dist <= delta) {
        // Straddles the bulk zone: f has dense poles there, so only split.
        if (side > std::max(opts.min_box, 0.125 * delta)) {
          split();
        } else if (region.contains(centre)) {
          newton_from(centre, local);
        }
        continue;
      }
      const auto w = box_winding(b);
      if (!w) {
        if (side > opts.min_box) split();
        continue;
      }
      const auto poles = std::count_if(census.natural.begin(), census.natural.end(),
                                       [&](double x) { return inside(b, cd(x, 0.0)); });
      const long count = *w + static_cast<long>(poles);
      const auto known = std::count_if(converged.begin(), converged.end(), [&](cd q) { return inside(b, q); });
      if (count <= known) continue;
      if (count - known == 1 || side <= opts.min_box) {
        local.admissible = [&, b](cd z) {
          const double mx = 0.5 * (b.x1 - b.x0), my = 0.5 * (b.y1 - b.y0);
          return z.real() > b.x0 - mx && z.real() < b.x1 + mx && z.imag() > b.y0 - my && z.imag() < b.y1 + my;
        };
        for (long k = known; k < count; ++k)
          if (!newton_from(centre, local)) break;
        const auto now = std::count_if(converged.begin(), converged.end(), [&](cd q) { return inside(b, q); });
        if (now >= count || side <= opts.min_box) continue;
      }
      split();
    }
  }
  std::sort(census.roots.begin(), census.roots.end(), [](cd u, cd v) {
    return u.real() < v.real() || (u.real() == v.real() && u.imag() < v.imag());
  });
  return census;
}

bool OutlierReport::counts_match() const {
  if (!unmatched.empty()) return false;
  for (const auto& c : clusters)
    if (static_cast<int>(c.members.size()) != c.expected) return false;
  return true;
}

double default_delta(Index n) { return std::max(0.1, 3.0 * std::pow(static_cast<double>(n), -0.25)); }

namespace {

struct XiRef {
  std::size_t p, s;
  cd xi;
};

std::vector<XiRef> reachable_xis(const std::vector<OutlierPrediction>& preds, const SpectralMeasure& mu, double delta) {
  std::vector<XiRef> out;
  for (std::size_t p = 0; p < preds.size(); ++p)
    for (std::size_t s = 0; s < preds[p].solutions.size(); ++s)
      if (support_distance(mu, preds[p].solutions[s]) > delta) out.push_back({p, s, preds[p].solutions[s]});
  return out;
}

}  // namespace

double default_capture(const std::vector<OutlierPrediction>& preds, const SpectralMeasure& mu, double delta) {
  const auto xs = reachable_xis(preds, mu, delta);
  if (xs.empty()) return 0.0;
  double c = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < xs.size(); ++a) {
    c = std::min(c, 0.5 * (support_distance(mu, xs[a].xi) - delta));
    for (std::size_t b = a + 1; b < xs.size(); ++b) c = std::min(c, 0.5 * std::abs(xs[a].xi - xs[b].xi));
  }
  return c;
}

OutlierReport classify_and_match(const std::vector<cd>& eigs, const std::vector<OutlierPrediction>& preds,
                                 const SpectralMeasure& mu, double delta, std::optional<double> capture) {
  OutlierReport rep;
  rep.delta = delta;
  rep.capture = capture ? *capture : default_capture(preds, mu, delta);
  const auto xs = reachable_xis(preds, mu, delta);
  for (std::size_t a = 0; a < xs.size(); ++a) {
    if (rep.capture > support_distance(mu, xs[a].xi) - delta)
      throw InvalidArgument("capture radius reaches into the bulk zone");
    for (std::size_t b = a + 1; b < xs.size(); ++b)
      if (rep.capture > 0.5 * std::abs(xs[a].xi - xs[b].xi))
        throw InvalidArgument("capture radius exceeds half the xi separation");
  }
  for (const auto& x : xs) rep.clusters.push_back({x.p, x.s, x.xi, preds[x.p].theta, preds[x.p].multiplicity_k, {}});

  rep.all_eigs = eigs;
  for (const cd& z : eigs) {
    if (support_distance(mu, z) <= delta) {
      rep.bulk.push_back(z);
      continue;
    }
    rep.outliers.push_back(z);
    std::size_t best = xs.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < xs.size(); ++a) {
      const double dz = std::abs(z - xs[a].xi);
      if (dz < best_d) {
        best_d = dz;
        best = a;
      }
    }
    if (best < xs.size() && best_d <= rep.capture)
      rep.clusters[best].members.push_back(z);
    else
      rep.unmatched.push_back(z);
  }
  return rep;
}

}  // namespace outlierlab
