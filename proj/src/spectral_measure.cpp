#include "outlierlab/spectral_measure.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace outlierlab {

namespace {

constexpr double kWeightTol = 1e-12;
constexpr int kMaxMomentOrder = 12;

double segment_distance(cd z, const Interval& s) {
  const double x = std::clamp(z.real(), s.lo, s.hi);
  return std::abs(z - cd(x, 0.0));
}

// log((z - lo) / (z - hi)); cut on [lo, hi], accurate for |z| >> hi - lo.
cd log_ratio(cd z, double lo, double hi) {
  const cd u = (hi - lo) / (z - hi);
  const double t = 2.0 * u.real() + std::norm(u);
  const double re = t > -0.5 ? 0.5 * std::log1p(t) : std::log(std::abs(1.0 + u));
  return {re, std::atan2(u.imag(), 1.0 + u.real())};
}

// 2 / (zeta + sqrt(zeta - 2s) sqrt(zeta + 2s)): the branch with cut [-2s, 2s]
// and G ~ 1/zeta at infinity.
cd semicircle_sqrt(cd zeta, double s) {
  return std::sqrt(zeta - 2.0 * s) * std::sqrt(zeta + 2.0 * s);
}

void semicircle_taylor(cd zeta, double sigma, int order, cd* g) {
  const cd s = semicircle_sqrt(zeta, sigma);
  g[0] = 2.0 / (zeta + s);
  const double s2 = sigma * sigma;
  for (int n = 1; n <= order; ++n) {
    cd acc = 0.0;
    for (int i = 1; i < n; ++i) acc += g[i] * g[n - i];
    g[n] = (s2 * acc - g[n - 1]) / s;
  }
}

double semicircle_cdf_std(double t) {
  if (t <= -2.0) return 0.0;
  if (t >= 2.0) return 1.0;
  return 0.5 + t * std::sqrt(4.0 - t * t) / (4.0 * kPi) + std::asin(t / 2.0) / kPi;
}

void require_off_support(const SpectralMeasure& mu, cd z) {
  const double scale = 1.0 + std::abs(z);
  if (support_distance(mu, z) <= 1e-12 * scale) {
    std::ostringstream os;
    os << "point " << z << " lies on the support";
    throw DomainError(os.str());
  }
}

}  // namespace

SpectralMeasure::SpectralMeasure(std::vector<Atom> atoms, std::vector<SemicirclePart> semicircles,
                                 std::vector<UniformPart> uniforms)
    : atoms_(std::move(atoms)), semicircles_(std::move(semicircles)), uniforms_(std::move(uniforms)) {
  finalize();
  std::vector<double> locations;
  bool continuous = false;
  for (const auto& a : atoms_)
    if (a.w > 0) locations.push_back(a.x);
  for (const auto& s : semicircles_) continuous = continuous || s.w > 0;
  for (const auto& u : uniforms_) continuous = continuous || u.w > 0;
  std::sort(locations.begin(), locations.end());
  locations.erase(std::unique(locations.begin(), locations.end()), locations.end());
  if (!continuous && locations.size() < 2)
    throw InvalidArgument("measure is a single Dirac mass");
}

SpectralMeasure SpectralMeasure::semicircle(double sigma, double center) {
  return SpectralMeasure({}, {{center, sigma, 1.0}}, {});
}

SpectralMeasure SpectralMeasure::point_mass(double x) {
  SpectralMeasure mu;
  mu.atoms_ = {{x, 1.0}};
  mu.finalize();
  return mu;
}

void SpectralMeasure::finalize() {
  double total = 0.0;
  for (const auto& a : atoms_) {
    if (!(a.w >= 0.0 && a.w <= 1.0) || !std::isfinite(a.x))
      throw InvalidArgument("atom weight must lie in [0, 1] at a finite location");
    total += a.w;
    if (a.w > 0) pieces_.push_back({a.x, a.x});
  }
  for (const auto& s : semicircles_) {
    if (!(s.sigma > 0.0) || !(s.w >= 0.0) || !std::isfinite(s.center))
      throw InvalidArgument("semicircle needs sigma > 0 and weight >= 0");
    total += s.w;
    if (s.w > 0) pieces_.push_back({s.center - 2.0 * s.sigma, s.center + 2.0 * s.sigma});
  }
  for (const auto& u : uniforms_) {
    if (!(u.lo < u.hi) || !(u.w >= 0.0) || !std::isfinite(u.lo) || !std::isfinite(u.hi))
      throw InvalidArgument("uniform part needs lo < hi and weight >= 0");
    total += u.w;
    if (u.w > 0) pieces_.push_back({u.lo, u.hi});
  }
  if (std::abs(total - 1.0) > kWeightTol) throw InvalidArgument("total weight differs from 1");
  if (pieces_.empty()) throw InvalidArgument("empty measure");

  std::sort(pieces_.begin(), pieces_.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi); });
  for (const auto& p : pieces_) {
    if (!support_.empty() && p.lo <= support_.back().hi)
      support_.back().hi = std::max(support_.back().hi, p.hi);
    else
      support_.push_back(p);
  }
}

double SpectralMeasure::cdf(double x) const {
  double f = 0.0;
  for (const auto& a : atoms_)
    if (x >= a.x) f += a.w;
  for (const auto& s : semicircles_) f += s.w * semicircle_cdf_std((x - s.center) / s.sigma);
  for (const auto& u : uniforms_) f += u.w * std::clamp((x - u.lo) / (u.hi - u.lo), 0.0, 1.0);
  return f;
}

double SpectralMeasure::quantile(double u) const {
  if (!(u > 0.0 && u < 1.0)) throw InvalidArgument("quantile level must lie in (0, 1)");
  double lo = support_.front().lo;
  double hi = support_.back().hi;
  if (cdf(lo) >= u) return lo;
  // Invariant: F(lo) < u <= F(hi).
  for (int it = 0; it < 200 && hi - lo > 4e-16 * (1.0 + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (cdf(mid) >= u)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

double support_distance(const SpectralMeasure& mu, cd z) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& s : mu.support()) d = std::min(d, segment_distance(z, s));
  return d;
}

cd cauchy_transform(const SpectralMeasure& mu, cd z) {
  require_off_support(mu, z);
  cd g = 0.0;
  for (const auto& a : mu.atoms()) g += a.w / (z - a.x);
  for (const auto& s : mu.semicircles()) {
    if (s.w == 0.0) continue;
    const cd zeta = z - s.center;
    g += s.w * 2.0 / (zeta + semicircle_sqrt(zeta, s.sigma));
  }
  for (const auto& u : mu.uniforms()) {
    if (u.w == 0.0) continue;
    g += u.w * log_ratio(z, u.lo, u.hi) / (u.hi - u.lo);
  }
  return g;
}

cd resolvent_moment(const SpectralMeasure& mu, cd z, int k) {
  if (k < 0 || k > kMaxMomentOrder) throw InvalidArgument("moment order must lie in [0, 12]");
  if (k == 0) return cauchy_transform(mu, z);
  require_off_support(mu, z);
  cd r = 0.0;
  for (const auto& a : mu.atoms()) r += a.w * std::pow(z - a.x, -(k + 1));
  for (const auto& u : mu.uniforms()) {
    if (u.w == 0.0) continue;
    r += u.w * (std::pow(z - u.hi, -k) - std::pow(z - u.lo, -k)) / (k * (u.hi - u.lo));
  }
  cd g[kMaxMomentOrder + 1];
  for (const auto& s : mu.semicircles()) {
    if (s.w == 0.0) continue;
    semicircle_taylor(z - s.center, s.sigma, k, g);
    r += s.w * ((k % 2 == 0) ? g[k] : -g[k]);
  }
  return r;
}

cd covariance_kernel_phi(const SpectralMeasure& mu, cd z, cd w) {
  require_off_support(mu, z);
  require_off_support(mu, w);
  // Fixed argument order makes the result exactly symmetric.
  if (w.real() < z.real() || (w.real() == z.real() && w.imag() < z.imag())) std::swap(z, w);
  const cd d = z - w;
  const cd gz = cauchy_transform(mu, z);
  if (std::abs(d) < 1e-8) return resolvent_moment(mu, z, 1) - gz * gz;
  const cd gw = cauchy_transform(mu, w);
  const cd h = 0.5 * d;
  const cd mid = 0.5 * (z + w);
  const double dm = support_distance(mu, mid);
  if (std::abs(h) < 0.1 * dm) {
    // Even expansion around the midpoint; six terms reach 1e-12 relative.
    cd acc = 0.0;
    cd h2n = 1.0;
    for (int n = 0; 2 * n + 1 <= kMaxMomentOrder; ++n) {
      acc += h2n * resolvent_moment(mu, mid, 2 * n + 1);
      h2n *= h * h;
    }
    return acc - gz * gw;
  }
  return -(gz - gw) / d - gz * gw;
}

cd wigner_kernel_psi(double sigma, cd z, cd w) {
  const SpectralMeasure sc = SpectralMeasure::semicircle(sigma);
  const cd gz = cauchy_transform(sc, z);
  const cd gw = cauchy_transform(sc, w);
  const cd phi = covariance_kernel_phi(sc, z, w) + gz * gw;
  const double s2 = sigma * sigma;
  return gz * gz * gw * gw * (s2 + s2 * s2 * phi);
}

OutlierPrediction solve_outlier_set(const SpectralMeasure& mu, cd theta, const SolveOptions& opts,
                                    int multiplicity_k) {
  if (theta == cd(0.0)) throw InvalidArgument("theta must be nonzero");
  if (multiplicity_k < 1) throw InvalidArgument("multiplicity must be >= 1");
  OutlierPrediction out;
  out.theta = theta;
  out.multiplicity_k = multiplicity_k;

  const double a = mu.support().front().lo;
  const double b = mu.support().back().hi;
  const double diam = mu.diameter();
  const double margin = diam + 2.0 * std::abs(theta);
  cd lo_corner(a - margin, -margin);
  cd hi_corner(b + margin, margin);
  if (opts.box) std::tie(lo_corner, hi_corner) = *opts.box;
  const double pitch = opts.pitch > 0.0 ? opts.pitch : std::min(0.1, std::max(diam, 1e-3) / 20.0);

  const cd target = 1.0 / theta;
  const double res_tol = opts.tol * std::max(1.0, std::abs(target));
  const double floor_dist = std::max(1e-9, 0.1 * opts.delta_min);
  std::vector<cd> roots;

  auto newton = [&](cd z) -> std::optional<cd> {
    for (int it = 0; it < opts.max_iter; ++it) {
      const cd h = cauchy_transform(mu, z) - target;
      const cd dh = -resolvent_moment(mu, z, 1);
      cd step = h / dh;
      // Keep iterates off the cut.
      const double dist = support_distance(mu, z);
      if (std::abs(step) > 0.5 * std::max(dist, 0.1)) step *= 0.5 * std::max(dist, 0.1) / std::abs(step);
      const cd next = z - step;
      if (!std::isfinite(next.real()) || !std::isfinite(next.imag())) return std::nullopt;
      if (support_distance(mu, next) < floor_dist) return std::nullopt;
      z = next;
      if (std::abs(step) < 1e-3 * opts.tol * (1.0 + std::abs(z)) ||
          (std::abs(step) < opts.tol && std::abs(cauchy_transform(mu, z) - target) < 1e-3 * res_tol))
        break;
      if (it + 1 == opts.max_iter) {
        ++out.failed_seeds;
        return std::nullopt;
      }
    }
    if (std::abs(cauchy_transform(mu, z) - target) >= res_tol) return std::nullopt;
    return z;
  };

  for (double y = lo_corner.imag(); y <= hi_corner.imag() + 1e-12; y += pitch) {
    for (double x = lo_corner.real(); x <= hi_corner.real() + 1e-12; x += pitch) {
      const cd seed(x, y);
      if (support_distance(mu, seed) <= opts.delta_min) continue;
      const auto r = newton(seed);
      if (!r) continue;
      bool dup = false;
      for (const auto& q : roots) dup = dup || std::abs(q - *r) < 10.0 * opts.tol * (1.0 + std::abs(q));
      if (!dup) roots.push_back(*r);
    }
  }

  std::sort(roots.begin(), roots.end(), [](cd u, cd v) {
    return u.real() < v.real() || (u.real() == v.real() && u.imag() < v.imag());
  });
  for (const auto& r : roots) {
    if (support_distance(mu, r) > opts.delta_min)
      out.solutions.push_back(r);
    else
      out.marginal.push_back(r);
    const double edge = std::min({r.real() - lo_corner.real(), hi_corner.real() - r.real(),
                                  r.imag() - lo_corner.imag(), hi_corner.imag() - r.imag()});
    if (edge < 2.0 * pitch) out.boundary_hit = true;
  }
  return out;
}

}  // namespace outlierlab
