#include "biooss/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace biooss {

void LocalParams::validate() const {
  // Unlike the simulation-side PhysicalParams, zero damping is admitted
  // here: alpha = beta = 1 is a perfectly good point for the closed forms.
  if (!(c >= 0.0) || !(kp >= 0.0) || !(ko >= 0.0) || !(dt > 0.0)) {
    throw DomainError("LocalParams: need c >= 0, kp >= 0, ko >= 0, dt > 0");
  }
}

std::vector<FourierMode> grid_modes(const GridShape& shape) {
  shape.validate();
  // xi_x spans the row axis (H points) to match the row-direction stencil;
  // xi_y spans the column axis. FFT index k maps to signed harmonic
  // m = k for k <= N/2 - 1, else k - N.
  std::vector<FourierMode> modes;
  modes.reserve(static_cast<std::size_t>(shape.h) * shape.w);
  auto harmonic = [](int k, int n) {
    return (k <= (n - 1) / 2) ? k : k - n;
  };
  for (int ki = 0; ki < shape.h; ++ki) {
    for (int kj = 0; kj < shape.w; ++kj) {
      FourierMode m;
      m.xi_x = 2.0 * M_PI * harmonic(ki, shape.h) / (shape.h * shape.dx);
      m.xi_y = 2.0 * M_PI * harmonic(kj, shape.w) / (shape.w * shape.dx);
      modes.push_back(m);
    }
  }
  return modes;
}

namespace {

struct Symbol {
  Complex gx;
  Complex gy;
  double s2 = 0.0;  // |gx|^2 + |gy|^2
};

Symbol make_symbol(const FourierMode& mode, double dx, SymbolKind kind) {
  Symbol sym;
  if (kind == SymbolKind::Continuum) {
    sym.gx = Complex(0.0, mode.xi_x);
    sym.gy = Complex(0.0, mode.xi_y);
  } else {
    sym.gx = (1.0 - std::exp(Complex(0.0, -mode.xi_x * dx))) / dx;
    sym.gy = (1.0 - std::exp(Complex(0.0, -mode.xi_y * dx))) / dx;
  }
  sym.s2 = std::norm(sym.gx) + std::norm(sym.gy);
  return sym;
}

// Trace and determinant of the 2x2 oscillatory block (p coupled with the
// longitudinal o component). The continuum presentation omits the dt^2
// self-coupling term gamma; the stencil symbol keeps it.
void quadratic_coeffs(const LocalParams& lp, const Symbol& sym,
                      SymbolKind kind, double& tr, double& det) {
  const double alpha = lp.alpha();
  const double beta = lp.beta();
  const double x = lp.c * lp.c * lp.dt * lp.dt * sym.s2;
  if (kind == SymbolKind::Continuum) {
    tr = alpha + beta;
    det = alpha * beta * (1.0 + x);
  } else {
    tr = alpha + beta - alpha * x;
    det = alpha * beta;
  }
}

// Cancellation-safe roots of lambda^2 - tr lambda + det = 0 with det > 0.
// Complex pair is returned as (+Im, -Im); a real pair is ordered with the
// root farther from `beta` first, so the second root continues the
// transverse branch at the DC mode.
std::pair<Complex, Complex> quadratic_roots(double tr, double det,
                                            double beta) {
  double disc = tr * tr - 4.0 * det;
  if (disc < 0.0) {
    double im = 0.5 * std::sqrt(-disc);
    return {Complex(0.5 * tr, im), Complex(0.5 * tr, -im)};
  }
  double sq = std::sqrt(disc);
  double q = 0.5 * (tr + (tr >= 0.0 ? sq : -sq));
  double r1 = q;
  double r2 = det / q;
  if (std::abs(r1 - beta) < std::abs(r2 - beta)) std::swap(r1, r2);
  return {Complex(r1, 0.0), Complex(r2, 0.0)};
}

}  // namespace

Matrix3c mode_matrix(const LocalParams& lp, const FourierMode& mode, double dx,
                     SymbolKind kind) {
  lp.validate();
  const Symbol sym = make_symbol(mode, dx, kind);
  const double alpha = lp.alpha();
  const double beta = lp.beta();
  const double c2dt = lp.c * lp.c * lp.dt;
  Matrix3c a;
  double gamma =
      (kind == SymbolKind::Stencil) ? c2dt * lp.dt * sym.s2 : 0.0;
  a(0, 0) = alpha * (1.0 - gamma);
  a(0, 1) = alpha * c2dt * std::conj(sym.gx);
  a(0, 2) = alpha * c2dt * std::conj(sym.gy);
  a(1, 0) = -beta * lp.dt * sym.gx;
  a(1, 1) = beta;
  a(1, 2) = 0.0;
  a(2, 0) = -beta * lp.dt * sym.gy;
  a(2, 1) = 0.0;
  a(2, 2) = beta;
  return a;
}

std::array<Complex, 3> eigenvalues_exact(const LocalParams& lp,
                                         const FourierMode& mode, double dx,
                                         SymbolKind kind) {
  lp.validate();
  const Symbol sym = make_symbol(mode, dx, kind);
  double tr, det;
  quadratic_coeffs(lp, sym, kind, tr, det);
  auto [l2, l3] = quadratic_roots(tr, det, lp.beta());
  return {Complex(lp.beta(), 0.0), l2, l3};
}

std::array<Complex, 2> eigenvalues_paper_approx(const LocalParams& lp,
                                                const FourierMode& mode) {
  lp.validate();
  const double alpha = lp.alpha();
  const double beta = lp.beta();
  const double xi = std::hypot(mode.xi_x, mode.xi_y);
  const double tr = alpha + beta;
  const double det = alpha * beta *
                     (1.0 + lp.c * lp.c * lp.dt * lp.dt * xi * xi);
  if (tr * tr - 4.0 * det >= 0.0) {
    throw DomainError(
        "eigenvalues_paper_approx: discriminant is non-negative, the "
        "conjugate-pair closed form does not apply at this mode");
  }
  const double re = 0.5 * (alpha + beta);
  const double im = lp.c * lp.dt * xi * std::sqrt(alpha * beta);
  return {Complex(re, im), Complex(re, -im)};
}

EigenTriple eigenvectors(const LocalParams& lp, const FourierMode& mode,
                         double dx, SymbolKind kind) {
  lp.validate();
  const Symbol sym = make_symbol(mode, dx, kind);
  const double beta = lp.beta();
  auto eigs = eigenvalues_exact(lp, mode, dx, kind);

  EigenTriple t;
  t.lambda1 = eigs[0];
  t.lambda2 = eigs[1];
  t.lambda3 = eigs[2];

  const double scale = std::max({std::abs(eigs[1]), std::abs(eigs[2]), 1.0});
  if (std::abs(eigs[1] - Complex(beta)) < 1e-12 * scale ||
      std::abs(eigs[2] - Complex(beta)) < 1e-12 * scale) {
    throw DegeneracyError(
        "eigenvectors: oscillatory eigenvalue coincides with the transverse "
        "value; step this mode densely instead");
  }
  if (std::abs(eigs[1] - eigs[2]) < 1e-12 * scale) {
    throw DegeneracyError(
        "eigenvectors: repeated oscillatory eigenvalue; step this mode "
        "densely instead");
  }

  // Transverse column: the o-plane direction annihilated by the divergence
  // symbol, (0, conj(gy), -conj(gx)) / s; at the DC mode any o direction
  // works and (0, 1, 0) is chosen.
  Vector3c v1;
  if (sym.s2 == 0.0) {
    v1 << 0.0, 1.0, 0.0;
  } else {
    double s = std::sqrt(sym.s2);
    v1 << 0.0, std::conj(sym.gy) / s, -std::conj(sym.gx) / s;
  }
  auto osc_column = [&](const Complex& lambda) {
    Vector3c v;
    v << 1.0, beta * lp.dt * sym.gx / (Complex(beta) - lambda),
        beta * lp.dt * sym.gy / (Complex(beta) - lambda);
    v /= v.norm();
    return v;
  };
  t.p.col(0) = v1;
  t.p.col(1) = osc_column(eigs[1]);
  t.p.col(2) = osc_column(eigs[2]);
  t.pinv = t.p.inverse();
  return t;
}

double stability_bound(double kp, double ko, double dt, double dx) {
  return (dx / dt) * std::sqrt((1.0 + dt * kp) * (1.0 + dt * ko)) / M_SQRT2;
}

Field stability_bound(const PhysicalParams& params, const GridShape& shape) {
  shape.validate();
  params.validate(shape);
  Field out(shape.h, shape.w);
  for (std::size_t n = 0; n < out.a.size(); ++n) {
    out.a[n] = stability_bound(params.kp.a[n], params.ko.a[n], shape.dt,
                               shape.dx);
  }
  return out;
}

double contraction_bound(double kp, double ko, double dt, double dx) {
  const double alpha = 1.0 / (1.0 + dt * kp);
  const double beta = 1.0 / (1.0 + dt * ko);
  return (dx / dt) *
         std::sqrt((1.0 + alpha) * (1.0 + beta) / (8.0 * alpha));
}

StabilityReport check_stability(const PhysicalParams& params,
                                const GridShape& shape) {
  shape.validate();
  params.validate(shape);
  StabilityReport report;
  report.max_c_allowed = stability_bound(params, shape);
  double worst = 0.0;
  for (int i = 0; i < shape.h; ++i) {
    for (int j = 0; j < shape.w; ++j) {
      const double c = params.c.at(i, j);
      const double cmax = report.max_c_allowed.at(i, j);
      const double alpha = 1.0 / (1.0 + shape.dt * params.kp.at(i, j));
      const double beta = 1.0 / (1.0 + shape.dt * params.ko.at(i, j));
      // DC-mode magnitudes are alpha and beta exactly; the oscillatory
      // branch magnitude c dt |xi| sqrt(alpha beta) evaluated at the
      // resolvable cap |xi| = sqrt(2)/dx equals c / cmax.
      double cell_worst = std::max({alpha, beta, c / cmax});
      worst = std::max(worst, cell_worst);
      if (c > cmax) {
        report.violations.push_back({i, j, c, cmax});
      }
    }
  }
  report.worst_eig_magnitude = worst;
  return report;
}

Field frequency_map(const PhysicalParams& params, const GridShape& shape,
                    const FourierMode& mode, PhaseModel phase,
                    FrequencyConvention conv, SymbolKind kind) {
  shape.validate();
  params.validate(shape);
  Field out(shape.h, shape.w);
  const double denom =
      (conv == FrequencyConvention::Doubled ? M_PI : 2.0 * M_PI) * shape.dt;
  for (int i = 0; i < shape.h; ++i) {
    for (int j = 0; j < shape.w; ++j) {
      LocalParams lp{params.c.at(i, j), params.kp.at(i, j),
                     params.ko.at(i, j), shape.dt};
      double theta;
      if (phase == PhaseModel::Exact) {
        auto eigs = eigenvalues_exact(lp, mode, shape.dx, kind);
        theta = std::atan2(eigs[1].imag(), eigs[1].real());
      } else {
        // Closed form of the conjugate-pair approximation, evaluated as a
        // formula in every regime.
        const double alpha = lp.alpha();
        const double beta = lp.beta();
        const double xi = std::hypot(mode.xi_x, mode.xi_y);
        theta = std::atan2(lp.c * lp.dt * xi * std::sqrt(alpha * beta),
                           0.5 * (alpha + beta));
      }
      out.at(i, j) = theta / denom;
    }
  }
  return out;
}

namespace {

double reference_xi(const GridShape& shape, ModePolicy policy) {
  switch (policy) {
    case ModePolicy::Fundamental: {
      double xi_x = 2.0 * M_PI / (shape.h * shape.dx);
      double xi_y = 2.0 * M_PI / (shape.w * shape.dx);
      return std::hypot(xi_x, xi_y);
    }
    case ModePolicy::RmsMode: {
      double acc = 0.0;
      auto modes = grid_modes(shape);
      for (const auto& m : modes) acc += m.xi_x * m.xi_x + m.xi_y * m.xi_y;
      return std::sqrt(acc / modes.size());
    }
    case ModePolicy::StencilEdge:
      return 0.0;  // unused; the stencil corner mode is fixed below
  }
  return 0.0;
}

}  // namespace

BandInitResult init_for_band(double f_lo, double f_hi, double kp, double ko,
                             double dt, double dx, const GridShape& shape,
                             ModePolicy policy) {
  if (!(kp > 0.0) || !(ko > 0.0) || !(dt > 0.0) || !(dx > 0.0)) {
    throw DomainError("init_for_band: need kp, ko, dt, dx > 0");
  }
  if (!(f_lo >= 0.0) || !(f_lo < f_hi) || !(f_hi < 0.5 / dt)) {
    throw DomainError(
        "init_for_band: band must satisfy 0 <= f_lo < f_hi < 1/(2 dt)");
  }
  const double alpha = 1.0 / (1.0 + dt * kp);
  const double beta = 1.0 / (1.0 + dt * ko);
  const double f_mid = 0.5 * (f_lo + f_hi);
  const double eq_cap = stability_bound(kp, ko, dt, dx);

  BandInitResult res;
  if (policy == ModePolicy::StencilEdge) {
    // Exact phase of the stencil corner mode xi = (pi/dx, pi/dx), whose
    // symbol magnitude is s = 2 sqrt(2)/dx, solved in physical frequency
    // units theta = 2 pi f dt. Clamped away from the contraction edge: at
    // the edge the oscillatory pair degenerates into real roots and the
    // response escapes the target band.
    const double s = 2.0 * M_SQRT2 / dx;
    const double theta = 2.0 * M_PI * f_mid * dt;
    const double num = alpha + beta -
                       2.0 * std::sqrt(alpha * beta) * std::cos(theta);
    res.c = std::sqrt(num / alpha) / (dt * s);
    const double cap = std::min(eq_cap, 0.995 * contraction_bound(kp, ko, dt, dx));
    if (res.c > cap) {
      res.c = cap;
      res.clamped = true;
    }
    LocalParams lp{res.c, kp, ko, dt};
    FourierMode corner{M_PI / dx, M_PI / dx};
    auto eigs = eigenvalues_exact(lp, corner, dx, SymbolKind::Stencil);
    res.achieved_f =
        std::atan2(eigs[1].imag(), eigs[1].real()) / (2.0 * M_PI * dt);
  } else {
    // Conjugate-pair phase at the policy's reference mode, in the doubled
    // convention theta = pi f dt of the phase-to-frequency map. The pair
    // form caps the reachable phase at pi/2, which is what limits f_hi to
    // 1/(2 dt).
    const double xi = reference_xi(shape, policy);
    const double theta = M_PI * f_mid * dt;
    const double half_tr = 0.5 * (alpha + beta);
    res.c = std::tan(theta) * half_tr /
            (dt * xi * std::sqrt(alpha * beta));
    if (res.c > eq_cap) {
      res.c = eq_cap;
      res.clamped = true;
    }
    res.achieved_f =
        std::atan2(res.c * dt * xi * std::sqrt(alpha * beta), half_tr) /
        (M_PI * dt);
  }
  if (res.achieved_f < f_lo) {
    throw InfeasibleBandError(
        "init_for_band: band unreachable under the stability bound; maximal "
        "achievable frequency is " + std::to_string(res.achieved_f),
        res.achieved_f);
  }
  return res;
}

SymbolCheckReport fourier_symbol_check(const GridShape& shape) {
  shape.validate();
  SymbolCheckReport report;
  // 1D axis sweep over the positive column-axis harmonics. Deviation is the
  // magnitude shortfall 1 - |g|/|xi| of the stencil symbol against the
  // continuum symbol, which grows monotonically to 1 - 2/pi at the edge.
  for (int m = 1; m <= shape.w / 2; ++m) {
    double xi = 2.0 * M_PI * m / (shape.w * shape.dx);
    Complex g = (1.0 - std::exp(Complex(0.0, -xi * shape.dx))) / shape.dx;
    report.axis_sweep.push_back({xi, 1.0 - std::abs(g) / xi});
  }
  double worst = 0.0;
  for (const auto& mode : grid_modes(shape)) {
    double xi = std::hypot(mode.xi_x, mode.xi_y);
    if (xi == 0.0) continue;
    Symbol sym = make_symbol(mode, shape.dx, SymbolKind::Stencil);
    worst = std::max(worst, 1.0 - std::sqrt(sym.s2) / xi);
  }
  report.max_relative_deviation = worst;
  return report;
}

void write_eigen_report(std::ostream& os, const PhysicalParams& params,
                        const GridShape& shape,
                        const std::vector<FourierMode>& modes,
                        FrequencyConvention conv, SymbolKind kind) {
  os << "i,j,xi_x,xi_y,re_l2,im_l2,magnitude,frequency\n";
  const double denom =
      (conv == FrequencyConvention::Doubled ? M_PI : 2.0 * M_PI) * shape.dt;
  for (const auto& mode : modes) {
    for (int i = 0; i < shape.h; ++i) {
      for (int j = 0; j < shape.w; ++j) {
        LocalParams lp{params.c.at(i, j), params.kp.at(i, j),
                       params.ko.at(i, j), shape.dt};
        auto eigs = eigenvalues_exact(lp, mode, shape.dx, kind);
        const Complex l2 = eigs[1];
        os << i << "," << j << "," << mode.xi_x << "," << mode.xi_y << ","
           << l2.real() << "," << l2.imag() << "," << std::abs(l2) << ","
           << std::atan2(l2.imag(), l2.real()) / denom << "\n";
      }
    }
  }
}

}  // namespace biooss
