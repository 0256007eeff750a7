// Fourier-space eigenanalysis of the damped-wave update: per-mode 3x3
// matrices, closed-form eigenvalues/eigenvectors, the generalized CFL
// stability bound and checker, phase-to-frequency maps, and band-targeted
// wave-speed initialization.
//
// Two operator symbols coexist deliberately:
//  * the continuum symbol (gradient ~ i xi), the form used by the analysis
//    the update operator is usually presented with, and
//  * the discrete stencil symbol g = (1 - exp(-i xi dx))/dx of the actual
//    one-sided differences, which diagonalizes the periodic stepper exactly.
// fourier_symbol_check quantifies the gap between the two.
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <iosfwd>
#include <optional>
#include <vector>

#include "biooss/grid.hpp"

namespace biooss {

using Complex = std::complex<double>;
using Matrix3c = Eigen::Matrix3cd;
using Vector3c = Eigen::Vector3cd;

struct FourierMode {
  double xi_x = 0.0;  // spatial angular frequency, radians per grid unit
  double xi_y = 0.0;
};

// Parameter values at a single grid point.
struct LocalParams {
  double c = 0.0;
  double kp = 0.0;
  double ko = 0.0;
  double dt = 0.0;

  void validate() const;
  double alpha() const { return 1.0 / (1.0 + dt * kp); }
  double beta() const { return 1.0 / (1.0 + dt * ko); }
};

// Which operator symbol the analysis uses.
enum class SymbolKind {
  Continuum,  // gradient ~ i xi, divergence ~ i xi (no dt^2 correction term)
  Stencil,    // exact symbols of the one-sided differences on the grid
};

struct EigenTriple {
  Complex lambda1;  // always the decoupled transverse value beta
  Complex lambda2;
  Complex lambda3;
  Matrix3c p;       // columns v1, v2, v3
  Matrix3c pinv;
};

struct StabilityViolation {
  int i = 0;
  int j = 0;
  double c_actual = 0.0;
  double c_max = 0.0;
};

struct StabilityReport {
  Field max_c_allowed;                       // per-cell generalized CFL bound
  std::vector<StabilityViolation> violations;
  double worst_eig_magnitude = 0.0;

  bool ok() const { return violations.empty(); }
};

// All discrete angular-frequency pairs of a periodic H x W grid. xi_x spans
// the row axis: xi_x = 2 pi m / (H dx), m in {-floor(H/2), ..., ceil(H/2)-1},
// and xi_y the column axis with W points. Order matches FFT bin layout
// (row-major over unshifted bin indices).
std::vector<FourierMode> grid_modes(const GridShape& shape);

// The 3x3 one-mode update matrix. SymbolKind::Continuum reproduces the
// analytical form
//   [ alpha,            -alpha c^2 dt i xi_x, -alpha c^2 dt i xi_y ]
//   [ -beta dt i xi_x,   beta,                 0                   ]
//   [ -beta dt i xi_y,   0,                    beta                ]
// while SymbolKind::Stencil is the exact symbol of one step, including the
// dt^2 self-coupling the continuum form drops.
Matrix3c mode_matrix(const LocalParams& lp, const FourierMode& mode,
                     double dx = 1.0,
                     SymbolKind kind = SymbolKind::Continuum);

// Exact eigenvalues: lambda1 = beta, lambda2/3 roots of the factored
// quadratic. Continuum: lambda^2 - (alpha+beta) lambda
//                         + alpha beta (1 + c^2 dt^2 |xi|^2) = 0.
// Stencil:   lambda^2 - (alpha+beta - alpha c^2 dt^2 s^2) lambda
//                         + alpha beta = 0, s^2 = |g_x|^2 + |g_y|^2.
// Computed with the cancellation-safe q-form of the quadratic formula.
std::array<Complex, 3> eigenvalues_exact(
    const LocalParams& lp, const FourierMode& mode, double dx = 1.0,
    SymbolKind kind = SymbolKind::Continuum);

// The complex-pair closed form (alpha+beta)/2 +- i c dt |xi| sqrt(alpha beta)
// (continuum symbol only). Throws DomainError when the true discriminant is
// non-negative, where the conjugate-pair form does not apply.
std::array<Complex, 2> eigenvalues_paper_approx(const LocalParams& lp,
                                                const FourierMode& mode);

// Eigenvector matrix P = [v1 v2 v3] and its inverse. Throws DegeneracyError
// when lambda2 or lambda3 falls within 1e-12 of lambda1, or when the
// oscillatory pair itself collapses (callers must step such modes densely).
EigenTriple eigenvectors(const LocalParams& lp, const FourierMode& mode,
                         double dx = 1.0,
                         SymbolKind kind = SymbolKind::Continuum);

// Generalized CFL bound per cell: c_max = (dx/dt) sqrt((1+dt kp)(1+dt ko))/sqrt(2).
Field stability_bound(const PhysicalParams& params, const GridShape& shape);
double stability_bound(double kp, double ko, double dt, double dx);

// Largest wave speed for which the stencil stepper is a strict contraction
// on the periodic grid: the most restrictive mode is the corner mode
// s^2 = 8/dx^2, where the real eigenvalue branch reaches -1 at
// c^2 dt^2 s^2 = (1+alpha)(1+beta)/alpha. Slightly tighter than the
// generalized CFL bound for damped parameters.
double contraction_bound(double kp, double ko, double dt, double dx);

// Evaluates the per-cell worst eigenvalue magnitude over the grid's mode set
// and reports cells whose wave speed exceeds the generalized CFL bound.
// worst_eig_magnitude is max over cells of max(alpha, beta, c/c_max): the
// first two are the exact DC-mode magnitudes, the third is the wave-branch
// magnitude c dt |xi| sqrt(alpha beta) evaluated at the bound's resolvable
// cap |xi| = sqrt(2)/dx, so violations are empty iff the worst magnitude
// stays at or below one.
StabilityReport check_stability(const PhysicalParams& params,
                                const GridShape& shape);

// Which closed form supplies the eigenvalue phase.
enum class PhaseModel { Exact, PairApprox };
// How phase converts to a frequency: Doubled is the f = theta/(pi dt)
// convention of the phase map ("half revolution = sampling frequency");
// Physical is f = theta/(2 pi dt), the frequency an FFT of the time trace
// reports. The two differ by exactly a factor of two.
enum class FrequencyConvention { Doubled, Physical };

// Per-cell frequency of the oscillatory eigenpair at `mode`.
Field frequency_map(const PhysicalParams& params, const GridShape& shape,
                    const FourierMode& mode,
                    PhaseModel phase = PhaseModel::Exact,
                    FrequencyConvention conv = FrequencyConvention::Doubled,
                    SymbolKind kind = SymbolKind::Continuum);

// Reference-mode policy for init_for_band. Each policy fixes the anchor
// mode, the phase model inverted, and the frequency convention of the band
// argument:
//  * Fundamental: |m| = 1 in both axes, pair-approx phase, Doubled units.
//  * RmsMode: root-mean-square mode of the grid, pair-approx, Doubled.
//  * StencilEdge: the stencil corner mode s = 2 sqrt(2)/dx, exact stencil
//    phase, Physical units; the policy used by the resonance experiments,
//    chosen so measured FFT dominants land in the requested band.
enum class ModePolicy { Fundamental, RmsMode, StencilEdge };

struct BandInitResult {
  double c = 0.0;
  bool clamped = false;       // true when the stability bound truncated c
  double achieved_f = 0.0;    // frequency at the reference mode for final c,
                              // in the policy's own convention
};

// Solves the phase relation at the policy's reference mode for the wave
// speed that puts the mode's frequency at the band midpoint, then clamps to
// the stability bound. Throws InfeasibleBandError when even the clamped
// speed cannot reach f_lo, and DomainError when the band violates
// 0 <= f_lo < f_hi < 1/(2 dt).
BandInitResult init_for_band(double f_lo, double f_hi, double kp, double ko,
                             double dt, double dx, const GridShape& shape,
                             ModePolicy policy);

// Quantifies the continuum-vs-stencil symbol gap as the magnitude shortfall
// 1 - |g(xi)| / |xi| along a 1D axis sweep, plus its max over the grid's 2D
// mode set. Grows monotonically from 0 at DC to 1 - 2/pi at xi = pi/dx.
struct SymbolCheckRow {
  double xi = 0.0;
  double relative_deviation = 0.0;
};
struct SymbolCheckReport {
  std::vector<SymbolCheckRow> axis_sweep;  // ascending xi > 0
  double max_relative_deviation = 0.0;     // over all 2D grid modes
};
SymbolCheckReport fourier_symbol_check(const GridShape& shape);

// Eigen report row, one per (cell, mode) pair requested by the CLI:
// CSV columns (i, j, xi_x, xi_y, re_l2, im_l2, magnitude, frequency).
// With the stencil symbol, magnitudes of a stable configuration stay at or
// below one at every mode; the continuum symbol has no such cap.
void write_eigen_report(std::ostream& os, const PhysicalParams& params,
                        const GridShape& shape,
                        const std::vector<FourierMode>& modes,
                        FrequencyConvention conv = FrequencyConvention::Doubled,
                        SymbolKind kind = SymbolKind::Continuum);

}  // namespace biooss
