// Associative-scan evaluation of the diagonalized linear recurrence
// x_n = A x_{n-1} + f_n on a periodic grid: scan element algebra, a
// work-efficient parallel prefix, and the Fourier-space solution paths
// (eigen scan, per-step 3x3 stepper, direct unrolled sum) that serve as
// mutual oracles.
#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "biooss/grid.hpp"
#include "biooss/spectral.hpp"

namespace biooss {

// One step of the affine recurrence w -> a (.) w + b in diagonal
// coordinates, as a scan monoid element.
struct ScanElement {
  std::vector<Complex> a;
  std::vector<Complex> b;
};

// Two-sided identity (ones, zeros) of the combine monoid.
ScanElement scan_identity(std::size_t d);

// combine(x, y) = (y.a (.) x.a, y.a (.) x.b + y.b): composing "apply x,
// then y". The argument order is pinned by the requirement that an
// inclusive scan of step elements equals the sequential left fold.
ScanElement combine(const ScanElement& x, const ScanElement& y);

struct ScanStats {
  std::size_t combines = 0;
  std::size_t depth = 0;
};

// Inclusive prefix by plain left fold; the sequential oracle.
std::vector<ScanElement> sequential_prefix(
    const std::vector<ScanElement>& elems);

// Inclusive prefix by the recursive pair/expand tree: combine adjacent
// pairs, scan the half-length sequence, expand back. Work <= 2T - 2
// combines, depth O(log T), and a fixed combine order (the canonical
// schedule) regardless of any future threading of a tree level.
std::vector<ScanElement> parallel_scan(const std::vector<ScanElement>& elems,
                                       ScanStats* stats = nullptr);

// Eigen machinery of one uniform-parameter periodic grid, built once per
// sequence: per-mode stencil-symbol matrices, their eigendecompositions,
// and FFT plans. Modes whose eigenvalues coincide too closely for the
// eigenvector formulas (always at least the DC mode) are listed in
// degenerate_modes() and stepped densely by the solution paths.
//
// Construction throws DomainError for non-uniform parameters or a
// non-periodic boundary, where the Fourier diagonalization is invalid.
// Unstable eigenvalues do not throw: stable() turns false and one warning
// line goes to stderr, since deliberately exploding runs are legitimate.
class DiagonalizedSystem {
 public:
  DiagonalizedSystem(const PhysicalParams& params, const GridShape& shape,
                     BoundaryCondition bc);
  ~DiagonalizedSystem();
  DiagonalizedSystem(const DiagonalizedSystem&) = delete;
  DiagonalizedSystem& operator=(const DiagonalizedSystem&) = delete;

  const GridShape& shape() const { return shape_; }
  LocalParams local_params() const { return lp_; }
  std::size_t dim() const { return lambda_diag_.size(); }
  const std::vector<Complex>& lambda_diag() const { return lambda_diag_; }
  const std::vector<std::size_t>& degenerate_modes() const {
    return degenerate_modes_;
  }
  bool stable() const { return stable_; }
  double max_eig_magnitude() const { return max_eig_magnitude_; }

  // Coefficient layout: index 3*m + j for mode m (grid_modes order) and
  // eigen slot j (transverse, then the oscillatory pair). Degenerate modes
  // hold raw Fourier components (p, ox, oy) instead of eigen coordinates.
  std::vector<Complex> state_to_coefficients(const GridState& x) const;
  // Real part of the inverse transform; exact round trips need a
  // conjugate-symmetric coefficient set (any state_to_coefficients output).
  GridState coefficients_to_state(const std::vector<Complex>& w) const;

 private:
  friend std::vector<std::vector<Complex>> run_recurrence_coefficients(
      const DiagonalizedSystem&, const GridState&, const std::vector<Field>&);
  friend std::vector<GridState> spectral_stepper_solution(
      const DiagonalizedSystem&, const GridState&, const std::vector<Field>&);
  friend GridState unrolled_solution(const DiagonalizedSystem&,
                                     const std::vector<Field>&, int);

  struct FftEngine;

  std::vector<Complex> fourier_forcing(const Field& drive) const;

  GridShape shape_;
  LocalParams lp_;
  std::vector<Complex> lambda_diag_;
  std::vector<Matrix3c> p_blocks_;
  std::vector<Matrix3c> pinv_blocks_;
  std::vector<Matrix3c> mode_matrices_;  // stencil symbols, for dense paths
  std::vector<std::size_t> degenerate_modes_;
  std::vector<bool> is_degenerate_;
  bool stable_ = true;
  double max_eig_magnitude_ = 0.0;
  std::unique_ptr<FftEngine> fft_;
};

// Full solution path: drives to Fourier forcing, eigen coordinates, one
// parallel scan over the sequence, x0 folded in, back through P and the
// inverse transform. Degenerate modes advance by dense per-step 3x3
// multiplies and merge before the inverse transform. Returns all T states.
std::vector<GridState> run_recurrence_scan(const DiagonalizedSystem& sys,
                                           const GridState& x0,
                                           const std::vector<Field>& drives);

// Same evaluation, stopping in coefficient space (one length-D vector per
// step, layout as in state_to_coefficients).
std::vector<std::vector<Complex>> run_recurrence_coefficients(
    const DiagonalizedSystem& sys, const GridState& x0,
    const std::vector<Field>& drives);

// Independent oracle path: every mode advances by its dense 3x3 stencil
// symbol each step (no eigendecomposition anywhere).
std::vector<GridState> spectral_stepper_solution(
    const DiagonalizedSystem& sys, const GridState& x0,
    const std::vector<Field>& drives);

// Direct evaluation of the unrolled sum over powers,
// sum_{k=0}^{n-1} P Lambda^k Pinv f_{n-k}, from a zero initial state.
// O(n D) per query; a test oracle, not a production path. 1 <= n <= T.
GridState unrolled_solution(const DiagonalizedSystem& sys,
                            const std::vector<Field>& drives, int n);

}  // namespace biooss
