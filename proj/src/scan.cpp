#include "biooss/scan.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstdio>
#include <mutex>
#include <utility>

#include "fftw_planning.hpp"

namespace biooss {

ScanElement scan_identity(std::size_t d) {
  ScanElement e;
  e.a.assign(d, Complex(1.0, 0.0));
  e.b.assign(d, Complex(0.0, 0.0));
  return e;
}

ScanElement combine(const ScanElement& x, const ScanElement& y) {
  if (x.a.size() != x.b.size() || y.a.size() != y.b.size() ||
      x.a.size() != y.a.size()) {
    throw DimensionError("combine: scan element lengths differ");
  }
  ScanElement out;
  const std::size_t d = x.a.size();
  out.a.resize(d);
  out.b.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    out.a[k] = y.a[k] * x.a[k];
    out.b[k] = y.a[k] * x.b[k] + y.b[k];
  }
  return out;
}

std::vector<ScanElement> sequential_prefix(
    const std::vector<ScanElement>& elems) {
  if (elems.empty()) {
    throw DimensionError("sequential_prefix: need at least one element");
  }
  std::vector<ScanElement> out;
  out.reserve(elems.size());
  out.push_back(elems[0]);
  for (std::size_t k = 1; k < elems.size(); ++k) {
    out.push_back(combine(out.back(), elems[k]));
  }
  return out;
}

namespace {

// Canonical schedule: combine adjacent pairs, scan the halved sequence,
// then expand. Every combine has a fixed position in this recursion, so the
// result is bitwise independent of how a future runtime might order the
// independent combines within one level.
void scan_in_place(std::vector<ScanElement>& v, ScanStats& st,
                   std::size_t level) {
  const std::size_t n = v.size();
  st.depth = std::max(st.depth, level);
  if (n == 1) return;

  std::vector<ScanElement> pairs;
  pairs.reserve(n / 2);
  for (std::size_t i = 0; 2 * i + 1 < n; ++i) {
    pairs.push_back(combine(v[2 * i], v[2 * i + 1]));
    ++st.combines;
  }
  scan_in_place(pairs, st, level + 1);

  // pairs[i] now holds the prefix through element 2i+1. Odd slots take it
  // directly; even slots (first excluded) extend the previous pair prefix
  // by their own original element, which is still untouched.
  for (std::size_t i = 1; 2 * i < n; ++i) {
    v[2 * i] = combine(pairs[i - 1], v[2 * i]);
    ++st.combines;
  }
  for (std::size_t i = 0; 2 * i + 1 < n; ++i) v[2 * i + 1] = std::move(pairs[i]);
}

}  // namespace

std::vector<ScanElement> parallel_scan(const std::vector<ScanElement>& elems,
                                       ScanStats* stats) {
  if (elems.empty()) {
    throw DimensionError("parallel_scan: need at least one element");
  }
  std::vector<ScanElement> out = elems;
  ScanStats local;
  scan_in_place(out, local, 0);
  if (stats != nullptr) *stats = local;
  return out;
}

// RAII wrapper around one pair of full complex 2D transforms. Buffers are
// reused across calls; the object is not safe for concurrent use.
struct DiagonalizedSystem::FftEngine {
  int h;
  int w;
  fftw_complex* in;
  fftw_complex* out;
  fftw_plan fwd;
  fftw_plan bwd;

  FftEngine(int h_, int w_) : h(h_), w(w_) {
    in = fftw_alloc_complex(static_cast<std::size_t>(h) * w);
    out = fftw_alloc_complex(static_cast<std::size_t>(h) * w);
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd = fftw_plan_dft_2d(h, w, in, out, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_2d(h, w, in, out, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftEngine() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(in);
    fftw_free(out);
  }

  std::vector<Complex> forward(const Field& f) {
    const std::size_t n = static_cast<std::size_t>(h) * w;
    for (std::size_t k = 0; k < n; ++k) {
      in[k][0] = f.a[k];
      in[k][1] = 0.0;
    }
    fftw_execute(fwd);
    std::vector<Complex> spec(n);
    for (std::size_t k = 0; k < n; ++k) spec[k] = Complex(out[k][0], out[k][1]);
    return spec;
  }

  // Real part of the unitary-normalized inverse transform.
  Field inverse_real(const std::vector<Complex>& spec) {
    const std::size_t n = static_cast<std::size_t>(h) * w;
    for (std::size_t k = 0; k < n; ++k) {
      in[k][0] = spec[k].real();
      in[k][1] = spec[k].imag();
    }
    fftw_execute(bwd);
    Field f(h, w);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) f.a[k] = out[k][0] * scale;
    return f;
  }
};

DiagonalizedSystem::DiagonalizedSystem(const PhysicalParams& params,
                                       const GridShape& shape,
                                       BoundaryCondition bc)
    : shape_(shape) {
  shape.validate();
  params.validate(shape);
  if (bc != BoundaryCondition::Periodic) {
    throw DomainError(
        "DiagonalizedSystem: the scan path requires the periodic boundary; "
        "use sequential stepping for zero-padded grids");
  }
  for (std::size_t n = 1; n < params.c.a.size(); ++n) {
    if (params.c.a[n] != params.c.a[0] || params.kp.a[n] != params.kp.a[0] ||
        params.ko.a[n] != params.ko.a[0]) {
      throw DomainError(
          "DiagonalizedSystem: Fourier diagonalization needs uniform "
          "parameters, but the fields vary across cells");
    }
  }
  lp_ = LocalParams{params.c.a[0], params.kp.a[0], params.ko.a[0], shape.dt};

  const auto modes = grid_modes(shape);
  const std::size_t n_modes = modes.size();
  lambda_diag_.assign(3 * n_modes, Complex(0.0, 0.0));
  p_blocks_.resize(n_modes);
  pinv_blocks_.resize(n_modes);
  mode_matrices_.resize(n_modes);
  is_degenerate_.assign(n_modes, false);

  for (std::size_t m = 0; m < n_modes; ++m) {
    mode_matrices_[m] =
        mode_matrix(lp_, modes[m], shape.dx, SymbolKind::Stencil);
    auto eigs =
        eigenvalues_exact(lp_, modes[m], shape.dx, SymbolKind::Stencil);
    for (int j = 0; j < 3; ++j) {
      max_eig_magnitude_ = std::max(max_eig_magnitude_, std::abs(eigs[j]));
    }
    try {
      EigenTriple t = eigenvectors(lp_, modes[m], shape.dx,
                                   SymbolKind::Stencil);
      lambda_diag_[3 * m + 0] = t.lambda1;
      lambda_diag_[3 * m + 1] = t.lambda2;
      lambda_diag_[3 * m + 2] = t.lambda3;
      p_blocks_[m] = t.p;
      pinv_blocks_[m] = t.pinv;
    } catch (const DegeneracyError&) {
      is_degenerate_[m] = true;
      degenerate_modes_.push_back(m);
      p_blocks_[m] = Matrix3c::Identity();
      pinv_blocks_[m] = Matrix3c::Identity();
      for (int j = 0; j < 3; ++j) lambda_diag_[3 * m + j] = eigs[j];
    }
  }

  stable_ = max_eig_magnitude_ <= 1.0 + 1e-12;
  if (!stable_) {
    std::fprintf(stderr,
                 "warning: diagonalized system has eigenvalue magnitude "
                 "%.6f > 1; runs will grow\n",
                 max_eig_magnitude_);
  }
  fft_ = std::make_unique<FftEngine>(shape.h, shape.w);
}

DiagonalizedSystem::~DiagonalizedSystem() = default;

std::vector<Complex> DiagonalizedSystem::state_to_coefficients(
    const GridState& x) const {
  require_shape(x.p, shape_, "state.p");
  require_shape(x.ox, shape_, "state.ox");
  require_shape(x.oy, shape_, "state.oy");
  auto sp = fft_->forward(x.p);
  auto sx = fft_->forward(x.ox);
  auto sy = fft_->forward(x.oy);
  std::vector<Complex> w(dim());
  for (std::size_t m = 0; m < sp.size(); ++m) {
    Vector3c z;
    z << sp[m], sx[m], sy[m];
    if (is_degenerate_[m]) {
      for (int j = 0; j < 3; ++j) w[3 * m + j] = z(j);
    } else {
      Vector3c c = pinv_blocks_[m] * z;
      for (int j = 0; j < 3; ++j) w[3 * m + j] = c(j);
    }
  }
  return w;
}

GridState DiagonalizedSystem::coefficients_to_state(
    const std::vector<Complex>& w) const {
  if (w.size() != dim()) {
    throw DimensionError("coefficients_to_state: wrong coefficient count");
  }
  const std::size_t n_modes = dim() / 3;
  std::vector<Complex> sp(n_modes), sx(n_modes), sy(n_modes);
  for (std::size_t m = 0; m < n_modes; ++m) {
    Vector3c c;
    c << w[3 * m + 0], w[3 * m + 1], w[3 * m + 2];
    Vector3c z = is_degenerate_[m] ? c : Vector3c(p_blocks_[m] * c);
    sp[m] = z(0);
    sx[m] = z(1);
    sy[m] = z(2);
  }
  GridState out(shape_);
  out.p = fft_->inverse_real(sp);
  out.ox = fft_->inverse_real(sx);
  out.oy = fft_->inverse_real(sy);
  return out;
}

// Fourier transform of the damped pressure forcing alpha dt drive; the
// full per-mode forcing vector is (value, 0, 0).
std::vector<Complex> DiagonalizedSystem::fourier_forcing(
    const Field& drive) const {
  require_shape(drive, shape_, "drive");
  auto spec = fft_->forward(drive);
  const double scale = lp_.alpha() * shape_.dt;
  for (auto& v : spec) v *= scale;
  return spec;
}

std::vector<std::vector<Complex>> run_recurrence_coefficients(
    const DiagonalizedSystem& sys, const GridState& x0,
    const std::vector<Field>& drives) {
  const std::size_t t_steps = drives.size();
  const std::size_t d = sys.dim();
  const std::size_t n_modes = d / 3;
  std::vector<Complex> w0 = sys.state_to_coefficients(x0);

  // Per-step forcing spectra, kept for the dense degenerate recursion.
  std::vector<std::vector<Complex>> forcing;
  forcing.reserve(t_steps);
  for (const Field& drive : drives) forcing.push_back(sys.fourier_forcing(drive));

  std::vector<ScanElement> elems;
  elems.reserve(t_steps);
  for (std::size_t n = 0; n < t_steps; ++n) {
    ScanElement e;
    e.a.assign(d, Complex(1.0, 0.0));
    e.b.assign(d, Complex(0.0, 0.0));
    for (std::size_t m = 0; m < n_modes; ++m) {
      if (sys.is_degenerate_[m]) continue;  // advanced densely below
      for (int j = 0; j < 3; ++j) {
        e.a[3 * m + j] = sys.lambda_diag_[3 * m + j];
        e.b[3 * m + j] = forcing[n][m] * sys.pinv_blocks_[m](j, 0);
      }
    }
    elems.push_back(std::move(e));
  }
  std::vector<ScanElement> prefixes = parallel_scan(elems);

  std::vector<std::vector<Complex>> out(t_steps);
  for (std::size_t n = 0; n < t_steps; ++n) {
    out[n].resize(d);
    for (std::size_t k = 0; k < d; ++k) {
      out[n][k] = prefixes[n].a[k] * w0[k] + prefixes[n].b[k];
    }
  }
  for (std::size_t m : sys.degenerate_modes_) {
    Vector3c z;
    z << w0[3 * m + 0], w0[3 * m + 1], w0[3 * m + 2];
    for (std::size_t n = 0; n < t_steps; ++n) {
      z = sys.mode_matrices_[m] * z;
      z(0) += forcing[n][m];
      for (int j = 0; j < 3; ++j) out[n][3 * m + j] = z(j);
    }
  }
  return out;
}

std::vector<GridState> run_recurrence_scan(const DiagonalizedSystem& sys,
                                           const GridState& x0,
                                           const std::vector<Field>& drives) {
  auto coeffs = run_recurrence_coefficients(sys, x0, drives);
  std::vector<GridState> out;
  out.reserve(coeffs.size());
  for (const auto& w : coeffs) out.push_back(sys.coefficients_to_state(w));
  return out;
}

std::vector<GridState> spectral_stepper_solution(
    const DiagonalizedSystem& sys, const GridState& x0,
    const std::vector<Field>& drives) {
  const std::size_t n_modes = sys.dim() / 3;
  auto sp = sys.fft_->forward(x0.p);
  auto sx = sys.fft_->forward(x0.ox);
  auto sy = sys.fft_->forward(x0.oy);

  std::vector<GridState> out;
  out.reserve(drives.size());
  for (const Field& drive : drives) {
    auto f = sys.fourier_forcing(drive);
    for (std::size_t m = 0; m < n_modes; ++m) {
      Vector3c z;
      z << sp[m], sx[m], sy[m];
      z = sys.mode_matrices_[m] * z;
      z(0) += f[m];
      sp[m] = z(0);
      sx[m] = z(1);
      sy[m] = z(2);
    }
    GridState state(sys.shape());
    state.p = sys.fft_->inverse_real(sp);
    state.ox = sys.fft_->inverse_real(sx);
    state.oy = sys.fft_->inverse_real(sy);
    out.push_back(std::move(state));
  }
  return out;
}

GridState unrolled_solution(const DiagonalizedSystem& sys,
                            const std::vector<Field>& drives, int n) {
  if (n < 1 || static_cast<std::size_t>(n) > drives.size()) {
    throw DimensionError("unrolled_solution: need 1 <= n <= drive count");
  }
  const std::size_t d = sys.dim();
  const std::size_t n_modes = d / 3;

  std::vector<std::vector<Complex>> forcing;
  forcing.reserve(n);
  for (int k = 0; k < n; ++k) {
    forcing.push_back(sys.fourier_forcing(drives[k]));
  }

  // Ascending powers: at offset k the term is Lambda^k Pinv f_{n-k}
  // (or the dense matrix power for degenerate modes).
  std::vector<Complex> w(d, Complex(0.0, 0.0));
  std::vector<Complex> lam_pow(d, Complex(1.0, 0.0));
  std::vector<Matrix3c> mat_pow(sys.degenerate_modes_.size(),
                                Matrix3c::Identity());
  for (int k = 0; k < n; ++k) {
    const auto& f = forcing[n - 1 - k];
    for (std::size_t m = 0; m < n_modes; ++m) {
      if (sys.is_degenerate_[m]) continue;
      for (int j = 0; j < 3; ++j) {
        w[3 * m + j] +=
            lam_pow[3 * m + j] * f[m] * sys.pinv_blocks_[m](j, 0);
        lam_pow[3 * m + j] *= sys.lambda_diag_[3 * m + j];
      }
    }
    for (std::size_t di = 0; di < sys.degenerate_modes_.size(); ++di) {
      const std::size_t m = sys.degenerate_modes_[di];
      Vector3c fv;
      fv << f[m], Complex(0.0, 0.0), Complex(0.0, 0.0);
      Vector3c term = mat_pow[di] * fv;
      for (int j = 0; j < 3; ++j) w[3 * m + j] += term(j);
      mat_pow[di] = sys.mode_matrices_[m] * mat_pow[di];
    }
  }
  return sys.coefficients_to_state(w);
}

}  // namespace biooss
