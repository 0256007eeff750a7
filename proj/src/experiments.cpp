// Quadrant resonance experiment, tone-discrimination task generator, and
// patch-structured input maps.
#include "biooss/experiments.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "biooss/artifacts.hpp"
#include "biooss/common.hpp"
#include "biooss/rng.hpp"
#include "biooss/signals.hpp"
#include "biooss/spectral.hpp"

namespace biooss {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Row/column extent of quadrant q (0..3, row-major): top-left, top-right,
// bottom-left, bottom-right.
struct QuadrantRect {
  int i_begin, i_end, j_begin, j_end;
};

QuadrantRect quadrant_rect(const GridShape& shape, int q) {
  const int qh = shape.h / 2;
  const int qw = shape.w / 2;
  const int r0 = (q / 2) * qh;
  const int c0 = (q % 2) * qw;
  return {r0, r0 + qh, c0, c0 + qw};
}

// Rademacher sign field sharpened by repeated discrete Laplacians and
// RMS-normalized. High Laplacian orders weight the texture's spectrum
// toward the stencil-edge mode that the band-targeted initialization
// anchors, so each quadrant receives usable drive power at its resonance.
Field drive_texture(const GridShape& shape, std::uint64_t seed, int order) {
  Rng rng(seed, "experiments/quadrant-texture");
  Field tex(shape.h, shape.w);
  for (double& v : tex.a) {
    v = rng.rademacher();
  }
  Field gx(shape.h, shape.w), gy(shape.h, shape.w);
  Field next(shape.h, shape.w);
  for (int pass = 0; pass < order; ++pass) {
    gradient(tex, shape, BoundaryCondition::ZeroPad, gx, gy);
    divergence(gx, gy, shape, BoundaryCondition::ZeroPad, next);
    std::swap(tex.a, next.a);
  }
  double sq = 0.0;
  for (double v : tex.a) {
    sq += v * v;
  }
  const double rms = std::sqrt(sq / static_cast<double>(tex.a.size()));
  if (!(rms > 0.0) || !is_finite(rms)) {
    throw DegeneracyError("drive texture vanished after " +
                          std::to_string(order) + " Laplacian passes");
  }
  for (double& v : tex.a) {
    v /= rms;
  }
  return tex;
}

}  // namespace

void QuadrantConfig::validate() const {
  shape.validate();
  if (shape.h % 2 != 0 || shape.w % 2 != 0) {
    throw DimensionError("quadrant grid needs even dimensions, got " +
                         std::to_string(shape.h) + "x" +
                         std::to_string(shape.w));
  }
  if (interior_margin < 0) {
    throw DomainError("interior margin must be >= 0");
  }
  if (shape.h / 2 - 2 * interior_margin < 1 ||
      shape.w / 2 - 2 * interior_margin < 1) {
    throw DomainError("interior margin " + std::to_string(interior_margin) +
                      " leaves no interior cells in a " +
                      std::to_string(shape.h / 2) + "x" +
                      std::to_string(shape.w / 2) + " quadrant");
  }
  if (t_steps < 16) {
    throw DomainError(
        "quadrant experiment needs at least 16 steps for spectral "
        "analysis, got " +
        std::to_string(t_steps));
  }
  if (!(kp > 0.0) || !(ko > 0.0) || !is_finite(kp) || !is_finite(ko)) {
    throw DomainError("damping rates must be positive and finite");
  }
  if (!(amplitude > 0.0) || !is_finite(amplitude)) {
    throw DomainError("drive amplitude must be positive and finite");
  }
  if (texture_order < 0) {
    throw DomainError("texture order must be >= 0");
  }
  BandedNoiseSpec noise;
  noise.f_lo = input_band.f_lo;
  noise.f_hi = input_band.f_hi;
  noise.t_steps = t_steps;
  noise.dt = shape.dt;
  noise.amplitude = amplitude;
  noise.validate();
}

SpectralSummary quadrant_experiment(const QuadrantConfig& config) {
  config.validate();
  const GridShape& shape = config.shape;
  const int h = shape.h;
  const int w = shape.w;
  const std::size_t cells = static_cast<std::size_t>(shape.cells());
  const std::size_t t = config.t_steps;

  SpectralSummary summary;
  summary.config = config;

  // Per-quadrant wave speed from the band-targeted initialization.
  PhysicalParams params(shape);
  for (int q = 0; q < 4; ++q) {
    const BandInitResult init = init_for_band(
        config.bands[q].f_lo, config.bands[q].f_hi, config.kp, config.ko,
        shape.dt, shape.dx, shape, ModePolicy::StencilEdge);
    summary.wave_speed[q] = init.c;
    const QuadrantRect rect = quadrant_rect(shape, q);
    for (int i = rect.i_begin; i < rect.i_end; ++i) {
      for (int j = rect.j_begin; j < rect.j_end; ++j) {
        params.c.at(i, j) = init.c;
        params.kp.at(i, j) = config.kp;
        params.ko.at(i, j) = config.ko;
      }
    }
  }
  params.validate(shape);

  // Shared drive: one banded noise signal times a fixed spatial texture.
  BandedNoiseSpec noise;
  noise.f_lo = config.input_band.f_lo;
  noise.f_hi = config.input_band.f_hi;
  noise.t_steps = t;
  noise.dt = shape.dt;
  noise.seed = config.seed;
  noise.amplitude = config.amplitude;
  const std::vector<double> signal = banded_white_noise(noise);
  const Field texture =
      drive_texture(shape, config.seed, config.texture_order);

  // Integrate, storing the pressure trace cell-major for per-cell FFTs.
  std::vector<double> traces(cells * t);
  GridState state(shape);
  StepWorkspace ws(shape);
  Field drive(h, w);
  for (std::size_t n = 0; n < t; ++n) {
    for (std::size_t i = 0; i < cells; ++i) {
      drive.a[i] = texture.a[i] * signal[n];
    }
    step_in_place(state, params, drive, shape, BoundaryCondition::ZeroPad, ws);
    double sum = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
      const double v = state.p.a[i];
      traces[i * t + n] = v;
      sum += v;
    }
    if (!is_finite(sum)) {
      throw NumericError("pressure field left the finite range",
                         static_cast<long>(n));
    }
  }
  summary.final_p = state.p;

  // Per-cell dominant frequency.
  summary.dominant_frequency = Field(h, w);
  std::vector<double> cell_trace(t);
  for (std::size_t i = 0; i < cells; ++i) {
    cell_trace.assign(traces.begin() + static_cast<std::ptrdiff_t>(i * t),
                      traces.begin() + static_cast<std::ptrdiff_t>((i + 1) * t));
    summary.dominant_frequency.a[i] = dominant_frequency(cell_trace, shape.dt);
  }

  // Probe spectra and late traces at the quadrant centers.
  const std::size_t tail = t < 200 ? t : std::size_t{200};
  for (int q = 0; q < 4; ++q) {
    const QuadrantRect rect = quadrant_rect(shape, q);
    const int pi = rect.i_begin + (rect.i_end - rect.i_begin) / 2;
    const int pj = rect.j_begin + (rect.j_end - rect.j_begin) / 2;
    summary.probe_points.emplace_back(pi, pj);
    const std::size_t cell = static_cast<std::size_t>(pi) * w + pj;
    cell_trace.assign(traces.begin() + static_cast<std::ptrdiff_t>(cell * t),
                      traces.begin() + static_cast<std::ptrdiff_t>((cell + 1) * t));
    summary.power_spectra.push_back(tapered_periodogram(cell_trace));
    summary.probe_traces.emplace_back(cell_trace.end() - static_cast<std::ptrdiff_t>(tail),
                                      cell_trace.end());
  }

  // Interior statistics per quadrant.
  const int margin = config.interior_margin;
  for (int q = 0; q < 4; ++q) {
    const QuadrantRect rect = quadrant_rect(shape, q);
    double mean = 0.0;
    double inside = 0.0;
    double count = 0.0;
    for (int i = rect.i_begin + margin; i < rect.i_end - margin; ++i) {
      for (int j = rect.j_begin + margin; j < rect.j_end - margin; ++j) {
        const double f = summary.dominant_frequency.at(i, j);
        mean += f;
        inside += (f > config.bands[q].f_lo && f < config.bands[q].f_hi)
                      ? 1.0
                      : 0.0;
        count += 1.0;
      }
    }
    summary.quadrant_mean[q] = mean / count;
    summary.in_band_fraction[q] = inside / count;
  }
  return summary;
}

void write_quadrant_outputs(const SpectralSummary& summary,
                            const std::string& dir,
                            const std::string& run_id) {
  const Field& dom = summary.dominant_frequency;
  const int h = dom.h;
  const int w = dom.w;
  const double dt = summary.config.shape.dt;
  const std::size_t t = summary.config.t_steps;
  const std::size_t probes = summary.probe_points.size();

  std::vector<std::vector<double>> rows;
  rows.reserve(dom.a.size());
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      rows.push_back({static_cast<double>(i), static_cast<double>(j),
                      dom.at(i, j)});
    }
  }
  write_csv(artifact_path(dir, run_id, "dominant_freq.csv"), {"i", "j", "f"},
            rows);

  std::vector<std::string> spec_header = {"frequency"};
  for (std::size_t k = 0; k < probes; ++k) {
    spec_header.push_back("probe" + std::to_string(k));
  }
  rows.clear();
  const std::size_t bins = probes ? summary.power_spectra[0].size() : 0;
  for (std::size_t b = 0; b < bins; ++b) {
    std::vector<double> row;
    row.reserve(probes + 1);
    row.push_back(static_cast<double>(b) / (static_cast<double>(t) * dt));
    for (std::size_t k = 0; k < probes; ++k) {
      row.push_back(summary.power_spectra[k][b]);
    }
    rows.push_back(std::move(row));
  }
  write_csv(artifact_path(dir, run_id, "spectra.csv"), spec_header, rows);

  std::vector<std::string> trace_header = {"step"};
  for (std::size_t k = 0; k < probes; ++k) {
    trace_header.push_back("probe" + std::to_string(k));
  }
  rows.clear();
  const std::size_t tail = probes ? summary.probe_traces[0].size() : 0;
  for (std::size_t n = 0; n < tail; ++n) {
    std::vector<double> row;
    row.reserve(probes + 1);
    row.push_back(static_cast<double>(t - tail + n));
    for (std::size_t k = 0; k < probes; ++k) {
      row.push_back(summary.probe_traces[k][n]);
    }
    rows.push_back(std::move(row));
  }
  write_csv(artifact_path(dir, run_id, "trace_last200.csv"), trace_header,
            rows);

  rows.clear();
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      rows.push_back({static_cast<double>(i), static_cast<double>(j),
                      summary.final_p.at(i, j)});
    }
  }
  write_csv(artifact_path(dir, run_id, "p_final.csv"), {"i", "j", "p"}, rows);

  // Heatmaps: dominant frequency over [0, Nyquist]; final pressure over a
  // symmetric range so zero is mid-gray.
  const double nyquist = 0.5 / dt;
  const auto dom_px = quantize_gray(dom, 0.0, nyquist);
  write_pgm(artifact_path(dir, run_id, "dominant_freq.pgm"), h, w, dom_px);
  write_png_gray8(artifact_path(dir, run_id, "dominant_freq.png"), h, w,
                  dom_px);
  double mag = 0.0;
  for (double v : summary.final_p.a) {
    mag = std::max(mag, std::abs(v));
  }
  const auto p_px = quantize_gray(summary.final_p, -mag, mag);
  write_pgm(artifact_path(dir, run_id, "p_final.pgm"), h, w, p_px);
  write_png_gray8(artifact_path(dir, run_id, "p_final.png"), h, w, p_px);
}

Batch make_frequency_discrimination_task(const std::vector<double>& tones_hz,
                                         double noise_sigma, int n_per_class,
                                         std::size_t t_steps, double dt,
                                         std::uint64_t seed) {
  if (tones_hz.size() < 2) {
    throw DomainError("tone task needs at least two classes, got " +
                      std::to_string(tones_hz.size()));
  }
  if (!(dt > 0.0) || !is_finite(dt)) {
    throw DomainError("tone task sample spacing must be positive");
  }
  const double nyquist = 0.5 / dt;
  for (double f : tones_hz) {
    if (!is_finite(f) || f < 0.0 || f >= nyquist) {
      throw DomainError("tone " + std::to_string(f) +
                        " must lie in [0, " + std::to_string(nyquist) +
                        ") for dt = " + std::to_string(dt));
    }
  }
  if (!(noise_sigma >= 0.0) || !is_finite(noise_sigma)) {
    throw DomainError("noise sigma must be finite and >= 0");
  }
  if (n_per_class < 1) {
    throw DomainError("need at least one item per class");
  }
  if (t_steps < 1) {
    throw DomainError("tone task needs at least one step");
  }

  Rng rng(seed, "experiments/tone-task");
  const int k = static_cast<int>(tones_hz.size());
  Batch batch;
  batch.task = TaskKind::Classify;
  const std::size_t items = static_cast<std::size_t>(k) * n_per_class;
  batch.inputs.reserve(items);
  batch.labels.reserve(items);
  for (std::size_t i = 0; i < items; ++i) {
    const int label = static_cast<int>(i % k);
    const double f = tones_hz[static_cast<std::size_t>(label)];
    const double phase = rng.uniform(0.0, 2.0 * kPi);
    Sequence seq;
    seq.values.reserve(t_steps);
    for (std::size_t n = 0; n < t_steps; ++n) {
      Eigen::VectorXd v(1);
      v[0] = std::sin(2.0 * kPi * f * static_cast<double>(n) * dt + phase) +
             noise_sigma * rng.normal();
      seq.values.push_back(std::move(v));
    }
    batch.inputs.push_back(std::move(seq));
    batch.labels.push_back(label);
  }
  return batch;
}

Eigen::MatrixXd patch_input_map(int m, const GridShape& shape,
                                int patch_size) {
  shape.validate();
  if (patch_size != 7 && patch_size != 8) {
    throw DomainError("patch size must be 7 or 8 cells, got " +
                      std::to_string(patch_size));
  }
  if (m < 1) {
    throw DomainError("input dimension must be >= 1");
  }
  const long hw = static_cast<long>(shape.cells());
  if (static_cast<long>(m) * patch_size > hw) {
    throw CapacityError("patch map needs " +
                        std::to_string(static_cast<long>(m) * patch_size) +
                        " cells but the grid has " + std::to_string(hw));
  }
  // Patches are 2x4 tiles placed left to right, top to bottom.
  const int tiles_per_row = shape.w / 4;
  const int tile_rows = shape.h / 2;
  if (static_cast<long>(tiles_per_row) * tile_rows < m) {
    throw CapacityError("grid fits " +
                        std::to_string(static_cast<long>(tiles_per_row) *
                                       tile_rows) +
                        " disjoint 2x4 patches but " + std::to_string(m) +
                        " are needed");
  }
  Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(hw, m);
  for (int j = 0; j < m; ++j) {
    const int tile_r = j / tiles_per_row;
    const int tile_c = j % tiles_per_row;
    const int i0 = 2 * tile_r;
    const int j0 = 4 * tile_c;
    int placed = 0;
    for (int di = 0; di < 2 && placed < patch_size; ++di) {
      for (int dj = 0; dj < 4 && placed < patch_size; ++dj) {
        const long cell = static_cast<long>(i0 + di) * shape.w + (j0 + dj);
        mask(cell, j) = 1.0;
        ++placed;
      }
    }
  }
  return mask;
}

}  // namespace biooss
