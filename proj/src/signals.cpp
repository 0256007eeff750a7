// Band-limited noise synthesis and periodogram analysis (see signals.hpp).
#include "biooss/signals.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <string>

#include "biooss/common.hpp"
#include "biooss/rng.hpp"
#include "fftw_planning.hpp"

namespace biooss {

namespace {

using Complex = std::complex<double>;

// One-dimensional full complex DFT pair of a fixed length. The forward
// direction is unnormalized; the inverse applies the 1/T factor and returns
// the real part, which is exact when the spectrum is conjugate symmetric.
struct Dft1d {
  int n;
  fftw_complex* buf_in;
  fftw_complex* buf_out;
  fftw_plan fwd;
  fftw_plan bwd;

  explicit Dft1d(int n_) : n(n_) {
    buf_in = fftw_alloc_complex(static_cast<std::size_t>(n));
    buf_out = fftw_alloc_complex(static_cast<std::size_t>(n));
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fwd = fftw_plan_dft_1d(n, buf_in, buf_out, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft_1d(n, buf_in, buf_out, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  Dft1d(const Dft1d&) = delete;
  Dft1d& operator=(const Dft1d&) = delete;
  ~Dft1d() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_free(buf_in);
    fftw_free(buf_out);
  }

  std::vector<Complex> forward(const std::vector<double>& x) {
    for (int i = 0; i < n; ++i) {
      buf_in[i][0] = x[static_cast<std::size_t>(i)];
      buf_in[i][1] = 0.0;
    }
    fftw_execute(fwd);
    std::vector<Complex> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = Complex(buf_out[i][0], buf_out[i][1]);
    }
    return out;
  }

  std::vector<double> inverse_real(const std::vector<Complex>& coeff) {
    for (int i = 0; i < n; ++i) {
      const Complex& c = coeff[static_cast<std::size_t>(i)];
      buf_in[i][0] = c.real();
      buf_in[i][1] = c.imag();
    }
    fftw_execute(bwd);
    std::vector<double> out(static_cast<std::size_t>(n));
    const double scale = 1.0 / static_cast<double>(n);
    for (int i = 0; i < n; ++i) {
      out[static_cast<std::size_t>(i)] = buf_out[i][0] * scale;
    }
    return out;
  }
};

}  // namespace

void BandedNoiseSpec::validate() const {
  if (t_steps == 0) {
    throw DimensionError("banded noise needs at least one sample");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw DomainError("banded noise sample spacing must be positive, got " +
                      std::to_string(dt));
  }
  if (!std::isfinite(amplitude)) {
    throw DomainError("banded noise amplitude must be finite");
  }
  const double nyquist = 0.5 / dt;
  if (!std::isfinite(f_lo) || !std::isfinite(f_hi) || f_lo < 0.0 ||
      !(f_lo < f_hi) || f_hi > nyquist) {
    throw DomainError("banded noise band must satisfy 0 <= f_lo < f_hi <= " +
                      std::to_string(nyquist) + ", got [" +
                      std::to_string(f_lo) + ", " + std::to_string(f_hi) +
                      "]");
  }
}

std::vector<double> banded_white_noise(const BandedNoiseSpec& spec) {
  spec.validate();
  const std::size_t t = spec.t_steps;

  Rng rng(spec.seed, "signals/banded-noise");
  std::vector<double> samples(t);
  for (double& s : samples) {
    s = rng.normal();
  }

  Dft1d dft(static_cast<int>(t));
  std::vector<Complex> coeff = dft.forward(samples);
  const double bin_spacing = 1.0 / (static_cast<double>(t) * spec.dt);
  std::size_t kept = 0;
  for (std::size_t k = 0; k < t; ++k) {
    // Fold negative-frequency bins onto their positive magnitude so the
    // mask stays conjugate symmetric and the inverse transform stays real.
    const std::size_t folded = std::min(k, t - k);
    const double freq = static_cast<double>(folded) * bin_spacing;
    if (freq < spec.f_lo || freq > spec.f_hi) {
      coeff[k] = Complex(0.0, 0.0);
    } else {
      ++kept;
    }
  }
  if (kept == 0) {
    throw DomainError(
        "band [" + std::to_string(spec.f_lo) + ", " +
        std::to_string(spec.f_hi) + "] contains no transform bin; bins are " +
        std::to_string(bin_spacing) + " apart for " + std::to_string(t) +
        " samples");
  }

  std::vector<double> signal = dft.inverse_real(coeff);
  double mean_square = 0.0;
  for (double v : signal) {
    mean_square += v * v;
  }
  mean_square /= static_cast<double>(t);
  const double rms = std::sqrt(mean_square);
  if (!(rms > 0.0)) {
    throw NumericError("filtered noise has zero power", 0);
  }
  const double scale = spec.amplitude / rms;
  for (double& v : signal) {
    v *= scale;
  }
  return signal;
}

std::vector<double> tapered_periodogram(const std::vector<double>& trace) {
  const std::size_t t = trace.size();
  if (t < 16) {
    throw DimensionError("periodogram needs at least 16 samples, got " +
                         std::to_string(t));
  }
  require_finite(trace, "periodogram trace");

  double mean = 0.0;
  for (double v : trace) {
    mean += v;
  }
  mean /= static_cast<double>(t);

  std::vector<double> windowed(t);
  for (std::size_t i = 0; i < t; ++i) {
    const double w =
        std::sin(M_PI * static_cast<double>(i) / static_cast<double>(t - 1));
    windowed[i] = (trace[i] - mean) * w;
  }

  Dft1d dft(static_cast<int>(t));
  const std::vector<Complex> coeff = dft.forward(windowed);
  std::vector<double> power(t / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) {
    power[k] = std::norm(coeff[k]);
  }
  return power;
}

double dominant_frequency(const std::vector<double>& trace, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw DomainError("dominant frequency needs dt > 0, got " +
                      std::to_string(dt));
  }
  if (trace.size() < 16) {
    throw DimensionError("dominant frequency needs at least 16 samples, got " +
                         std::to_string(trace.size()));
  }
  // An exactly constant trace has no oscillation to rank; report DC. This
  // also sidesteps rounding jitter in the mean subtraction, which would
  // otherwise hand the argmax to an arbitrary bin of a numerically zero
  // spectrum.
  bool constant = true;
  for (double v : trace) {
    if (v != trace.front()) {
      constant = false;
      break;
    }
  }
  if (constant) {
    return 0.0;
  }

  const std::vector<double> power = tapered_periodogram(trace);
  std::size_t best = 0;
  for (std::size_t k = 1; k < power.size(); ++k) {
    // Strict comparison: ties keep the earlier, lower-frequency bin.
    if (power[k] > power[best]) {
      best = k;
    }
  }
  return static_cast<double>(best) /
         (static_cast<double>(trace.size()) * dt);
}

}  // namespace biooss
