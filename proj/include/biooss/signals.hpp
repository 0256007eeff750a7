// Time-series signal synthesis and spectral measurement: band-limited white
// noise for driving the grid, and periodogram-based dominant-frequency
// estimation for analyzing recorded traces.
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace biooss {

// Band-limited Gaussian white noise.
//
// The signal is synthesized by drawing t_steps standard normal samples,
// zeroing every discrete Fourier coefficient whose frequency lies outside
// [f_lo, f_hi] (edges inclusive; bin k of a length-T transform carries
// frequency min(k, T-k) / (T dt)), inverse transforming, and rescaling the
// result to RMS = amplitude.
struct BandedNoiseSpec {
  double f_lo = 0.0;        // lower band edge, 1/time units
  double f_hi = 0.0;        // upper band edge, inclusive
  std::size_t t_steps = 0;  // number of samples
  double dt = 0.0;          // sample spacing
  std::uint64_t seed = 0;   // same seed reproduces the identical signal
  double amplitude = 1.0;   // RMS of the produced signal

  // Throws DimensionError when t_steps == 0 and DomainError unless dt > 0,
  // amplitude is finite, and 0 <= f_lo < f_hi <= 1/(2 dt).
  void validate() const;
};

// Synthesizes the signal described by `spec`. Deterministic in spec.seed.
// Throws DomainError when no transform bin falls inside the band, which
// happens when the band is narrower than the bin spacing 1/(T dt) and
// straddles no multiple of it.
std::vector<double> banded_white_noise(const BandedNoiseSpec& spec);

// Periodogram used for dominant-frequency analysis: the trace mean is
// removed, the half-cosine taper w[n] = sin(pi n / (T-1)) is applied, and
// squared transform magnitudes for bins 0..T/2 are returned (length
// T/2 + 1). Throws DimensionError for traces shorter than 16 samples and
// NumericError on non-finite entries.
std::vector<double> tapered_periodogram(const std::vector<double>& trace);

// Frequency of the maximum bin of tapered_periodogram(trace), in 1/time
// units: argmax_k / (T dt). Ties break toward the lower frequency, and an
// exactly constant trace reports 0 by convention. Throws DimensionError for
// traces shorter than 16 samples and DomainError when dt <= 0.
double dominant_frequency(const std::vector<double>& trace, double dt);

}  // namespace biooss
