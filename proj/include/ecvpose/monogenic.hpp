#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <unsupported/Eigen/FFT>
#include <vector>

#include "ecvpose/error.hpp"
#include "ecvpose/frame.hpp"

namespace ecvpose {

/// Per-pixel magnitude / orientation / phase triple from the monogenic signal.
/// Orientation is a mod-pi quantity in [0, pi); phase lies in [0, pi].
struct MopImage {
  int width = 0, height = 0;
  Image<double> magnitude;
  Image<double> orientation;
  Image<double> phase;
};

struct MonogenicParams {
  double wavelength = 8.0;        // center wavelength, pixels
  double bandwidth_octaves = 2.0; // log-Gabor bandwidth
};

/// Log-Gabor radial transfer at |frequency| = rho (cycles/pixel).
/// Zero at DC; bandwidth given in octaves.
inline double log_gabor_response(double rho, double wavelength, double bandwidth_octaves) {
  if (rho <= 0.0) return 0.0;
  const double f0 = 1.0 / wavelength;
  const double ln_sigma = bandwidth_octaves * std::numbers::ln2 / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  const double x = std::log(rho / f0);
  return std::exp(-(x * x) / (2.0 * ln_sigma * ln_sigma));
}

/// Signed DFT bin frequency in cycles/pixel for index k of an n-point axis.
inline double dft_frequency(int k, int n) {
  int signed_k = (k <= n / 2) ? k : k - n;
  return double(signed_k) / double(n);
}

namespace detail {

// In-place 2-D FFT built from 1-D row/column passes.
inline void fft2(std::vector<std::complex<double>>& buf, int width, int height, bool inverse) {
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> line(static_cast<size_t>(width));
  std::vector<std::complex<double>> out(static_cast<size_t>(width));
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) line[size_t(x)] = buf[size_t(y) * width + x];
    if (inverse)
      fft.inv(out, line);
    else
      fft.fwd(out, line);
    for (int x = 0; x < width; ++x) buf[size_t(y) * width + x] = out[size_t(x)];
  }
  line.resize(size_t(height));
  out.resize(size_t(height));
  for (int x = 0; x < width; ++x) {
    for (int y = 0; y < height; ++y) line[size_t(y)] = buf[size_t(y) * width + x];
    if (inverse)
      fft.inv(out, line);
    else
      fft.fwd(out, line);
    for (int y = 0; y < height; ++y) buf[size_t(y) * width + x] = out[size_t(y)];
  }
}

}  // namespace detail

/// Monogenic filtering of a grayscale image: band-passed even response plus
/// the two Riesz (odd) responses, combined into magnitude, orientation, phase.
inline MopImage monogenic_filter(const Image<double>& gray, double center_wavelength,
                                 double bandwidth_octaves) {
  if (gray.width <= 0 || gray.height <= 0)
    throw Error(ErrorCode::EmptyInput, "monogenic_filter on empty image");
  if (bandwidth_octaves <= 0.0)
    throw Error(ErrorCode::InvalidFilter, "bandwidth must be positive");
  if (center_wavelength < 2.0)
    throw Error(ErrorCode::InvalidFilter, "center wavelength must be at least 2 px");

  const int w = gray.width, h = gray.height;
  std::vector<std::complex<double>> spectrum(size_t(w) * size_t(h));
  for (size_t i = 0; i < spectrum.size(); ++i) spectrum[i] = gray.data[i];
  detail::fft2(spectrum, w, h, false);

  std::vector<std::complex<double>> even(spectrum.size());
  std::vector<std::complex<double>> odd_x(spectrum.size());
  std::vector<std::complex<double>> odd_y(spectrum.size());
  for (int y = 0; y < h; ++y) {
    const double fv = dft_frequency(y, h);
    for (int x = 0; x < w; ++x) {
      const double fu = dft_frequency(x, w);
      const double rho = std::hypot(fu, fv);
      const double g = log_gabor_response(rho, center_wavelength, bandwidth_octaves);
      const size_t i = size_t(y) * w + x;
      even[i] = spectrum[i] * g;
      if (rho > 0.0) {
        const std::complex<double> riesz_x(0.0, fu / rho);
        const std::complex<double> riesz_y(0.0, fv / rho);
        odd_x[i] = even[i] * riesz_x;
        odd_y[i] = even[i] * riesz_y;
      } else {
        odd_x[i] = odd_y[i] = 0.0;
      }
    }
  }
  detail::fft2(even, w, h, true);
  detail::fft2(odd_x, w, h, true);
  detail::fft2(odd_y, w, h, true);

  MopImage mop;
  mop.width = w;
  mop.height = h;
  mop.magnitude = Image<double>(w, h);
  mop.orientation = Image<double>(w, h);
  mop.phase = Image<double>(w, h);
  for (size_t i = 0; i < even.size(); ++i) {
    const double fb = even[i].real();
    const double r1 = odd_x[i].real();
    const double r2 = odd_y[i].real();
    const double odd_mag = std::hypot(r1, r2);
    mop.magnitude.data[i] = std::sqrt(fb * fb + r1 * r1 + r2 * r2);
    double theta = std::atan2(r2, r1);
    if (theta < 0.0) theta += std::numbers::pi;
    if (theta >= std::numbers::pi) theta -= std::numbers::pi;
    mop.orientation.data[i] = theta;
    mop.phase.data[i] = std::atan2(odd_mag, fb);
  }
  return mop;
}

inline MopImage monogenic_filter(const RgbdFrame& frame, double center_wavelength,
                                 double bandwidth_octaves) {
  frame.validate();
  return monogenic_filter(luminance(frame), center_wavelength, bandwidth_octaves);
}

inline MopImage monogenic_filter(const RgbdFrame& frame, const MonogenicParams& params) {
  return monogenic_filter(frame, params.wavelength, params.bandwidth_octaves);
}

}  // namespace ecvpose
