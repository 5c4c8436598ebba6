#include "tiger/training/losses.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "tiger/common/error.hpp"
#include "tiger/metrics/metrics.hpp"

namespace tiger::training {

using nn::Shape;
using nn::Tensor;

namespace {

template <typename T>
std::vector<double> to_double(const Tensor<T>& t) {
  return {t.data().begin(), t.data().end()};
}

// d si_sdr / d est for fixed reference.
std::vector<double> si_sdr_gradient(std::span<const double> s, std::span<const double> r) {
  const double eps = metrics::kEpsilon;
  double rr = 0, sr = 0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    rr += r[i] * r[i];
    sr += s[i] * r[i];
  }
  const double alpha = sr / (rr + eps);
  double target = 0, noise = 0, er = 0;
  std::vector<double> e(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double t = alpha * r[i];
    e[i] = t - s[i];
    target += t * t;
    noise += e[i] * e[i];
    er += e[i] * r[i];
  }
  const double k = 10.0 / std::numbers::ln10;
  const double dt = 2.0 * alpha * rr / (rr + eps) / (target + eps);
  const double dn_r = 2.0 * er / (rr + eps) / (noise + eps);
  const double dn_e = -2.0 / (noise + eps);
  std::vector<double> g(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) g[i] = k * (dt * r[i] - dn_r * r[i] - dn_e * e[i]);
  return g;
}

template <typename T>
void check_sets(const std::vector<Tensor<T>>& est, const std::vector<std::vector<double>>& refs,
                const char* what) {
  if (est.empty() || est.size() != refs.size()) {
    throw InvalidArgument(std::string(what) + ": " + std::to_string(est.size()) +
                          " estimates for " + std::to_string(refs.size()) + " references");
  }
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (est[i].rank() != 1 || est[i].numel() != refs[i].size()) {
      throw InvalidArgument(std::string(what) + ": length mismatch for source " +
                            std::to_string(i));
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> si_sdr(const Tensor<T>& estimate, std::span<const double> reference) {
  const std::vector<double> s = to_double(estimate);
  const double value = metrics::si_sdr(s, reference);
  Tensor<T> out(Shape{1}, static_cast<T>(value));
  std::vector<double> ref(reference.begin(), reference.end());
  nn::attach_backward<T>(out, {&estimate}, [estimate, ref = std::move(ref)](std::span<const T> g) {
    const auto grad = si_sdr_gradient(to_double(estimate), ref);
    std::vector<T> d(grad.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(g[0] * grad[i]);
    estimate.accumulate_grad(d);
  });
  return out;
}

template <typename T>
PitResult<T> pit_loss(const std::vector<Tensor<T>>& estimates,
                      const std::vector<std::vector<double>>& references) {
  check_sets(estimates, references, "pit_loss");
  const std::size_t c = estimates.size();
  std::vector<std::vector<double>> est(c);
  for (std::size_t i = 0; i < c; ++i) est[i] = to_double(estimates[i]);
  // scores[e][r] = si_sdr(est[e], ref[r])
  std::vector<std::vector<double>> scores(c, std::vector<double>(c));
  for (std::size_t e = 0; e < c; ++e) {
    for (std::size_t r = 0; r < c; ++r) scores[e][r] = metrics::si_sdr(est[e], references[r]);
  }
  std::vector<std::size_t> perm(c), best;
  std::iota(perm.begin(), perm.end(), 0);
  double best_sum = -INFINITY;
  do {
    double total = 0.0;
    for (std::size_t r = 0; r < c; ++r) total += scores[perm[r]][r];
    if (total > best_sum) {
      best_sum = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  PitResult<T> result;
  result.value = -(best_sum / static_cast<double>(c));
  result.permutation = best;
  result.loss = Tensor<T>(Shape{1}, static_cast<T>(result.value));
  nn::attach_backward<T>(
      result.loss, estimates,
      [estimates, references, best, c](std::span<const T> g) {
        for (std::size_t r = 0; r < c; ++r) {
          const Tensor<T>& e = estimates[best[r]];
          const auto grad = si_sdr_gradient(to_double(e), references[r]);
          const double k = -static_cast<double>(g[0]) / static_cast<double>(c);
          std::vector<T> d(grad.size());
          for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(k * grad[i]);
          e.accumulate_grad(d);
        }
      });
  return result;
}

template <typename T>
Tensor<T> dnr_loss(const std::vector<Tensor<T>>& estimates,
                   const std::vector<std::vector<double>>& references,
                   const dsp::StftConfig& stft) {
  check_sets(estimates, references, "dnr_loss");
  const std::size_t c = estimates.size();
  const double inv_c = 1.0 / static_cast<double>(c);
  double total = 0.0;
  // Per source: sign of the time error, and unit phasors of the spectral error.
  std::vector<std::vector<double>> time_sign(c), unit_re(c), unit_im(c);
  std::size_t cells = 0;
  for (std::size_t i = 0; i < c; ++i) {
    const std::size_t len = references[i].size();
    std::vector<double> err(len);
    const auto est = estimates[i].data();
    double time_sum = 0.0;
    time_sign[i].resize(len);
    for (std::size_t n = 0; n < len; ++n) {
      err[n] = static_cast<double>(est[n]) - references[i][n];
      time_sum += std::abs(err[n]);
      time_sign[i][n] = (err[n] > 0) - (err[n] < 0);
    }
    const dsp::ComplexSpectrogram spec = dsp::stft(err, 1.0, stft);
    cells = spec.data.size();
    double spec_sum = 0.0;
    unit_re[i].resize(cells);
    unit_im[i].resize(cells);
    for (std::size_t k = 0; k < cells; ++k) {
      const double mag = std::abs(spec.data[k]);
      spec_sum += mag;
      unit_re[i][k] = mag > 0 ? spec.data[k].real() / mag : 0.0;
      unit_im[i][k] = mag > 0 ? spec.data[k].imag() / mag : 0.0;
    }
    total += inv_c * time_sum / static_cast<double>(len) +
             inv_c * spec_sum / static_cast<double>(cells);
  }
  Tensor<T> out(Shape{1}, static_cast<T>(total));
  nn::attach_backward<T>(
      out, estimates,
      [estimates, stft, inv_c, time_sign = std::move(time_sign), unit_re = std::move(unit_re),
       unit_im = std::move(unit_im)](std::span<const T> g) {
        for (std::size_t i = 0; i < estimates.size(); ++i) {
          const std::size_t len = time_sign[i].size();
          const double cells = static_cast<double>(unit_re[i].size());
          std::vector<double> gre(unit_re[i].size()), gim(unit_im[i].size());
          for (std::size_t k = 0; k < gre.size(); ++k) {
            gre[k] = inv_c * unit_re[i][k] / cells;
            gim[k] = inv_c * unit_im[i][k] / cells;
          }
          const std::vector<double> spectral = dsp::stft_adjoint(gre, gim, stft, len);
          std::vector<T> d(len);
          for (std::size_t n = 0; n < len; ++n) {
            d[n] = static_cast<T>(g[0] * (inv_c * time_sign[i][n] / static_cast<double>(len) +
                                          spectral[n]));
          }
          estimates[i].accumulate_grad(d);
        }
      });
  return out;
}

template Tensor<float> si_sdr(const Tensor<float>&, std::span<const double>);
template Tensor<double> si_sdr(const Tensor<double>&, std::span<const double>);
template PitResult<float> pit_loss(const std::vector<Tensor<float>>&,
                                   const std::vector<std::vector<double>>&);
template PitResult<double> pit_loss(const std::vector<Tensor<double>>&,
                                    const std::vector<std::vector<double>>&);
template Tensor<float> dnr_loss(const std::vector<Tensor<float>>&,
                                const std::vector<std::vector<double>>&, const dsp::StftConfig&);
template Tensor<double> dnr_loss(const std::vector<Tensor<double>>&,
                                 const std::vector<std::vector<double>>&, const dsp::StftConfig&);

}  // namespace tiger::training
