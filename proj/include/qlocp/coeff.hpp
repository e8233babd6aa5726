#ifndef QLOCP_COEFF_HPP
#define QLOCP_COEFF_HPP

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace qlocp {

/// One C^2 branch of a kinked coefficient: value and its first two
/// derivatives as closed-form callables.
struct CoeffBranch {
  std::function<double(double)> f;
  std::function<double(double)> df;
  std::function<double(double)> ddf;

  static CoeffBranch constant(double c) {
    return {[c](double) { return c; }, [](double) { return 0.0; },
            [](double) { return 0.0; }};
  }
  static CoeffBranch affine(double slope, double intercept) {
    return {[=](double t) { return slope * t + intercept; },
            [=](double) { return slope; }, [](double) { return 0.0; }};
  }
  /// Polynomial with coefficients in ascending order of degree.
  static CoeffBranch poly(std::vector<double> c) {
    auto horner = [](const std::vector<double>& a, double t) {
      double v = 0.0;
      for (std::size_t i = a.size(); i-- > 0;) v = v * t + a[i];
      return v;
    };
    std::vector<double> d1, d2;
    for (std::size_t i = 1; i < c.size(); ++i) d1.push_back(c[i] * static_cast<double>(i));
    for (std::size_t i = 1; i < d1.size(); ++i) d2.push_back(d1[i] * static_cast<double>(i));
    return {[=](double t) { return horner(c, t); },
            [=](double t) { return horner(d1, t); },
            [=](double t) { return horner(d2, t); }};
  }
};

/// The nondifferentiable scalar coefficient: two C^2 branches meeting
/// continuously at a kink. Exactly at the kink the lower branch provides
/// the value; one-sided derivatives drive the directional calculus.
class PC1Coeff {
 public:
  PC1Coeff(CoeffBranch lo, CoeffBranch hi, double kink, bool coercive = false)
      : lo_(std::move(lo)),
        hi_(std::move(hi)),
        kink_(kink),
        kink_hits_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
    const double gap = std::abs(lo_.f(kink_) - hi_.f(kink_));
    const double scale = 1.0 + std::abs(lo_.f(kink_));
    if (gap > 1e-12 * scale)
      throw std::invalid_argument("PC1Coeff: branches do not match at the kink");
    if (coercive) {
      for (int i = -100; i <= 100; ++i) {
        const double t = kink_ + 0.1 * i;
        if (eval(t) < 0.0)
          throw std::invalid_argument("PC1Coeff: coefficient negative on sample grid");
      }
    }
  }

  static PC1Coeff max_type(double shift) {
    return PC1Coeff(CoeffBranch::constant(0.0), CoeffBranch::affine(1.0, -shift), shift);
  }

  double kink() const { return kink_; }

  double eval(double t) const { return t <= kink_ ? lo_.f(t) : hi_.f(t); }

  /// Directional derivative a'(t; s).
  double eval_dir(double t, double s) const {
    if (t < kink_) return lo_.df(t) * s;
    if (t > kink_) return hi_.df(t) * s;
    if (s > 0.0) return hi_.df(kink_) * s;
    if (s < 0.0) return lo_.df(kink_) * s;
    return 0.0;
  }

  double eval_second(double t) const {
    if (t == kink_)
      throw std::domain_error("PC1Coeff::eval_second: undefined at the kink");
    return t < kink_ ? lo_.ddf(t) : hi_.ddf(t);
  }

  /// |a0'(kink) - a1'(kink)|, the slope gap driving the nonsmooth terms.
  double sigma0() const { return std::abs(lo_.df(kink_) - hi_.df(kink_)); }

  /// Signed gap a0'(kink) - a1'(kink), as it enters the level-set integral.
  double slope_gap() const { return lo_.df(kink_) - hi_.df(kink_); }

  /// Branch derivative for quadrature-point evaluation inside indicator
  /// weighted integrands. A point landing exactly on the kink takes the
  /// upper one-sided branch and bumps a diagnostic counter; the event has
  /// measure zero.
  double slope_at(double t) const {
    if (t < kink_) return lo_.df(t);
    if (t > kink_) return hi_.df(t);
    kink_hits_->fetch_add(1, std::memory_order_relaxed);
    return hi_.df(kink_);
  }

  /// Branch second derivative with the same one-sided kink policy.
  double curvature_at(double t) const {
    if (t < kink_) return lo_.ddf(t);
    if (t > kink_) return hi_.ddf(t);
    kink_hits_->fetch_add(1, std::memory_order_relaxed);
    return hi_.ddf(kink_);
  }

  std::uint64_t kink_hit_count() const { return kink_hits_->load(); }

 private:
  CoeffBranch lo_, hi_;
  double kink_;
  std::shared_ptr<std::atomic<std::uint64_t>> kink_hits_;
};

}  // namespace qlocp

#endif
