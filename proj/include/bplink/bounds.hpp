#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bplink/divisibility.hpp"
#include "bplink/errors.hpp"
#include "bplink/kernel.hpp"
#include "bplink/matching.hpp"
#include "bplink/process.hpp"

namespace bplink {

// Constants certifying the regularity conditions of the analytic TVD bound:
//   h:   phi(x) >= h x on positive states,
//   R:   cap on third absolute central offspring moments on both sides,
//   eta: half the worst consecutive-atom overlap of the offspring laws.
struct RegularityCertificate {
  double h = 0.0;
  double R = 0.0;
  double eta = 0.0;
  double m_tilde = 0.0;
  double sigma2_tilde = 0.0;
  i64 z_lo = 0;
  i64 z_hi = 0;
  bool exact = false;  // infima are analytic rather than range scans
};

struct RegularityViolation {
  std::string condition;  // "C1" | "C2" | "C3"
  i64 witness = 0;
  std::string detail;
};

struct CertifyResult {
  std::optional<RegularityCertificate> certificate;
  std::vector<RegularityViolation> violations;
  bool ok() const { return certificate.has_value(); }
};

// Certifies the regularity conditions for a moment-matched PSDBP/DCBP pair
// over [z_lo, z_hi]. The pair must pass check_match on the range first.
inline CertifyResult certify_regularity(const PsdbpSpec& psdbp, const CbpSpec& dcbp, i64 z_lo,
                                        i64 z_hi, double tail_tol = 1e-9) {
  const auto* det = std::get_if<DeterministicControl>(&dcbp.control);
  if (det == nullptr) throw ValidationError("certify_regularity: control must be deterministic");
  if (z_lo < 1 || z_hi < z_lo) throw ValidationError("certify_regularity: need 1 <= z_lo <= z_hi");
  CheckMatchResult match = check_match(psdbp, dcbp, z_lo, z_hi);
  if (!match.matched)
    throw ValidationError("certify_regularity: pair does not have matching moments on the range");

  CertifyResult out;
  RegularityCertificate cert;
  cert.z_lo = z_lo;
  cert.z_hi = z_hi;
  cert.m_tilde = dcbp.offspring.mean();
  cert.sigma2_tilde = dcbp.offspring.variance();

  // C1: h = inf phi(x)/x. Analytic for catalog maps, otherwise a range scan.
  std::optional<double> slope = det->map.analytic_lower_slope();
  cert.exact = slope.has_value();
  double h;
  if (slope) {
    h = *slope;
  } else {
    h = std::numeric_limits<double>::infinity();
    for (i64 x = z_lo; x <= z_hi; ++x)
      h = std::min(h, static_cast<double>(det->map(x)) / static_cast<double>(x));
  }
  if (!(h > 0.0)) {
    i64 witness = z_lo;
    for (i64 x = z_lo; x <= z_hi; ++x)
      if (det->map(x) == 0) {
        witness = x;
        break;
      }
    out.violations.push_back({"C1", witness, "phi(x) = 0 at a positive state"});
  }
  cert.h = h;

  // C2: R bounds the third absolute central moments on both sides.
  Moments tilde = dcbp.offspring.moments(tail_tol);
  double R = tilde.rho3;
  for (i64 x = z_lo; x <= z_hi; ++x)
    R = std::max(R, psdbp.family->offspring(x).moments(tail_tol).rho3);
  if (!std::isfinite(R)) out.violations.push_back({"C2", z_lo, "non-finite third moment"});
  cert.R = R;

  // C3: eta = half the smallest consecutive-atom overlap across offspring
  // laws; a point-mass law has no consecutive pair and fails outright.
  double gamma = consecutive_overlap(dcbp.offspring, tail_tol);
  i64 gamma_witness = 0;
  for (i64 x = z_lo; x <= z_hi; ++x) {
    double g = consecutive_overlap(psdbp.family->offspring(x), tail_tol);
    if (g < gamma) {
      gamma = g;
      gamma_witness = x;
    }
  }
  if (!(gamma > 0.0))
    out.violations.push_back({"C3", gamma_witness, "no pair of consecutive atoms shares mass"});
  cert.eta = gamma / 2.0;

  if (!(cert.sigma2_tilde > 0.0))
    out.violations.push_back({"C2", 0, "offspring variance is zero"});

  if (out.violations.empty()) out.certificate = cert;
  return out;
}

// One-step bound J(z), exactly as displayed:
//   sqrt(2) (3R + 2(1+h) s2) / (s2 (h^1) sqrt(pi eta z))
//   + ((5 sqrt(2 pi) + 3 pi/2)(1+h) R + h s2) / (s3 sqrt(2 pi h^3 z)).
inline double one_step_bound(double z, const RegularityCertificate& cert) {
  if (!(z > 0)) throw ValidationError("one_step_bound: z must be > 0");
  const double pi = 3.14159265358979323846;
  const double s2 = cert.sigma2_tilde;
  const double s = std::sqrt(s2);
  const double h = cert.h;
  double term1 = std::sqrt(2.0) * (3.0 * cert.R + 2.0 * (1.0 + h) * s2) /
                 (s2 * std::min(h, 1.0) * std::sqrt(pi * cert.eta * z));
  double term2 = ((5.0 * std::sqrt(2.0 * pi) + 1.5 * pi) * (1.0 + h) * cert.R + h * s2) /
                 (s2 * s * std::sqrt(2.0 * pi * h * h * h * z));
  return term1 + term2;
}

// k-step path bound: sum of J((alpha m h)^i z) plus the Chebyshev drift term
// s2 / ((1-alpha)^2 m^2 h z) * sum (alpha m h)^{-i}. Empty sums are zero.
inline double k_step_bound(double z, i64 k, double alpha, const RegularityCertificate& cert) {
  if (k < 1) throw ValidationError("k_step_bound: k must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("k_step_bound: alpha must be in (0,1)");
  const double w = alpha * cert.m_tilde * cert.h;
  double sum_j = 0.0;
  double scale = 1.0;
  for (i64 i = 0; i < k; ++i) {
    sum_j += one_step_bound(scale * z, cert);
    scale *= w;
  }
  double sum_drift = 0.0;
  double inv = 1.0;
  for (i64 i = 0; i + 2 <= k; ++i) {
    sum_drift += inv;
    inv /= w;
  }
  double drift_coeff =
      cert.sigma2_tilde /
      ((1.0 - alpha) * (1.0 - alpha) * cert.m_tilde * cert.m_tilde * cert.h * z);
  return sum_j + drift_coeff * sum_drift;
}

struct ClosedFormBound {
  double b = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double value = 0.0;
  double effective = 0.0;  // min(1, value); the raw bound is not clamped
  std::optional<double> k_infinity_limit;
};

// Geometric closed form of the k-step bound: b so that J(z) = b/sqrt(z)
// identically, then c1 |1 - w^{-k/2}| / sqrt(z) + c2 |1 - w^{-k+1}| / z with
// w = alpha m h. For w > 1 the k -> infinity limit c1/sqrt(z) + c2/z is
// finite and also reported.
inline ClosedFormBound closed_form_bound(double z, i64 k, double alpha,
                                         const RegularityCertificate& cert) {
  if (k < 1) throw ValidationError("closed_form_bound: k must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("closed_form_bound: alpha must be in (0,1)");
  const double w = alpha * cert.m_tilde * cert.h;
  ClosedFormBound out;
  out.b = one_step_bound(1.0, cert);
  if (k == 1) {
    out.value = out.b / std::sqrt(z);
    out.effective = std::min(1.0, out.value);
    if (w > 1.0) {
      double c1 = std::abs(out.b * std::sqrt(w) / (std::sqrt(w) - 1.0));
      double c2 = std::abs(alpha * cert.sigma2_tilde /
                           ((1.0 - alpha) * (1.0 - alpha) * (w - 1.0) * cert.m_tilde));
      out.c1 = c1;
      out.c2 = c2;
      out.k_infinity_limit = c1 / std::sqrt(z) + c2 / z;
    }
    return out;
  }
  if (w == 1.0)
    throw DegenerateRatioError("closed_form_bound: alpha * m_tilde * h == 1");
  out.c1 = std::abs(out.b * std::sqrt(w) / (std::sqrt(w) - 1.0));
  out.c2 = std::abs(alpha * cert.sigma2_tilde /
                    ((1.0 - alpha) * (1.0 - alpha) * (w - 1.0) * cert.m_tilde));
  double kd = static_cast<double>(k);
  out.value = out.c1 * std::abs(1.0 - std::pow(w, -kd / 2.0)) / std::sqrt(z) +
              out.c2 * std::abs(1.0 - std::pow(w, -(kd - 1.0))) / z;
  out.effective = std::min(1.0, out.value);
  if (w > 1.0) out.k_infinity_limit = out.c1 / std::sqrt(z) + out.c2 / z;
  return out;
}

}  // namespace bplink
