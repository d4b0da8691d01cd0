#pragma once

#include "novact/core.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <utility>

namespace novact {

/// One robot action: T x D joint angles in radians.
struct JointTrajectory {
  Sequence<double> values;
  std::string name;

  Eigen::Index steps() const { return values.rows(); }
  Eigen::Index joints() const { return values.cols(); }
};

/// Reference points and shape of the analog <-> softmax transform.
///
/// `references` is D x J; row d holds the J linearly spaced reference angles
/// of joint d.
struct CodecSpec {
  MatrixX<double> references;
  double sigma = 0.5;

  Eigen::Index joints() const { return references.rows(); }
  Eigen::Index units() const { return references.cols(); }
  Eigen::Index width() const { return references.rows() * references.cols(); }

  void validate() const;
};

inline constexpr int kDefaultUnits = 10;
inline constexpr double kDefaultSigma = 0.5;

CodecSpec build_reference_points(std::span<const JointTrajectory> training, int units,
                                 double sigma = kDefaultSigma);

/// Soft assignment of one analog value onto its reference points:
/// softmax_j = exp(-(ref_j - x)^2 / sigma) / sum_k exp(-(ref_k - x)^2 / sigma).
template <typename Derived>
VectorX<typename Derived::Scalar> encode_analog(typename Derived::Scalar value,
                                                const Eigen::MatrixBase<Derived>& refs,
                                                typename Derived::Scalar sigma) {
  using Scalar = typename Derived::Scalar;
  require(sigma > Scalar(0), ErrorKind::InvalidArgument, "sigma must be positive");
  const auto r = refs.derived().reshaped();
  VectorX<Scalar> logits = -(r.array() - value).square().matrix() / sigma;
  // shift by the max logit; the normalized result is unchanged
  const Scalar top = logits.maxCoeff();
  VectorX<Scalar> out = (logits.array() - top).exp().matrix();
  out /= out.sum();
  return out;
}

/// Probability-weighted mean of the reference points. The block is
/// renormalized to sum 1 first, so unnormalized non-negative inputs are valid.
template <typename DerivedV, typename DerivedR>
typename DerivedV::Scalar softmax_expectation(const Eigen::MatrixBase<DerivedV>& vec,
                                              const Eigen::MatrixBase<DerivedR>& refs) {
  using Scalar = typename DerivedV::Scalar;
  const auto v = vec.derived().reshaped();
  const auto r = refs.derived().reshaped();
  require(v.size() == r.size(), ErrorKind::DimensionMismatch, "block and reference sizes differ");
  require((v.array() >= Scalar(1e-12)).any(), ErrorKind::AllZero, "softmax block is all zero");
  const Scalar total = v.sum();
  return v.dot(r) / total;
}

namespace detail {

/// Expectation of an encoded value and its derivative with respect to the value.
/// d/dx E_w[r] = (2 / sigma) Var_w[r] > 0, so the roundtrip map is strictly increasing.
template <typename Derived>
std::pair<typename Derived::Scalar, typename Derived::Scalar> roundtrip_map(
    typename Derived::Scalar x, const Eigen::MatrixBase<Derived>& refs,
    typename Derived::Scalar sigma) {
  using Scalar = typename Derived::Scalar;
  const auto r = refs.derived().reshaped();
  const VectorX<Scalar> w = encode_analog(x, refs, sigma);
  const Scalar mean = w.dot(r);
  const Scalar var = (w.array() * (r.array() - mean).square()).sum();
  return {mean, Scalar(2) * var / sigma};
}

}  // namespace detail

/// Maps a softmax block back to radians.
///
/// The weighted mean of the references is biased toward the middle of the
/// span for a broad kernel, so the mean is pulled back through the inverse of
/// x -> expectation(encode(x)). For exact encodings this recovers x; for any
/// other block it returns the angle whose encoding has the same expectation,
/// which is also the KL projection of the block onto the encoding curve.
/// The result is clamped to one span beyond either end of the references.
template <typename DerivedV, typename DerivedR>
typename DerivedV::Scalar decode_softmax(const Eigen::MatrixBase<DerivedV>& vec,
                                         const Eigen::MatrixBase<DerivedR>& refs,
                                         typename DerivedV::Scalar sigma) {
  using Scalar = typename DerivedV::Scalar;
  const Scalar target = softmax_expectation(vec, refs);
  const auto r = refs.derived().reshaped();
  const Scalar lo_ref = r.minCoeff();
  const Scalar hi_ref = r.maxCoeff();
  const Scalar span = hi_ref - lo_ref;
  Scalar lo = lo_ref - span;
  Scalar hi = hi_ref + span;
  if (detail::roundtrip_map(lo, refs, sigma).first >= target) return lo;
  if (detail::roundtrip_map(hi, refs, sigma).first <= target) return hi;

  Scalar x = std::clamp(target, lo, hi);
  const Scalar tol = Scalar(1e-13) * std::max(Scalar(1), span);
  for (int iter = 0; iter < 200; ++iter) {
    const auto [g, slope] = detail::roundtrip_map(x, refs, sigma);
    const Scalar residual = g - target;
    if (residual > Scalar(0)) {
      hi = x;
    } else {
      lo = x;
    }
    Scalar next = slope > Scalar(0) ? x - residual / slope : (lo + hi) / Scalar(2);
    if (!(next > lo && next < hi)) next = (lo + hi) / Scalar(2);
    if (std::abs(next - x) <= tol || hi - lo <= tol) return next;
    x = next;
  }
  return x;
}

Sequence<double> encode_trajectory(const JointTrajectory& traj, const CodecSpec& spec);
JointTrajectory decode_trajectory(const Eigen::Ref<const Sequence<double>>& seq,
                                  const CodecSpec& spec, std::string name = {});

/// Encodes a single posture (D angles) into one D*J input frame.
VectorX<double> encode_frame(const Eigen::Ref<const VectorX<double>>& posture,
                             const CodecSpec& spec);

}  // namespace novact
