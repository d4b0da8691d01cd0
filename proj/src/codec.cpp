#include "novact/codec.hpp"

#include <limits>
#include <string>

namespace novact {

void CodecSpec::validate() const {
  require(units() >= 2, ErrorKind::InvalidArgument, "need at least 2 softmax units per joint");
  require(joints() >= 1, ErrorKind::InvalidArgument, "need at least one joint");
  require(sigma > 0.0, ErrorKind::InvalidArgument, "sigma must be positive");
  for (Eigen::Index d = 0; d < joints(); ++d) {
    for (Eigen::Index j = 1; j < units(); ++j) {
      require(references(d, j) > references(d, j - 1), ErrorKind::InvalidArgument,
              "reference points must be strictly increasing");
    }
  }
}

CodecSpec build_reference_points(std::span<const JointTrajectory> training, int units,
                                 double sigma) {
  require(units >= 2, ErrorKind::InvalidArgument, "need at least 2 softmax units per joint");
  require(sigma > 0.0, ErrorKind::InvalidArgument, "sigma must be positive");
  require(!training.empty(), ErrorKind::InvalidArgument, "training set is empty");
  const Eigen::Index dims = training.front().joints();
  VectorX<double> lo = VectorX<double>::Constant(dims, std::numeric_limits<double>::infinity());
  VectorX<double> hi = -lo;
  for (const auto& traj : training) {
    require(traj.joints() == dims && traj.steps() > 0, ErrorKind::DimensionMismatch,
            "trajectory '" + traj.name + "' has inconsistent shape");
    lo = lo.cwiseMin(traj.values.colwise().minCoeff().transpose());
    hi = hi.cwiseMax(traj.values.colwise().maxCoeff().transpose());
  }

  CodecSpec spec;
  spec.sigma = sigma;
  spec.references.resize(dims, units);
  for (Eigen::Index d = 0; d < dims; ++d) {
    require(hi(d) - lo(d) >= 1e-9, ErrorKind::DegenerateRange,
            "joint " + std::to_string(d) + " never moves in the training data");
    spec.references.row(d) = VectorX<double>::LinSpaced(units, lo(d), hi(d)).transpose();
  }
  return spec;
}

VectorX<double> encode_frame(const Eigen::Ref<const VectorX<double>>& posture,
                             const CodecSpec& spec) {
  require(posture.size() == spec.joints(), ErrorKind::DimensionMismatch,
          "posture has " + std::to_string(posture.size()) + " joints, codec expects " +
              std::to_string(spec.joints()));
  const Eigen::Index units = spec.units();
  VectorX<double> frame(spec.width());
  for (Eigen::Index d = 0; d < spec.joints(); ++d) {
    frame.segment(d * units, units) = encode_analog(posture(d), spec.references.row(d), spec.sigma);
  }
  return frame;
}

Sequence<double> encode_trajectory(const JointTrajectory& traj, const CodecSpec& spec) {
  require(traj.steps() > 0 && traj.joints() == spec.joints(), ErrorKind::DimensionMismatch,
          "trajectory shape does not match the codec");
  Sequence<double> out(traj.steps(), spec.width());
  for (Eigen::Index t = 0; t < traj.steps(); ++t) {
    out.row(t) = encode_frame(traj.values.row(t).transpose(), spec).transpose();
  }
  return out;
}

JointTrajectory decode_trajectory(const Eigen::Ref<const Sequence<double>>& seq,
                                  const CodecSpec& spec, std::string name) {
  require(seq.rows() > 0 && seq.cols() == spec.width(), ErrorKind::DimensionMismatch,
          "softmax sequence shape does not match the codec");
  const Eigen::Index units = spec.units();
  JointTrajectory out{Sequence<double>(seq.rows(), spec.joints()), std::move(name)};
  for (Eigen::Index t = 0; t < seq.rows(); ++t) {
    for (Eigen::Index d = 0; d < spec.joints(); ++d) {
      out.values(t, d) =
          decode_softmax(seq.row(t).segment(d * units, units), spec.references.row(d), spec.sigma);
    }
  }
  return out;
}

}  // namespace novact
