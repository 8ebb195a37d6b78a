#pragma once

// Joint states, transforms, forward kinematics over a robot description, and
// the proportional actuator-synchronization step.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "modstack/assembly/assembly.hpp"
#include "modstack/error.hpp"

namespace modstack::runtime {

struct JointState {
  std::string joint;
  double position = 0.0;
  std::optional<double> velocity;
  std::optional<double> effort;
  double stamp_ms = 0.0;
  friend bool operator==(const JointState&, const JointState&) = default;
};

using JointTarget = JointState;

struct Transform {
  std::string frame;
  std::string parent;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  double stamp_ms = 0.0;

  /// `this` (parent <- frame) followed by `child` (frame <- child.frame).
  Transform then(const Transform& child) const {
    Transform out;
    out.parent = parent;
    out.frame = child.frame;
    out.translation = translation + rotation * child.translation;
    out.rotation = (rotation * child.rotation).normalized();
    out.stamp_ms = std::max(stamp_ms, child.stamp_ms);
    return out;
  }
};

inline Eigen::Vector3d to_eigen(const assembly::Vec3& v) { return {v[0], v[1], v[2]}; }

/// Links from `from` (exclusive) down to `frame` (inclusive).
inline std::vector<const assembly::LinkDesc*> chain(const assembly::RobotDescription& d, const std::string& frame,
                                                    const std::string& from) {
  if (!d.link(frame)) throw Error(Errc::UnknownFrame, frame);
  if (!d.link(from)) throw Error(Errc::UnknownFrame, from);
  std::vector<const assembly::LinkDesc*> path;
  for (auto* l = d.link(frame); l->name != from; l = d.link(l->parent)) {
    path.push_back(l);
    if (l->parent.empty() || !d.link(l->parent)) throw Error(Errc::UnknownFrame, from + " is not an ancestor of " + frame);
  }
  std::reverse(path.begin(), path.end());
  return path;
}

/// Pose of `frame` in `from` (the description root by default). Each link
/// contributes its fixed offset followed by its joint rotation, if any.
inline Transform forward_kinematics(const assembly::RobotDescription& d, const std::map<std::string, double>& positions,
                                    const std::string& frame, std::optional<std::string> from = std::nullopt) {
  const auto base = from.value_or(d.root);
  Transform pose{base, base};
  for (const auto* l : chain(d, frame, base)) {
    Transform step{l->name, pose.frame, to_eigen(l->offset)};
    if (!l->joint.empty()) {
      const auto it = positions.find(l->joint);
      if (it == positions.end()) throw Error(Errc::MissingJointState, l->joint);
      step.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(it->second, to_eigen(l->axis).normalized()));
    }
    pose = pose.then(step);
  }
  pose.frame = frame;
  return pose;
}

inline Transform forward_kinematics(const assembly::RobotDescription& d, const std::vector<JointState>& states,
                                    const std::string& frame) {
  std::map<std::string, double> positions;
  double stamp = 0.0;
  for (const auto& s : states) {
    positions[s.joint] = s.position;
    stamp = std::max(stamp, s.stamp_ms);
  }
  auto t = forward_kinematics(d, positions, frame);
  t.stamp_ms = stamp;
  return t;
}

/// One synchronized step towards `targets`: every joint moves by its share of
/// the largest remaining distance, so all joints arrive on the same call.
inline std::vector<JointTarget> sync_targets(const std::vector<JointTarget>& targets,
                                             const std::map<std::string, JointState>& states, double max_step) {
  if (!(max_step > 0.0)) throw Error(Errc::NonPositiveStep, std::to_string(max_step));
  double largest = 0.0;
  for (const auto& t : targets) {
    const auto it = states.find(t.joint);
    if (it == states.end()) throw Error(Errc::UnknownJoint, t.joint);
    largest = std::max(largest, std::abs(t.position - it->second.position));
  }
  // a final step within rounding of max_step lands exactly on the goals
  const bool arrive = largest <= max_step * (1.0 + 1e-12);
  std::vector<JointTarget> out;
  for (const auto& t : targets) {
    const auto& s = states.at(t.joint);
    JointTarget cmd = t;
    if (!arrive) cmd.position = s.position + (t.position - s.position) * (max_step / largest);
    out.push_back(cmd);
  }
  return out;
}

}  // namespace modstack::runtime
