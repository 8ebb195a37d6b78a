#pragma once

// Beginner API: drive one module's joints by name without writing a
// component. A thin layer over the joint key bindings and sync_targets.

#include <map>
#include <string>
#include <vector>

#include "modstack/runtime/cores.hpp"

namespace modstack::runtime::api {

class Joints {
 public:
  /// Watches and commands the joints of `instance` from `node`.
  Joints(Network& net, NodeId node, const std::string& instance) : net_(net) {
    session_ = net.open_session(node, "api/" + instance);
    targets_ = net.declare_endpoint(session_, fabric::EndpointKind::publisher,
                                    KeyExpr::parse("joints/" + instance + "/*/target"));
    net.declare_endpoint(session_, fabric::EndpointKind::subscriber, KeyExpr::parse("joints/" + instance + "/*/state"),
                         [this](const Sample& s) {
                           auto st = decode_joint(s.payload);
                           states_[st.joint] = st;
                         });
  }
  ~Joints() { net_.close_session(session_); }
  Joints(const Joints&) = delete;
  Joints& operator=(const Joints&) = delete;

  /// Latest reported position of every joint heard from so far.
  std::map<std::string, double> positions() const {
    std::map<std::string, double> out;
    for (const auto& [j, s] : states_) out[j] = s.position;
    return out;
  }

  /// Sends goals; the module's joint manager synchronizes the motion.
  void go_to(const std::map<std::string, double>& goals) {
    for (const auto& [j, p] : goals) {
      JointTarget t{j, p, {}, {}, net_.now().count() / 1000.0};
      net_.publish(targets_, encode(t), fabric::SampleKind::put, KeyExpr::parse(joint_key(j, "target")));
    }
  }

  /// The next synchronized step towards `goals` from the latest states.
  std::vector<JointTarget> preview_step(const std::map<std::string, double>& goals, double max_step) const {
    std::vector<JointTarget> targets;
    for (const auto& [j, p] : goals) targets.push_back(JointTarget{j, p, {}, {}, 0.0});
    return sync_targets(targets, states_, max_step);
  }

  /// True once every goal is within `tolerance` rad.
  bool reached(const std::map<std::string, double>& goals, double tolerance = 1e-3) const {
    for (const auto& [j, p] : goals) {
      auto it = states_.find(j);
      if (it == states_.end() || std::abs(it->second.position - p) > tolerance) return false;
    }
    return true;
  }

 private:
  Network& net_;
  fabric::SessionId session_{};
  fabric::EndpointId targets_{};
  std::map<std::string, JointState> states_;
};

}  // namespace modstack::runtime::api
