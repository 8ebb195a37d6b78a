#pragma once

// Little binary codecs for the payloads components exchange.

#include <cstdint>
#include <cstring>
#include <string>

#include "modstack/error.hpp"
#include "modstack/fabric/types.hpp"
#include "modstack/runtime/kinematics.hpp"

namespace modstack::runtime {

using fabric::Bytes;

class Writer {
 public:
  Writer& f64(double v) {
    std::uint8_t b[8];
    std::memcpy(b, &v, 8);
    out_.insert(out_.end(), b, b + 8);
    return *this;
  }
  Writer& str(const std::string& s) {
    out_.push_back(static_cast<std::uint8_t>(std::min<std::size_t>(s.size(), 255)));
    out_.insert(out_.end(), s.begin(), s.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(s.size(), 255)));
    return *this;
  }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(const Bytes& in) : in_(in) {}
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, in_.data() + at_, 8);
    at_ += 8;
    return v;
  }
  std::string str() {
    need(1);
    const std::size_t n = in_[at_++];
    need(n);
    std::string s(in_.begin() + static_cast<std::ptrdiff_t>(at_), in_.begin() + static_cast<std::ptrdiff_t>(at_ + n));
    at_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (at_ + n > in_.size()) throw Error(Errc::InvalidDocument, "truncated payload");
  }
  const Bytes& in_;
  std::size_t at_ = 0;
};

/// position, velocity, effort, stamp; absent optionals travel as NaN.
inline Bytes encode(const JointState& s) {
  return Writer{}
      .str(s.joint)
      .f64(s.position)
      .f64(s.velocity.value_or(std::nan("")))
      .f64(s.effort.value_or(std::nan("")))
      .f64(s.stamp_ms)
      .take();
}

inline JointState decode_joint(const Bytes& b) {
  Reader r(b);
  JointState s;
  s.joint = r.str();
  s.position = r.f64();
  if (const double v = r.f64(); !std::isnan(v)) s.velocity = v;
  if (const double e = r.f64(); !std::isnan(e)) s.effort = e;
  s.stamp_ms = r.f64();
  return s;
}

inline Bytes encode(const Transform& t) {
  Writer w;
  w.str(t.parent).str(t.frame);
  for (int i = 0; i < 3; ++i) w.f64(t.translation[i]);
  w.f64(t.rotation.w()).f64(t.rotation.x()).f64(t.rotation.y()).f64(t.rotation.z()).f64(t.stamp_ms);
  return w.take();
}

inline Transform decode_transform(const Bytes& b) {
  Reader r(b);
  Transform t;
  t.parent = r.str();
  t.frame = r.str();
  for (int i = 0; i < 3; ++i) t.translation[i] = r.f64();
  const double w = r.f64(), x = r.f64(), y = r.f64(), z = r.f64();
  t.rotation = Eigen::Quaterniond(w, x, y, z);
  t.stamp_ms = r.f64();
  return t;
}

inline Bytes encode_text(const std::string& s) { return Bytes(s.begin(), s.end()); }
inline std::string decode_text(const Bytes& b) { return std::string(b.begin(), b.end()); }

}  // namespace modstack::runtime
