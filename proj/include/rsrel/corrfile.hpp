#pragma once

// Line-oriented correspondence files for externally matched data:
//
//   META focal <f> cx <cx> cy <cy> readout <seconds per row> height <rows>
//   IMU1 gx gy gz wx wy wz
//   IMU2 gx gy gz wx wy wz
//   CORR u1 v1 u2 v2
//
// `#` starts a comment. META, IMU1 and IMU2 come first and in this order;
// CORR lines follow, one per correspondence, in pixels.

#include "rsrel/sim.hpp"
#include "rsrel/sweep.hpp"

#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace rsrel {

struct CorrespondenceFile {
  CameraIntrinsics intrinsics;
  InertialMeasurement imu1, imu2;
  std::vector<PixelCorrespondence> pixels;

  std::vector<Correspondence> normalized() const { return to_normalized(pixels, intrinsics); }
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline InertialMeasurement parse_imu(const std::vector<std::string_view>& tok, int line) {
  if (tok.size() != 7) throw ParseError(line, std::string(tok[0]) + " needs 6 numbers");
  double v[6];
  for (int i = 0; i < 6; ++i) {
    try {
      v[i] = parse_double(tok[i + 1]);
    } catch (const InvalidInput& e) {
      throw ParseError(line, e.what());
    }
  }
  InertialMeasurement m;
  m.gravity = Vec3(v[0], v[1], v[2]);
  m.angular_velocity = Vec3(v[3], v[4], v[5]);
  return m;
}

}  // namespace detail

inline CorrespondenceFile parse_correspondence_file(std::istream& is) {
  CorrespondenceFile f;
  enum class Expect { Meta, Imu1, Imu2, Corr } expect = Expect::Meta;
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string_view s = raw;
    if (const auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    const auto tok = detail::split_ws(s);
    if (tok.empty()) continue;
    const std::string_view key = tok[0];
    switch (expect) {
      case Expect::Meta: {
        if (key != "META") throw ParseError(line, "expected META, found '" + std::string(key) + "'");
        if (tok.size() != 11) throw ParseError(line, "META needs focal, cx, cy, readout and height");
        const char* names[] = {"focal", "cx", "cy", "readout", "height"};
        double v[5];
        for (int i = 0; i < 5; ++i) {
          if (tok[1 + 2 * i] != names[i])
            throw ParseError(line, "expected '" + std::string(names[i]) + "' in META");
          try {
            v[i] = parse_double(tok[2 + 2 * i]);
          } catch (const InvalidInput& e) {
            throw ParseError(line, e.what());
          }
        }
        f.intrinsics.focal = v[0];
        f.intrinsics.principal_point = Vec2(v[1], v[2]);
        f.intrinsics.readout_time = v[3];
        if (!(v[4] >= 1.0) || v[4] != std::floor(v[4])) throw ParseError(line, "height must be a positive integer");
        f.intrinsics.height = static_cast<int>(v[4]);
        f.intrinsics.width = std::max(1, static_cast<int>(std::ceil(2.0 * v[1])));
        try {
          f.intrinsics.validate();
        } catch (const InvalidInput& e) {
          throw ParseError(line, e.what());
        }
        expect = Expect::Imu1;
        break;
      }
      case Expect::Imu1:
        if (key != "IMU1") throw ParseError(line, "expected IMU1, found '" + std::string(key) + "'");
        f.imu1 = detail::parse_imu(tok, line);
        expect = Expect::Imu2;
        break;
      case Expect::Imu2:
        if (key != "IMU2") throw ParseError(line, "expected IMU2, found '" + std::string(key) + "'");
        f.imu2 = detail::parse_imu(tok, line);
        expect = Expect::Corr;
        break;
      case Expect::Corr: {
        if (key != "CORR") throw ParseError(line, "expected CORR, found '" + std::string(key) + "'");
        if (tok.size() != 5) throw ParseError(line, "CORR needs u1 v1 u2 v2");
        double v[4];
        for (int i = 0; i < 4; ++i) {
          try {
            v[i] = parse_double(tok[i + 1]);
          } catch (const InvalidInput& e) {
            throw ParseError(line, e.what());
          }
        }
        f.pixels.push_back({Vec2(v[0], v[1]), Vec2(v[2], v[3]), static_cast<int>(f.pixels.size())});
        break;
      }
    }
  }
  if (expect == Expect::Meta) throw ParseError(line + 1, "missing META line");
  if (expect == Expect::Imu1) throw ParseError(line + 1, "missing IMU1 line");
  if (expect == Expect::Imu2) throw ParseError(line + 1, "missing IMU2 line");
  return f;
}

inline void write_correspondence_file(std::ostream& os, const CorrespondenceFile& f) {
  const auto& k = f.intrinsics;
  auto d = [](double x) { return format_double(x); };
  os << "META focal " << d(k.focal) << " cx " << d(k.principal_point.x()) << " cy " << d(k.principal_point.y())
     << " readout " << d(k.readout_time) << " height " << k.height << '\n';
  auto imu = [&](const char* name, const InertialMeasurement& m) {
    os << name << ' ' << d(m.gravity.x()) << ' ' << d(m.gravity.y()) << ' ' << d(m.gravity.z()) << ' '
       << d(m.angular_velocity.x()) << ' ' << d(m.angular_velocity.y()) << ' ' << d(m.angular_velocity.z())
       << '\n';
  };
  imu("IMU1", f.imu1);
  imu("IMU2", f.imu2);
  for (const auto& c : f.pixels)
    os << "CORR " << d(c.p1.x()) << ' ' << d(c.p1.y()) << ' ' << d(c.p2.x()) << ' ' << d(c.p2.y()) << '\n';
}

}  // namespace rsrel
