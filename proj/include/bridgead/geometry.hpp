// Copyright 2026 The BridgeAD Desk Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BRIDGEAD__GEOMETRY_HPP_
#define BRIDGEAD__GEOMETRY_HPP_

#include <array>
#include <cmath>
#include <numbers>

namespace bridgead
{

struct Vec2
{
  double x{0.0};
  double y{0.0};

  friend Vec2 operator+(const Vec2 & a, const Vec2 & b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(const Vec2 & a, const Vec2 & b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, const Vec2 & a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Vec2 &, const Vec2 &) = default;

  double norm() const { return std::hypot(x, y); }
  double dot(const Vec2 & o) const { return x * o.x + y * o.y; }
};

/// Wrap an angle into (-pi, pi]. -pi maps to pi.
double normalize_angle(double angle);

/// Rigid SE(2) transform; yaw always kept in (-pi, pi].
struct Pose2
{
  double x{0.0};
  double y{0.0};
  double yaw{0.0};

  Pose2() = default;
  Pose2(double x_, double y_, double yaw_) : x(x_), y(y_), yaw(normalize_angle(yaw_)) {}

  static Pose2 identity() { return {}; }

  Vec2 translation() const { return {x, y}; }
  friend bool operator==(const Pose2 &, const Pose2 &) = default;
};

/// Returns the pose that applies `b` first and then `a`.
Pose2 compose_se2(const Pose2 & a, const Pose2 & b);
Pose2 inverse_se2(const Pose2 & p);

/// Image of a point expressed in `frame` coordinates, in the parent frame.
Vec2 transform_point(const Pose2 & frame, const Vec2 & p);
/// Inverse of transform_point: parent-frame point into `frame` coordinates.
Vec2 inverse_transform_point(const Pose2 & frame, const Vec2 & p);
/// Rotate a free vector (velocity, offset) by the frame's yaw only.
Vec2 rotate(const Vec2 & v, double yaw);

/// Re-express a world pose in the coordinates of `frame`.
Pose2 relative_pose(const Pose2 & frame, const Pose2 & world_pose);

struct OrientedBox2
{
  Vec2 center;
  double length{1.0};  // along heading
  double width{1.0};
  double yaw{0.0};

  double area() const { return length * width; }
  /// Corners in counter-clockwise order starting front-left.
  std::array<Vec2, 4> corners() const;
  bool contains(const Vec2 & p, double margin = 0.0) const;
};

/// Separating-axis test. Touching boundaries count as overlap.
bool boxes_overlap(const OrientedBox2 & a, const OrientedBox2 & b);

/// Apply a rigid motion to a box.
OrientedBox2 transform_box(const Pose2 & frame, const OrientedBox2 & box);

}  // namespace bridgead

#endif  // BRIDGEAD__GEOMETRY_HPP_
