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

#include "bridgead/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace bridgead
{

double normalize_angle(double angle)
{
  constexpr double pi = std::numbers::pi;
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (!std::isfinite(angle)) {
    throw std::invalid_argument("normalize_angle: non-finite angle");
  }
  double a = std::fmod(angle, two_pi);  // in (-2pi, 2pi)
  if (a > pi) {
    a -= two_pi;
  } else if (a <= -pi) {
    a += two_pi;
  }
  // fmod/subtraction rounding can land exactly on -pi.
  if (a <= -pi) {
    a = pi;
  }
  return a;
}

Pose2 compose_se2(const Pose2 & a, const Pose2 & b)
{
  const double c = std::cos(a.yaw);
  const double s = std::sin(a.yaw);
  return Pose2{a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, a.yaw + b.yaw};
}

Pose2 inverse_se2(const Pose2 & p)
{
  const double c = std::cos(p.yaw);
  const double s = std::sin(p.yaw);
  return Pose2{-(c * p.x + s * p.y), s * p.x - c * p.y, -p.yaw};
}

Vec2 transform_point(const Pose2 & frame, const Vec2 & p)
{
  const double c = std::cos(frame.yaw);
  const double s = std::sin(frame.yaw);
  return {frame.x + c * p.x - s * p.y, frame.y + s * p.x + c * p.y};
}

Vec2 inverse_transform_point(const Pose2 & frame, const Vec2 & p)
{
  const double c = std::cos(frame.yaw);
  const double s = std::sin(frame.yaw);
  const double dx = p.x - frame.x;
  const double dy = p.y - frame.y;
  return {c * dx + s * dy, -s * dx + c * dy};
}

Vec2 rotate(const Vec2 & v, double yaw)
{
  const double c = std::cos(yaw);
  const double s = std::sin(yaw);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Pose2 relative_pose(const Pose2 & frame, const Pose2 & world_pose)
{
  return compose_se2(inverse_se2(frame), world_pose);
}

std::array<Vec2, 4> OrientedBox2::corners() const
{
  const Vec2 f = rotate({0.5 * length, 0.0}, yaw);
  const Vec2 l = rotate({0.0, 0.5 * width}, yaw);
  return {center + f + l, center - f + l, center - f - l, center + f - l};
}

bool OrientedBox2::contains(const Vec2 & p, double margin) const
{
  const Vec2 local = rotate(p - center, -yaw);
  return std::abs(local.x) <= 0.5 * length + margin && std::abs(local.y) <= 0.5 * width + margin;
}

namespace
{

// Projection interval of a box onto a unit axis.
std::pair<double, double> project(const OrientedBox2 & box, const Vec2 & axis)
{
  const double c = box.center.dot(axis);
  const double r = 0.5 * box.length * std::abs(std::cos(box.yaw) * axis.x + std::sin(box.yaw) * axis.y) +
                   0.5 * box.width * std::abs(-std::sin(box.yaw) * axis.x + std::cos(box.yaw) * axis.y);
  return {c - r, c + r};
}

}  // namespace

bool boxes_overlap(const OrientedBox2 & a, const OrientedBox2 & b)
{
  const std::array<Vec2, 4> axes = {
    Vec2{std::cos(a.yaw), std::sin(a.yaw)}, Vec2{-std::sin(a.yaw), std::cos(a.yaw)},
    Vec2{std::cos(b.yaw), std::sin(b.yaw)}, Vec2{-std::sin(b.yaw), std::cos(b.yaw)}};
  for (const auto & axis : axes) {
    const auto [a_lo, a_hi] = project(a, axis);
    const auto [b_lo, b_hi] = project(b, axis);
    if (a_hi < b_lo || b_hi < a_lo) {
      return false;
    }
  }
  return true;
}

OrientedBox2 transform_box(const Pose2 & frame, const OrientedBox2 & box)
{
  OrientedBox2 out = box;
  out.center = transform_point(frame, box.center);
  out.yaw = normalize_angle(box.yaw + frame.yaw);
  return out;
}

}  // namespace bridgead
