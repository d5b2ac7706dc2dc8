#include "hri/testkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hri::testkit {

Vec3 Rng::unit_vector() {
  // Marsaglia: uniform on the sphere.
  for (;;) {
    const double a = uniform(-1.0, 1.0);
    const double b = uniform(-1.0, 1.0);
    const double s = a * a + b * b;
    if (s >= 1.0 || s < 1e-12) continue;
    const double r = 2.0 * std::sqrt(1.0 - s);
    return {a * r, b * r, 1.0 - 2.0 * s};
  }
}

Eigen::Matrix3d Rng::rotation() {
  // Shoemake's uniform quaternion.
  const double u1 = uniform();
  const double u2 = uniform(0.0, 2.0 * std::numbers::pi);
  const double u3 = uniform(0.0, 2.0 * std::numbers::pi);
  const double a = std::sqrt(1.0 - u1);
  const double b = std::sqrt(u1);
  Eigen::Quaterniond q(a * std::cos(u2), a * std::sin(u2), b * std::sin(u3), b * std::cos(u3));
  q.normalize();
  return q.toRotationMatrix();
}

// ---- deixis ----------------------------------------------------------------

double sweep_line_distance(const Vec3& l1, const Vec3& l2, const Vec3& p, double spacing) {
  const Vec3 d = l2 - l1;
  const double len = d.norm();
  auto dist = [&](double t) { return (l1 + t * d - p).norm(); };

  // The foot of the perpendicular satisfies |t| * len <= |p - l1|.
  const double reach = (p - l1).norm() / len + 1.0;
  const double dt = spacing / len;
  const auto n = static_cast<std::size_t>(std::ceil(2.0 * reach / dt));
  double best_t = -reach;
  double best = dist(best_t);
  for (std::size_t i = 1; i <= n; ++i) {
    const double t = -reach + static_cast<double>(i) * dt;
    const double v = dist(t);
    if (v < best) {
      best = v;
      best_t = t;
    }
  }
  // Golden-section refinement inside the neighbouring cells.
  double lo = best_t - dt;
  double hi = best_t + dt;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100; ++it) {
    const double m1 = hi - g * (hi - lo);
    const double m2 = lo + g * (hi - lo);
    if (dist(m1) < dist(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return std::min(best, dist(0.5 * (lo + hi)));
}

long double projection_distance(const Vec3& l1, const Vec3& l2, const Vec3& p) {
  long double d[3], v[3];
  long double dd = 0.0L, vd = 0.0L;
  for (int a = 0; a < 3; ++a) {
    d[a] = static_cast<long double>(l2[a]) - l1[a];
    v[a] = static_cast<long double>(p[a]) - l1[a];
    dd += d[a] * d[a];
    vd += v[a] * d[a];
  }
  const long double t = vd / dd;
  long double s = 0.0L;
  for (int a = 0; a < 3; ++a) {
    const long double r = v[a] - t * d[a];
    s += r * r;
  }
  return std::sqrt(s);
}

int brute_force_target(const DeicticRay& ray, const Scene& scene, double tie_tolerance) {
  struct Cand {
    int index;
    long double dist;
  };
  std::vector<Cand> cands;
  for (const auto& o : scene.interactable) {
    cands.push_back({o.index, projection_distance(ray.l1, ray.l2, o.centroid)});
  }
  if (cands.empty()) return -1;
  long double best = cands.front().dist;
  for (const auto& c : cands) best = std::min(best, c.dist);
  int pick = -1;
  for (const auto& c : cands) {
    if (c.dist <= best + tie_tolerance && (pick < 0 || c.index < pick)) pick = c.index;
  }
  return pick;
}

SelectionCase random_selection_case(Rng& rng, int n, bool make_tie) {
  SelectionCase c;
  const Vec3 elbow = Vec3(0.0, 0.8, 0.4) + rng.vec(-0.1, 0.1);
  const Vec3 toward = Vec3(rng.uniform(-0.4, 0.4), rng.uniform(-0.3, 0.3), 0.05) - elbow;
  c.ray = DeicticRay::through(elbow, elbow + rng.uniform(0.2, 0.4) * toward.normalized());

  std::vector<StructuralObject> objects;
  for (int i = 0; i < n; ++i) {
    StructuralObject o;
    o.width = rng.uniform(0.02, 0.08);
    o.height = rng.uniform(0.02, 0.08);
    o.thickness = rng.uniform(0.03, 0.15);
    o.centroid = {rng.uniform(-0.5, 0.5), rng.uniform(-0.4, 0.4), rng.uniform(0.0, 0.3)};
    objects.push_back(o);
  }
  if (make_tie && n >= 2) {
    // Rotate the closest centroid about the ray: same distance, other place.
    std::size_t closest = 0;
    long double best = 1e300L;
    for (std::size_t i = 0; i < objects.size(); ++i) {
      const long double d = projection_distance(c.ray.l1, c.ray.l2, objects[i].centroid);
      if (d < best) {
        best = d;
        closest = i;
      }
    }
    const Vec3 u = (c.ray.l2 - c.ray.l1).normalized();
    const Vec3 rel = objects[closest].centroid - c.ray.l1;
    const Vec3 foot = c.ray.l1 + rel.dot(u) * u;
    const Vec3 r = objects[closest].centroid - foot;
    const double theta = rng.uniform(0.5, 2.0 * std::numbers::pi - 0.5);
    const Vec3 rotated =
        r * std::cos(theta) + u.cross(r) * std::sin(theta) + u * u.dot(r) * (1.0 - std::cos(theta));
    std::size_t other = static_cast<std::size_t>(rng.integer(0, n - 2));
    if (other >= closest) ++other;
    objects[other].centroid = foot + rotated;
    c.tie = true;
  }
  // A couple of wide objects that must never be selected.
  const int wide = rng.integer(0, 2);
  for (int i = 0; i < wide; ++i) {
    StructuralObject o;
    o.width = rng.uniform(0.15, 0.3);
    o.height = 0.1;
    o.thickness = 0.1;
    o.centroid = c.ray.l1 + rng.uniform(0.5, 1.0) * (c.ray.l2 - c.ray.l1).normalized();
    objects.push_back(o);
  }
  // Shuffle so index order is unrelated to generation order.
  for (std::size_t i = objects.size(); i > 1; --i) {
    std::swap(objects[i - 1], objects[static_cast<std::size_t>(rng.integer(0, static_cast<int>(i) - 1))]);
  }
  for (std::size_t i = 0; i < objects.size(); ++i) objects[i].index = static_cast<int>(i);
  EndEffectorState eff;
  eff.position = {0.0, 0.0, 0.5};
  c.scene = build_scene(objects, eff, 0.085);
  return c;
}

// ---- scene geometry --------------------------------------------------------

StreamingSummary streaming_summary(const PointCloud& cloud) {
  long double sum[3] = {0.0L, 0.0L, 0.0L};
  long double comp[3] = {0.0L, 0.0L, 0.0L};
  StreamingSummary s;
  s.min = Vec3::Constant(std::numeric_limits<double>::infinity());
  s.max = Vec3::Constant(-std::numeric_limits<double>::infinity());
  for (const auto& p : cloud.points) {
    for (int a = 0; a < 3; ++a) {
      const long double x = p[a];
      const long double t = sum[a] + x;
      comp[a] += std::fabs(sum[a]) >= std::fabs(x) ? (sum[a] - t) + x : (x - t) + sum[a];
      sum[a] = t;
      s.min[a] = std::min(s.min[a], p[a]);
      s.max[a] = std::max(s.max[a], p[a]);
    }
  }
  const auto n = static_cast<long double>(cloud.points.size());
  for (int a = 0; a < 3; ++a) s.mean[a] = static_cast<double>((sum[a] + comp[a]) / n);
  return s;
}

PointCloud box_surface_cloud(const Vec3& center, const Vec3& extents, int per_edge) {
  PointCloud cloud;
  cloud.frame = Frame::Base;
  const Vec3 half = 0.5 * extents;
  auto coord = [&](int axis, int i) {
    return center[axis] - half[axis] + extents[axis] * static_cast<double>(i) / (per_edge - 1);
  };
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3;
    const int v = (axis + 2) % 3;
    for (double side : {-1.0, 1.0}) {
      for (int i = 0; i < per_edge; ++i) {
        for (int j = 0; j < per_edge; ++j) {
          Vec3 p;
          p[axis] = center[axis] + side * half[axis];
          p[u] = coord(u, i);
          p[v] = coord(v, j);
          cloud.points.push_back(p);
        }
      }
    }
  }
  return cloud;
}

RigidTransform random_transform(Rng& rng, double max_translation) {
  return RigidTransform::make(rng.rotation(), rng.vec(-max_translation, max_translation));
}

// ---- swept volume ----------------------------------------------------------

SweepCase random_sweep_case(Rng& rng) {
  SweepCase c;
  c.start = rng.vec(-1.0, 1.0);
  c.end = rng.vec(-1.0, 1.0);
  c.moving_half = rng.vec(0.005, 0.1);
  const int n = rng.integer(1, 4);
  for (int i = 0; i < n; ++i) c.obstacles.push_back({rng.vec(-0.8, 0.8), rng.vec(0.02, 0.3)});

  const int mode = rng.integer(0, 5);
  if (mode <= 1) {
    // Slide along a face of one obstacle, offset by a small signed gap.
    static constexpr double kOffsets[] = {0.0, 0.0, 1e-12, -1e-12, 5e-7, -5e-7, 2e-6, 1e-4};
    const double offset = kOffsets[rng.integer(0, 7)];
    const Box3& o = c.obstacles[static_cast<std::size_t>(rng.integer(0, n - 1))];
    const int axis = rng.integer(0, 2);
    const double side = rng.chance(0.5) ? 1.0 : -1.0;
    const double plane = o.center[axis] + side * (o.half_extents[axis] + c.moving_half[axis] + offset);
    c.start[axis] = plane;
    c.end[axis] = plane;
    for (int a = 0; a < 3; ++a) {
      if (a == axis) continue;
      const double reach = o.half_extents[a] + c.moving_half[a];
      c.start[a] = o.center[a] + rng.uniform(-1.5, 1.5) * reach;
      c.end[a] = o.center[a] + rng.uniform(-1.5, 1.5) * reach;
    }
  } else if (mode == 2) {
    // Aim through an obstacle.
    const Box3& o = c.obstacles[static_cast<std::size_t>(rng.integer(0, n - 1))];
    c.end = o.center + (o.center - c.start) * rng.uniform(0.1, 1.0);
  } else if (mode == 3) {
    // Stop just short of a face along one axis.
    const Box3& o = c.obstacles[static_cast<std::size_t>(rng.integer(0, n - 1))];
    const int axis = rng.integer(0, 2);
    c.end = o.center;
    c.end[axis] = o.center[axis] - (o.half_extents[axis] + c.moving_half[axis]) -
                  (rng.chance(0.5) ? 0.0 : rng.uniform(1e-9, 1e-5));
    c.start = c.end;
    c.start[axis] -= rng.uniform(0.1, 0.5);
  }
  return c;
}

double box_gap(const Box3& a, const Box3& b) {
  double gap = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    gap = std::max(gap, std::abs(a.center[k] - b.center[k]) - (a.half_extents[k] + b.half_extents[k]));
  }
  return gap;
}

namespace {

double min_gap_on_segment(const Vec3& p0, const Vec3& p1, const Vec3& half, const Box3& obstacle) {
  auto gap = [&](double t) { return box_gap({p0 + t * (p1 - p0), half}, obstacle); };
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (gap(m1) <= gap(m2)) {
      hi = m2;
    } else {
      lo = m1;
    }
  }
  return std::min({gap(0.0), gap(1.0), gap(0.5 * (lo + hi))});
}

}  // namespace

SamplingVerdict sample_sweep(const SweepCase& c, double step) {
  SamplingVerdict v;
  v.min_gap = std::numeric_limits<double>::infinity();
  const Vec3 d = c.end - c.start;
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(d.norm() / step)));
  v.samples = n + 1;
  for (std::size_t k = 0; k < c.obstacles.size(); ++k) {
    const Box3& o = c.obstacles[k];
    bool hit = false;
    for (std::size_t i = 0; i <= n && !hit; ++i) {
      const Vec3 center = c.start + (static_cast<double>(i) / static_cast<double>(n)) * d;
      hit = box_gap({center, c.moving_half}, o) <= 0.0;
    }
    if (hit && !v.hit) {
      v.hit = true;
      v.obstacle = static_cast<int>(k);
    }
    v.min_gap = std::min(v.min_gap, min_gap_on_segment(c.start, c.end, c.moving_half, o));
  }
  return v;
}

SamplingVerdict sample_scene_sweep(const SceneSweep& sweep, double step) {
  SamplingVerdict total;
  total.min_gap = std::numeric_limits<double>::infinity();
  std::vector<Box3> boxes;
  for (const auto& o : sweep.obstacles) boxes.push_back(o.box);
  for (const auto& s : sweep.segments) {
    const SamplingVerdict v = sample_sweep({s.start, s.end, s.half_extents, boxes}, step);
    total.samples += v.samples;
    total.min_gap = std::min(total.min_gap, v.min_gap);
    if (v.hit && !total.hit) {
      total.hit = true;
      total.obstacle = sweep.obstacles[static_cast<std::size_t>(v.obstacle)].id;
    }
  }
  return total;
}

// ---- planning --------------------------------------------------------------

PlanningCase random_planning_case(Rng& rng, bool pour) {
  const PlannerConfig defaults;
  for (;;) {
    std::vector<StructuralObject> objects;
    auto make = [&](double w_lo, double w_hi, double d_lo, double d_hi) {
      StructuralObject o;
      o.width = rng.uniform(w_lo, w_hi);
      o.height = rng.uniform(0.03, 0.08);
      o.thickness = rng.uniform(d_lo, d_hi);
      o.centroid = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 0.5 * o.thickness};
      return o;
    };
    StructuralObject src = make(0.03, 0.08, 0.05, 0.15);
    StructuralObject dst = make(0.05, rng.chance(0.3) ? 0.25 : 0.08, 0.02, 0.12);
    const Vec3 src_half = 0.5 * Vec3(src.width, src.height, src.thickness);
    const double moving = std::max({pour ? src_half.norm() : src_half.maxCoeff(),
                                    defaults.gripper_half_extents.maxCoeff()}) + 0.01;

    auto footprint_apart = [](const StructuralObject& a, const StructuralObject& b, double margin) {
      return std::abs(a.centroid.x() - b.centroid.x()) > 0.5 * (a.width + b.width) + margin ||
             std::abs(a.centroid.y() - b.centroid.y()) > 0.5 * (a.height + b.height) + margin;
    };
    if (!footprint_apart(src, dst, moving) || (src.centroid - dst.centroid).head<2>().norm() < 0.2) {
      continue;
    }
    objects.push_back(src);
    objects.push_back(dst);
    const int extra = rng.integer(0, 3);
    for (int i = 0; i < extra; ++i) {
      StructuralObject o = make(0.03, 0.2, 0.05, rng.chance(0.4) ? 0.45 : 0.2);
      o.height = rng.uniform(0.03, 0.2);
      if (i == 0 && rng.chance(0.5)) {
        // Stand it in the way.
        const Vec3 mid = 0.5 * (src.centroid + dst.centroid);
        o.centroid.x() = mid.x() + rng.uniform(-0.03, 0.03);
        o.centroid.y() = mid.y() + rng.uniform(-0.03, 0.03);
      }
      if (!footprint_apart(o, src, moving) || !footprint_apart(o, dst, moving)) continue;
      objects.push_back(o);
    }

    std::vector<int> order(objects.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.integer(0, static_cast<int>(i) - 1))]);
    }
    for (std::size_t i = 0; i < objects.size(); ++i) objects[i].index = order[i];

    EndEffectorState eff;
    eff.position = defaults.home_position;
    eff.gripper_opening = 0.085;
    PlanningCase c;
    c.scene = build_scene(objects, eff, 0.085);
    c.intention.a1 = Verb::Pick;
    c.intention.t1 = objects[0].index;
    c.intention.a2 = pour ? Verb::Pour : Verb::Place;
    c.intention.t2 = objects[1].index;
    if (pour) c.intention.lambda = Metric{MetricKind::Angle, std::round(rng.uniform(30.0, 180.0))};
    return c;
  }
}

ActionSequence FaultInjectedPlanner::plan(const Intention& intention, const Scene& scene,
                                          const std::optional<PlannerFeedback>& feedback) {
  if (rng_.chance(q_)) return inner_.plan_ignoring_obstacles(intention, scene);
  return inner_.plan(intention, scene, feedback);
}

ActionSequence ScriptedPlanner::plan(const Intention&, const Scene& scene,
                                     const std::optional<PlannerFeedback>& feedback) {
  feedback_.push_back(feedback);
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(calls_), texts_.size() - 1);
  ++calls_;
  return parse_plan_response(
      texts_[i], PlanContext{scene.effector.position, PlannerConfig{}.home_position,
                             scene.gripper_max_width});
}

// ---- perception ------------------------------------------------------------

WorldSpec random_world(Rng& rng) {
  for (;;) {
    WorldSpec w;
    const int n = rng.integer(1, 6);
    for (int i = 0; i < n; ++i) {
      WorldBox b;
      b.id = 10 + i;
      b.extents = rng.vec(0.04, 0.15);
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        b.center = {rng.uniform(-0.25, 0.25), rng.uniform(-0.25, 0.25), 0.5 * b.extents.z()};
        placed = true;
        for (const auto& o : w.boxes) {
          const double gap = 0.05 + std::max(o.extents.z(), b.extents.z());
          if (std::abs(o.center.x() - b.center.x()) < 0.5 * (o.extents.x() + b.extents.x()) + gap &&
              std::abs(o.center.y() - b.center.y()) < 0.5 * (o.extents.y() + b.extents.y()) + gap) {
            placed = false;
            break;
          }
        }
      }
      if (placed) w.boxes.push_back(b);
    }
    const double range = rng.uniform(1.0, 2.0);
    const double elevation = rng.uniform(40.0, 65.0) * std::numbers::pi / 180.0;
    const double azimuth = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Vec3 target(0.0, 0.0, 0.05);
    const Vec3 eye = target + range * Vec3(std::cos(elevation) * std::cos(azimuth),
                                           std::cos(elevation) * std::sin(azimuth),
                                           std::sin(elevation));
    w.camera_pose = RigidTransform::look_at(eye, target);

    // Every corner must land inside the image with a small border.
    const RigidTransform to_cam = w.camera_pose.inverse();
    bool inside = true;
    for (const auto& b : w.boxes) {
      for (int corner = 0; corner < 8 && inside; ++corner) {
        Vec3 p = b.center;
        for (int a = 0; a < 3; ++a) p[a] += ((corner >> a) & 1 ? 0.5 : -0.5) * b.extents[a];
        const Vec3 q = to_cam.apply(p);
        const double u = w.camera.fx * q.x() / q.z() + w.camera.cx;
        const double v = w.camera.fy * q.y() / q.z() + w.camera.cy;
        inside = q.z() > 0.1 && u > 5 && v > 5 && u < w.camera.width - 5 && v < w.camera.height - 5;
      }
    }
    if (inside && !w.boxes.empty()) return w;
  }
}

}  // namespace hri::testkit
