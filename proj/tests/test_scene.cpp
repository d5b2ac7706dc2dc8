#include <doctest.h>

#include <cmath>
#include <limits>

#include "hri/error.hpp"
#include "hri/scene.hpp"
#include "hri/testkit.hpp"

using namespace hri;

namespace {

Mask full_mask(int w, int h) {
  Mask m(w, h);
  for (auto& b : m.bits) b = 1;
  return m;
}

void require_error(ErrorKind kind, auto&& fn) {
  try {
    fn();
    FAIL("expected " << to_string(kind));
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

}  // namespace

TEST_CASE("reproject: identity-scale pinhole") {
  CameraIntrinsics k{1.0, 1.0, 0.0, 0.0, 4, 5};
  DepthImage depth(4, 5);
  depth.at(2, 3) = 1.5;
  Mask mask(4, 5);
  mask.set(2, 3);
  const PointCloud c = reproject(k, depth, mask);
  REQUIRE(c.points.size() == 1);
  CHECK(c.points[0].isApprox(Vec3(3.0, 4.5, 1.5)));
  CHECK(c.frame == Frame::Camera);
}

TEST_CASE("reproject: principal point lands on the optical axis") {
  const CameraIntrinsics k{525.0, 525.0, 320.0, 240.0, 640, 480};
  DepthImage depth(640, 480, 0.0);
  depth.at(320, 240) = 0.77;
  Mask mask(640, 480);
  mask.set(320, 240);
  const PointCloud c = reproject(k, depth, mask);
  REQUIRE(c.points.size() == 1);
  CHECK(c.points[0].x() == 0.0);
  CHECK(c.points[0].y() == 0.0);
  CHECK(c.points[0].z() == 0.77);
}

TEST_CASE("reproject: invalid depth is skipped and counted") {
  CameraIntrinsics k{1.0, 1.0, 0.0, 0.0, 2, 2};
  DepthImage depth(2, 2, 1.0);
  depth.at(0, 0) = 0.0;
  depth.at(1, 1) = std::numeric_limits<double>::quiet_NaN();
  std::size_t skipped = 0;
  const PointCloud c = reproject(k, depth, full_mask(2, 2), &skipped);
  CHECK(c.points.size() == 2);
  CHECK(skipped == 2);
}

TEST_CASE("reproject: errors") {
  CameraIntrinsics k{1.0, 1.0, 0.0, 0.0, 2, 2};
  require_error(ErrorKind::InvalidInput, [&] { reproject(k, DepthImage(3, 2, 1.0), full_mask(2, 2)); });
  require_error(ErrorKind::EmptyCluster, [&] { reproject(k, DepthImage(2, 2, 0.0), full_mask(2, 2)); });
}

TEST_CASE("transform_points") {
  PointCloud c;
  c.points = {Vec3::Zero(), Vec3(1, 2, 3)};
  const PointCloud same = transform_points(RigidTransform::identity(), c);
  CHECK(same.frame == Frame::Base);
  CHECK(same.points[1] == c.points[1]);

  RigidTransform t;
  t.translation = {1, 0, 0};
  CHECK(transform_points(t, c).points[0] == Vec3(1, 0, 0));

  require_error(ErrorKind::InvalidInput, [&] { transform_points(t, same); });
}

TEST_CASE("transform_points: centroid equivariance on random transforms") {
  testkit::Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    PointCloud c;
    for (int k = 0; k < 50; ++k) c.points.push_back(rng.vec(-1, 1));
    const RigidTransform t = testkit::random_transform(rng);
    const Vec3 a = summarize(transform_points(t, c), 0).centroid;
    const Vec3 b = t.apply(summarize(c, 0).centroid);
    CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("RigidTransform::make rejects non-rotations") {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 0) = -1.0;
  require_error(ErrorKind::InvalidInput, [&] { RigidTransform::make(m, Vec3::Zero()); });
}

TEST_CASE("summarize: worked examples") {
  PointCloud c;
  c.frame = Frame::Base;
  c.points = {{0, 0, 0}, {2, 0, 0}, {1, 3, 0}};
  CHECK(summarize(c, 0).centroid.isApprox(Vec3(1, 1, 0)));

  c.points.clear();
  for (int i = 0; i < 8; ++i) c.points.push_back({i & 1 ? 2.0 : 0.0, i & 2 ? 3.0 : 0.0, i & 4 ? 1.0 : 0.0});
  const StructuralObject o = summarize(c, 7);
  CHECK(o.index == 7);
  CHECK(o.width == 2.0);
  CHECK(o.height == 3.0);
  CHECK(o.thickness == 1.0);
  CHECK(o.centroid.isApprox(Vec3(1, 1.5, 0.5)));

  require_error(ErrorKind::EmptyCluster, [] { summarize(PointCloud{}, 0); });
}

TEST_CASE("summarize: z-up convention measures height on z") {
  PointCloud c;
  c.points = {{0, 0, 0}, {0.1, 0.2, 0.3}};
  const StructuralObject o = summarize(c, 0, AxisConvention::z_up());
  CHECK(o.width == doctest::Approx(0.1));
  CHECK(o.height == doctest::Approx(0.3));
  CHECK(o.thickness == doctest::Approx(0.2));
}

TEST_CASE("summarize: 1000 random points vs streaming oracle, centroid containment") {
  testkit::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    PointCloud c;
    for (int i = 0; i < 1000; ++i) c.points.push_back(rng.vec(-3, 3));
    const StructuralObject o = summarize(c, 0);
    const auto s = testkit::streaming_summary(c);
    CHECK((o.centroid - s.mean).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(o.width - (s.max.x() - s.min.x())) == 0.0);
    CHECK(std::abs(o.height - (s.max.y() - s.min.y())) == 0.0);
    CHECK(std::abs(o.thickness - (s.max.z() - s.min.z())) == 0.0);
    for (int k = 0; k < 3; ++k) {
      CHECK(s.min[k] <= o.centroid[k]);
      CHECK(o.centroid[k] <= s.max[k]);
    }
  }
}

TEST_CASE("build_scene: gripper-width split") {
  auto obj = [](int i, double w) {
    StructuralObject o;
    o.index = i;
    o.width = w;
    return o;
  };
  std::vector<StructuralObject> one{obj(0, 0.20)};
  Scene s = build_scene(one, {}, 0.08);
  CHECK(s.interactable.empty());
  CHECK(s.obstacles.size() == 1);

  CHECK(build_scene({}, {}, 0.08).all_objects().empty());

  std::vector<StructuralObject> two{obj(0, 0.05), obj(1, 0.10)};
  s = build_scene(two, {}, 0.08);
  CHECK(s.interactable.size() == 1);
  CHECK(s.interactable[0].index == 0);
  CHECK(s.obstacles[0].index == 1);
  CHECK(s.is_interactable(0));
  CHECK_FALSE(s.is_interactable(1));

  // Exactly at the limit is still graspable.
  std::vector<StructuralObject> edge{obj(0, 0.08)};
  CHECK(build_scene(edge, {}, 0.08).interactable.size() == 1);

  std::vector<StructuralObject> dup{obj(3, 0.05), obj(3, 0.06)};
  require_error(ErrorKind::InvalidInput, [&] { build_scene(dup, {}, 0.08); });
}

TEST_CASE("DepthImage::from_units converts millimetres") {
  const std::vector<std::uint16_t> raw{1000, 0, 2500, 1};
  const DepthImage d = DepthImage::from_units(2, 2, raw, 0.001);
  CHECK(d.at(0, 0) == doctest::Approx(1.0));
  CHECK(d.at(1, 0) == 0.0);
  CHECK(d.at(0, 1) == doctest::Approx(2.5));
}
