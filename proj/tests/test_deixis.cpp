#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hri/deixis.hpp"
#include "hri/error.hpp"
#include "hri/testkit.hpp"

using namespace hri;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidInput;
}

StructuralObject object_at(int index, const Vec3& c, double w = 0.05) {
  StructuralObject o;
  o.index = index;
  o.width = o.height = o.thickness = w;
  o.centroid = c;
  return o;
}

}  // namespace

TEST_CASE("forearm_ray") {
  SkeletonFrame s;
  s.joints["right_elbow"] = Vec3::Zero();
  s.joints["right_wrist"] = Vec3(0.3, 0, 0);
  const DeicticRay r = forearm_ray(s);
  CHECK(r.l1 == Vec3::Zero());
  CHECK(r.l2 == Vec3(0.3, 0, 0));

  SkeletonFrame missing;
  missing.joints["right_elbow"] = Vec3::Zero();
  CHECK(kind_of([&] { forearm_ray(missing); }) == ErrorKind::MissingJoint);

  s.joints["right_wrist"] = Vec3::Zero();
  CHECK(kind_of([&] { forearm_ray(s); }) == ErrorKind::DegenerateRay);
}

TEST_CASE("point_line_distance: worked examples") {
  const DeicticRay x = DeicticRay::through(Vec3::Zero(), Vec3::UnitX());
  CHECK(point_line_distance(x, Vec3(5, 3, 4)) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(point_line_distance(x, Vec3(-7, 0, 0)) == 0.0);
}

TEST_CASE("point_line_distance: parameter-sweep oracle and invariances") {
  testkit::Rng rng(99);
  for (int i = 0; i < 300; ++i) {
    const Vec3 l1 = rng.vec(-1, 1);
    const Vec3 l2 = l1 + rng.unit_vector() * rng.uniform(0.1, 1.0);
    const Vec3 p = rng.vec(-2, 2);
    const DeicticRay r = DeicticRay::through(l1, l2);
    const double d = point_line_distance(r, p);
    CHECK(std::abs(d - testkit::sweep_line_distance(l1, l2, p)) <= 1e-3);
    CHECK(std::abs(d - static_cast<double>(testkit::projection_distance(l1, l2, p))) <= 1e-12);
    const Vec3 shift = rng.vec(-5, 5);
    CHECK(std::abs(point_line_distance(DeicticRay::through(l1 + shift, l2 + shift), p + shift) - d) <= 1e-9);
    CHECK(std::abs(point_line_distance(DeicticRay::through(l2, l1), p) - d) <= 1e-9);
  }
}

TEST_CASE("select_target: two clusters 20 cm apart") {
  std::vector<StructuralObject> objs{object_at(0, {0.4, -0.1, 0.05}), object_at(1, {0.4, 0.1, 0.05})};
  const Scene s = build_scene(objs, {}, 0.085);
  const Vec3 elbow(0, 0.5, 0.3);
  const TargetSelection sel = select_target(DeicticRay::through(elbow, elbow + 0.3 * (objs[1].centroid - elbow).normalized()), s);
  CHECK(sel.index == 1);
  CHECK(sel.distance <= 1e-12);
  CHECK(sel.distances.size() == 2);
}

TEST_CASE("select_target: tie resolves to the lowest index") {
  std::vector<StructuralObject> objs{object_at(4, {1, 1, 0}), object_at(2, {1, -1, 0})};
  const Scene s = build_scene(objs, {}, 0.085);
  const TargetSelection sel = select_target(DeicticRay::through(Vec3::Zero(), Vec3::UnitX()), s);
  CHECK(sel.index == 2);
}

TEST_CASE("select_target: obstacles are never selected; no candidates") {
  std::vector<StructuralObject> objs{object_at(0, {1, 0, 0}, 0.3), object_at(1, {1, 2, 0})};
  Scene s = build_scene(objs, {}, 0.085);
  CHECK(select_target(DeicticRay::through(Vec3::Zero(), Vec3::UnitX()), s).index == 1);
  std::vector<StructuralObject> big{object_at(0, {1, 0, 0}, 0.3)};
  s = build_scene(big, {}, 0.085);
  CHECK(kind_of([&] { select_target(DeicticRay::through(Vec3::Zero(), Vec3::UnitX()), s); }) ==
        ErrorKind::NoCandidates);
}

TEST_CASE("select_target: forward-only flag") {
  std::vector<StructuralObject> objs{object_at(0, {-1, 0, 0}), object_at(1, {2, 0.3, 0})};
  const Scene s = build_scene(objs, {}, 0.085);
  const DeicticRay r = DeicticRay::through(Vec3::Zero(), Vec3(0.3, 0, 0));
  CHECK(select_target(r, s).index == 0);
  SelectionOptions fwd;
  fwd.forward_only = true;
  CHECK(select_target(r, s, fwd).index == 1);
}

TEST_CASE("select_target: brute-force agreement including ties") {
  testkit::Rng rng(1234);
  int ties = 0;
  for (int i = 0; i < 500; ++i) {
    const auto c = testkit::random_selection_case(rng, rng.integer(2, 9), i % 4 == 0);
    ties += c.tie;
    CHECK(select_target(c.ray, c.scene).index == testkit::brute_force_target(c.ray, c.scene));
  }
  CHECK(ties > 50);
}

TEST_CASE("select_target: permutation invariance on physical identity") {
  testkit::Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto c = testkit::random_selection_case(rng, rng.integer(2, 9), false);
    const TargetSelection base = select_target(c.ray, c.scene);
    const Vec3 picked = c.scene.find(base.index)->centroid;

    Scene shuffled = c.scene;
    std::vector<int> perm(c.scene.interactable.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    for (std::size_t k = 0; k < perm.size(); ++k) {
      shuffled.interactable[k] = c.scene.interactable[static_cast<std::size_t>(perm[k])];
      shuffled.interactable[k].index = static_cast<int>(k) + 100;
    }
    const TargetSelection again = select_target(c.ray, shuffled);
    CHECK(shuffled.find(again.index)->centroid == picked);
  }
}
