#include <doctest.h>

#include <cmath>

#include "hri/error.hpp"
#include "hri/io.hpp"
#include "hri/perception.hpp"
#include "hri/segmentation.hpp"
#include "hri/testkit.hpp"

using namespace hri;

namespace {

bool throws_kind(ErrorKind kind, auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() == kind;
  }
  return false;
}

WorldSpec cube_on_axis() {
  WorldSpec w;
  w.camera_pose = RigidTransform::identity();  // base == camera
  w.boxes.push_back({1, Vec3(0, 0, 1.0), Vec3(0.1, 0.1, 0.1)});
  return w;
}

}  // namespace

TEST_CASE("rle: runs start with zeros, column-major") {
  // [6] is six zeros: the empty 2x3 mask. A full mask is [0, 6].
  const std::vector<std::int64_t> zeros{6};
  CHECK(rle_decode(zeros, 2, 3).count() == 0);
  const std::vector<std::int64_t> full{0, 6};
  CHECK(rle_decode(full, 2, 3).count() == 6);

  // width 2, height 3: column 0 is pixels 0..2, column 1 is 3..5.
  const std::vector<std::int64_t> col1{3, 3};
  const Mask m = rle_decode(col1, 2, 3);
  for (int v = 0; v < 3; ++v) {
    CHECK_FALSE(m.at(0, v));
    CHECK(m.at(1, v));
  }
  CHECK(rle_encode(m) == col1);
}

TEST_CASE("rle: malformed totals") {
  const std::vector<std::int64_t> short_by_one{2, 3};
  CHECK(throws_kind(ErrorKind::ProtocolError, [&] { rle_decode(short_by_one, 2, 3); }));
  const std::vector<std::int64_t> too_long{4, 3};
  CHECK(throws_kind(ErrorKind::ProtocolError, [&] { rle_decode(too_long, 2, 3); }));
  const std::vector<std::int64_t> negative{-1, 7};
  CHECK(throws_kind(ErrorKind::ProtocolError, [&] { rle_decode(negative, 2, 3); }));
}

TEST_CASE("rle: encode/decode round trip on random masks") {
  testkit::Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const int w = rng.integer(1, 9);
    const int h = rng.integer(1, 9);
    Mask m(w, h);
    for (auto& b : m.bits) b = rng.chance(0.4) ? 1 : 0;
    const auto runs = rle_encode(m);
    CHECK(rle_decode(runs, w, h) == m);
  }
}

TEST_CASE("decode_external drops labels and empty masks") {
  const nlohmann::json payload = {
      {"frame_id", "f1"},
      {"masks", {{{"rle", {0, 6}}, {"label", "cup"}}, {{"rle", {2, 2, 2}}, {"label", "???"}}, {{"rle", {6}}}}}};
  const SegmentationFrame f = decode_external(payload, 2, 3);
  CHECK(f.source == MaskSource::External);
  CHECK(f.masks.size() == 2);
  // Round trip through the wire format.
  const SegmentationFrame again = decode_external(encode_external("f1", f).dump(), 2, 3);
  CHECK(again.masks == f.masks);
  CHECK(encode_external("f1", f).dump().find("cup") == std::string::npos);

  CHECK(throws_kind(ErrorKind::ProtocolError, [] { decode_external(std::string("{not json"), 2, 3); }));
  CHECK(throws_kind(ErrorKind::ProtocolError,
                    [] { decode_external(nlohmann::json{{"masks", {{{"rle", {5}}}}}}, 2, 3); }));
}

TEST_CASE("drop_small_masks") {
  SegmentationFrame f;
  f.width = 10;
  f.height = 10;
  Mask small(10, 10), big(10, 10);
  for (int i = 0; i < 5; ++i) small.set(i, 0);
  for (int i = 0; i < 30; ++i) big.set(i % 10, i / 10);
  f.masks = {small, big};
  CHECK(drop_small_masks(f, 20).masks.size() == 1);
}

TEST_CASE("synthesize: empty world and occlusion") {
  WorldSpec w = cube_on_axis();
  w.boxes.clear();
  CHECK(synthesize(w).frame.masks.empty());

  w = cube_on_axis();
  w.boxes.push_back({2, Vec3(0, 0, 2.0), Vec3(0.05, 0.05, 0.05)});  // hidden behind box 1
  const SyntheticRender r = synthesize(w);
  REQUIRE(r.frame.masks.size() == 1);
  CHECK(r.box_ids == std::vector<int>{1});
}

TEST_CASE("synthesize: box behind the camera") {
  WorldSpec w = cube_on_axis();
  w.boxes[0].center = Vec3(0, 0, -1.0);
  CHECK(throws_kind(ErrorKind::InvalidInput, [&] { synthesize(w); }));
}

TEST_CASE("synthesize: cube on the optical axis") {
  // Visible face of a 10 cm cube at 1 m: the cloud is the front face, so the
  // recovered centroid sits half a side toward the camera and the depth
  // extent is near zero. Lateral values are exact up to pixel quantization.
  const auto objs = perceive_world(cube_on_axis());
  REQUIRE(objs.size() == 1);
  const auto& o = objs[0].object;
  CHECK(std::abs(o.centroid.x()) < 0.01);
  CHECK(std::abs(o.centroid.y()) < 0.01);
  CHECK(std::abs(o.width - 0.1) < 0.01);
  CHECK(std::abs(o.height - 0.1) < 0.01);
  CHECK(std::abs(o.centroid.z() - 0.95) < 1e-9);
}

TEST_CASE("synthetic masks are disjoint") {
  testkit::Rng rng(17);
  for (int i = 0; i < 20; ++i) {
    const SyntheticRender r = synthesize(testkit::random_world(rng));
    std::vector<int> owners(static_cast<std::size_t>(r.frame.width) * r.frame.height, 0);
    for (const auto& m : r.frame.masks) {
      CHECK(m.count() > 0);
      for (std::size_t p = 0; p < m.bits.size(); ++p) owners[p] += m.bits[p];
    }
    for (int n : owners) CHECK(n <= 1);
  }
}

TEST_CASE("reprojection left-inverse: synthesized pixels map back within half a pixel") {
  testkit::Rng rng(23);
  const WorldSpec w = testkit::random_world(rng);
  const SyntheticRender r = synthesize(w);
  const CameraIntrinsics& k = w.camera;
  for (const auto& m : r.frame.masks) {
    for (int v = 0; v < m.height; v += 7) {
      for (int u = 0; u < m.width; u += 7) {
        if (!m.at(u, v)) continue;
        Mask one(m.width, m.height);
        one.set(u, v);
        const Vec3 p = reproject(k, r.depth, one).points.at(0);
        CHECK(std::abs(k.fx * p.x() / p.z() + k.cx - u) <= 0.5);
        CHECK(std::abs(k.fy * p.y() / p.z() + k.cy - v) <= 0.5);
      }
    }
  }
}

TEST_CASE("world json round trip") {
  testkit::Rng rng(2);
  const WorldSpec w = testkit::random_world(rng);
  const WorldSpec back = world_from_json(to_json(w));
  REQUIRE(back.boxes.size() == w.boxes.size());
  CHECK(back.boxes[0].center == w.boxes[0].center);
  CHECK(back.camera_pose.rotation.isApprox(w.camera_pose.rotation, 1e-15));
}
