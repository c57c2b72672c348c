#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>

#include "asyndiff/data.hpp"

using namespace asyndiff;

TEST_CASE("shapes generation is deterministic") {
  ShapesDataset a = generate_shapes(8, 16, 42);
  ShapesDataset b = generate_shapes(8, 16, 42);
  REQUIRE(a.samples.size() == 8);
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].image.v == b.samples[i].image.v);
    CHECK(a.samples[i].caption == b.samples[i].caption);
    REQUIRE(a.samples[i].objects.size() == b.samples[i].objects.size());
    for (size_t o = 0; o < a.samples[i].objects.size(); ++o)
      CHECK(a.samples[i].objects[o].mask.v == b.samples[i].objects[o].mask.v);
  }
  ShapesDataset c = generate_shapes(8, 16, 43);
  bool any_diff = false;
  for (size_t i = 0; i < a.samples.size(); ++i)
    if (a.samples[i].image.v != c.samples[i].image.v) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("caption structure and object bookkeeping") {
  ShapesDataset ds = generate_shapes(50, 16, 7);
  for (const auto& s : ds.samples) {
    REQUIRE(!s.objects.empty());
    CHECK(s.caption.size() == 2 * s.objects.size() + 1);
    CHECK(s.caption.back() == vocab::kBackground);
    for (const auto& o : s.objects) {
      REQUIRE(o.token_indices.size() == 2);
      const int color = s.caption[o.token_indices[0]];
      const int shape = s.caption[o.token_indices[1]];
      CHECK(color >= vocab::kRed);
      CHECK(color <= vocab::kYellow);
      CHECK(shape >= vocab::kSquare);
      CHECK(shape <= vocab::kTriangle);
    }
  }
}

TEST_CASE("object areas stay within bounds and objects do not overlap") {
  for (int dims : {8, 16}) {
    ShapesDataset ds = generate_shapes(40, dims, 11);
    const size_t max_area = static_cast<size_t>(dims) * dims / 4;
    for (const auto& s : ds.samples) {
      Mask occupied(dims, dims, 0.0);
      for (const auto& o : s.objects) {
        size_t area = 0;
        for (size_t p = 0; p < o.mask.size(); ++p) {
          if (o.mask.v[p] == 0.0) continue;
          ++area;
          CHECK(occupied.v[p] == 0.0);  // no overlap with earlier objects
          occupied.v[p] = 1.0;
        }
        CHECK(area >= 9);
        CHECK(area <= max_area);
      }
    }
  }
}

TEST_CASE("object pixels carry the caption color") {
  ShapesDataset ds = generate_shapes(20, 16, 3);
  auto color_of = [](int tok) -> std::array<double, 3> {
    switch (tok) {
      case vocab::kRed: return {1.0, -1.0, -1.0};
      case vocab::kGreen: return {-1.0, 1.0, -1.0};
      case vocab::kBlue: return {-1.0, -1.0, 1.0};
      default: return {1.0, 1.0, -1.0};  // yellow
    }
  };
  for (const auto& s : ds.samples) {
    const size_t d = static_cast<size_t>(16) * 16;
    for (const auto& o : s.objects) {
      const auto col = color_of(s.caption[o.token_indices[0]]);
      for (size_t p = 0; p < o.mask.size(); ++p)
        if (o.mask.v[p] != 0.0)
          for (int ch = 0; ch < 3; ++ch)
            CHECK(s.image.v[ch * d + p] == col[ch]);
    }
    // background stays low amplitude
    Mask occupied(16, 16, 0.0);
    for (const auto& o : s.objects)
      for (size_t p = 0; p < o.mask.size(); ++p)
        if (o.mask.v[p] != 0.0) occupied.v[p] = 1.0;
    for (size_t p = 0; p < occupied.size(); ++p)
      if (occupied.v[p] == 0.0)
        for (int ch = 0; ch < 3; ++ch)
          CHECK(std::abs(s.image.v[ch * d + p]) <= 0.1 + 1e-12);
  }
}

TEST_CASE("dataset round-trips through disk at float precision") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "asyndiff_ds_test";
  fs::remove_all(dir);
  ShapesDataset ds = generate_shapes(6, 16, 99);
  write_shapes_dataset(ds, dir.string());
  ShapesDataset rt = read_shapes_dataset(dir.string());
  REQUIRE(rt.samples.size() == ds.samples.size());
  CHECK(rt.h == 16);
  CHECK(rt.seed == 99);
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    CHECK(rt.samples[i].caption == ds.samples[i].caption);
    REQUIRE(rt.samples[i].image.v.size() == ds.samples[i].image.v.size());
    for (size_t j = 0; j < ds.samples[i].image.v.size(); ++j)
      CHECK(rt.samples[i].image.v[j] ==
            static_cast<double>(static_cast<float>(ds.samples[i].image.v[j])));
    REQUIRE(rt.samples[i].objects.size() == ds.samples[i].objects.size());
    for (size_t o = 0; o < ds.samples[i].objects.size(); ++o) {
      CHECK(rt.samples[i].objects[o].mask.v ==
            ds.samples[i].objects[o].mask.v);
      CHECK(rt.samples[i].objects[o].token_indices ==
            ds.samples[i].objects[o].token_indices);
    }
  }
  fs::remove_all(dir);
}

TEST_CASE("reading a missing dataset fails") {
  CHECK_THROWS_AS(read_shapes_dataset("/nonexistent/asyndiff"),
                  std::runtime_error);
}

TEST_CASE("dims must divide 4") {
  CHECK_THROWS_AS(generate_shapes_sample(10, 1, 0), std::invalid_argument);
}

TEST_CASE("gaussian spec structures") {
  GaussianDataSpec iso = make_gaussian_spec(3, GaussianStructure::Isotropic,
                                            0.25, 5);
  CHECK(iso.mean.size() == 9);
  for (int i = 0; i < 9; ++i) {
    CHECK(iso.cov(i, i) == doctest::Approx(0.25 + 1e-8));
    for (int j = 0; j < 9; ++j)
      if (i != j) CHECK(iso.cov(i, j) == 0.0);
  }

  GaussianDataSpec sm = make_gaussian_spec(3, GaussianStructure::Smooth, 1.0, 5);
  // adjacent pixels: exp(-1/2)
  CHECK(sm.cov(0, 1) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
  // diagonal neighbor (distance sqrt(2)): exp(-1)
  CHECK(sm.cov(0, 4) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(sm.cov(0, 0) == doctest::Approx(1.0 + 1e-8));
  CHECK((sm.cov - sm.cov.transpose()).cwiseAbs().maxCoeff() == 0.0);

  GaussianDataSpec sm2 = make_gaussian_spec(3, GaussianStructure::Smooth, 1.0, 5);
  CHECK((sm.mean - sm2.mean).norm() == 0.0);
  GaussianDataSpec sm3 = make_gaussian_spec(3, GaussianStructure::Smooth, 1.0, 6);
  CHECK((sm.mean - sm3.mean).norm() > 0.0);
}
