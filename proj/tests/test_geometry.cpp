#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <unistd.h>

#include <png.h>

#include "dimal/geometry.hpp"
#include "oracles.hpp"

using namespace dimal;
using geometry::PointCloud;

namespace {

std::filesystem::path make_temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("dimal_test_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

void write_gray_png(const std::filesystem::path& file, int width, int height,
                    unsigned char value) {
  std::vector<unsigned char> buf(static_cast<std::size_t>(width) * height,
                                 value);
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_GRAY;
  REQUIRE(png_image_write_to_file(&image, file.string().c_str(), 0, buf.data(),
                                  0, nullptr));
}

}  // namespace

TEST_CASE("s-curve generator") {
  SUBCASE("empty cloud keeps ambient dimension") {
    const PointCloud cloud = geometry::gen_s_curve(0, 1);
    CHECK(cloud.size() == 0);
    CHECK(cloud.ambient_dim() == 3);
  }
  SUBCASE("points satisfy the parametrization identity") {
    const PointCloud cloud = geometry::gen_s_curve(2000, 7);
    for (int i = 0; i < cloud.size(); ++i) {
      const double x = cloud.points(i, 0);
      const double z = cloud.points(i, 2);
      const double residual = x * x + (std::abs(z) - 1.0) * (std::abs(z) - 1.0);
      CHECK(std::abs(residual - 1.0) <= 1e-12);
    }
  }
  SUBCASE("meta reproduces the points") {
    const PointCloud cloud = geometry::gen_s_curve(50, 3);
    REQUIRE(cloud.meta.rows() == 50);
    for (int i = 0; i < cloud.size(); ++i) {
      const double t = cloud.meta(i, 0);
      const double y = cloud.meta(i, 1);
      CHECK(cloud.points(i, 0) == std::sin(t));
      CHECK(cloud.points(i, 1) == y);
      CHECK(cloud.points(i, 2) == (t < 0 ? -1.0 : 1.0) * (std::cos(t) - 1.0));
      CHECK(std::abs(t) <= 1.5 * std::numbers::pi);
    }
  }
  SUBCASE("paper-scale sample count") {
    CHECK(geometry::gen_s_curve(8172, 0).size() == 8172);
  }
  SUBCASE("deterministic in the seed") {
    const PointCloud a = geometry::gen_s_curve(100, 42);
    const PointCloud b = geometry::gen_s_curve(100, 42);
    CHECK(a.points == b.points);
    CHECK(a.meta == b.meta);
    const PointCloud c = geometry::gen_s_curve(100, 43);
    CHECK(a.points != c.points);
  }
}

TEST_CASE("helical ribbon generator") {
  CHECK(geometry::gen_helical_ribbon(0, 1).size() == 0);
  CHECK(geometry::gen_helical_ribbon(8192, 5).size() == 8192);
  const PointCloud one = geometry::gen_helical_ribbon(1, 11);
  const double r =
      one.points(0, 0) * one.points(0, 0) + one.points(0, 1) * one.points(0, 1);
  CHECK(std::abs(r - 1.0) <= 1e-12);
  const PointCloud many = geometry::gen_helical_ribbon(200, 11);
  for (int i = 0; i < many.size(); ++i) {
    const double t = many.meta(i, 0);
    const double s = many.meta(i, 1);
    CHECK(t >= 0.0);
    CHECK(t <= 4.0 * std::numbers::pi);
    CHECK(many.points(i, 2) == 0.4 * t + s);
  }
}

TEST_CASE("swiss roll generator") {
  const PointCloud cloud = geometry::gen_swiss_roll(2000, 1);
  CHECK(geometry::gen_swiss_roll(0, 1).size() == 0);
  for (int i = 0; i < cloud.size(); ++i) {
    const double t = cloud.meta(i, 0);
    CHECK(t >= 1.5 * std::numbers::pi);
    CHECK(t <= 4.5 * std::numbers::pi);
    const double x = cloud.points(i, 0);
    const double z = cloud.points(i, 2);
    CHECK(std::abs(x * x + z * z - t * t) <= 1e-10 * std::max(1.0, t * t));
  }
}

TEST_CASE("horizon images") {
  SUBCASE("zero articulation fills exactly the lower half") {
    geometry::HorizonParams hp;  // alpha1 = alpha2 = 0
    const Eigen::VectorXd img = geometry::horizon_image(hp);
    REQUIRE(img.size() == 2500);
    for (int row = 0; row < 50; ++row)
      for (int col = 0; col < 50; ++col)
        CHECK(img(row * 50 + col) == (row < 25 ? 1.0 : 0.0));
  }
  SUBCASE("pixels are binary") {
    geometry::HorizonParams hp;
    hp.alpha1 = 0.7;
    hp.alpha2 = 0.3;
    const Eigen::VectorXd img = geometry::horizon_image(hp);
    for (Eigen::Index i = 0; i < img.size(); ++i)
      CHECK((img(i) == 0.0 || img(i) == 1.0));
  }
  SUBCASE("raising the horizon never clears a pixel") {
    Rng rng(99);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> psi(30);
      for (auto& v : psi) v = rng.uniform(-1.5, 1.5);
      const Eigen::VectorXd base = geometry::render_horizon_columns(psi, 30, 24);
      const double shift = rng.uniform(0.0, 0.5);
      for (auto& v : psi) v += shift;
      const Eigen::VectorXd raised =
          geometry::render_horizon_columns(psi, 30, 24);
      CHECK((raised - base).minCoeff() >= 0.0);
      CHECK(raised.sum() >= base.sum());
    }
  }
  SUBCASE("dataset draws amplitudes from the rectangle") {
    geometry::HorizonParams hp;
    hp.omega1 = 2.0;
    hp.omega2 = 4.0;
    geometry::Rect range{0.0, 0.75, 0.0, 0.75};
    const PointCloud cloud = geometry::gen_horizon_dataset(40, hp, range, 5);
    CHECK(cloud.ambient_dim() == 2500);
    for (int i = 0; i < cloud.size(); ++i) {
      CHECK(cloud.meta(i, 0) >= 0.0);
      CHECK(cloud.meta(i, 0) <= 0.75);
      CHECK(cloud.meta(i, 1) >= 0.0);
      CHECK(cloud.meta(i, 1) <= 0.75);
    }
    CHECK(geometry::gen_horizon_dataset(0, hp, range, 5).size() == 0);
  }
  SUBCASE("equal frequencies are rejected") {
    geometry::HorizonParams hp;
    hp.omega1 = hp.omega2 = 3.0;
    CHECK_THROWS_AS(geometry::horizon_image(hp), std::invalid_argument);
  }
}

TEST_CASE("fishbowl generator") {
  CHECK(geometry::gen_fishbowl(0, 1.0, 1).size() == 0);
  SUBCASE("points lie on the unit sphere") {
    const PointCloud cloud = geometry::gen_fishbowl(500, 1.0, 2);
    for (int i = 0; i < cloud.size(); ++i)
      CHECK(std::abs(cloud.points.row(i).norm() - 1.0) <= 1e-12);
  }
  SUBCASE("rim_fraction truncates the bowl height") {
    const PointCloud cloud = geometry::gen_fishbowl(500, 0.6, 2);
    CHECK(cloud.points.col(2).maxCoeff() <= -0.4 + 1e-12);
    CHECK(cloud.points.col(2).minCoeff() >= -1.0);
  }
  SUBCASE("density grows toward the rim") {
    const PointCloud cloud = geometry::gen_fishbowl(50000, 1.0, 3);
    // Equal-height bands have equal sphere area, so band counts trace the
    // density profile 1/(1-z)^2 directly.
    std::array<int, 10> counts{};
    for (int i = 0; i < cloud.size(); ++i) {
      const double z = cloud.points(i, 2);
      const int bin = std::min(9, static_cast<int>((z + 1.0) * 10.0));
      ++counts[static_cast<std::size_t>(bin)];
    }
    for (int b = 0; b + 1 < 10; ++b)
      CHECK(counts[static_cast<std::size_t>(b + 1)] >=
            static_cast<int>(0.95 * counts[static_cast<std::size_t>(b)]));
    CHECK(counts[9] > 2 * counts[0]);
  }
  CHECK_THROWS_AS(geometry::gen_fishbowl(10, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(geometry::gen_fishbowl(10, 1.5, 1), std::invalid_argument);
}

TEST_CASE("knn graph construction") {
  SUBCASE("collinear example with union symmetrization") {
    PointCloud cloud;
    cloud.points.resize(3, 1);
    cloud.points << 0.0, 1.0, 3.0;
    const auto g = geometry::build_knn_graph(cloud, 1);
    REQUIRE(g.edges.size() == 2);
    CHECK(g.edges[0].i == 0);
    CHECK(g.edges[0].j == 1);
    CHECK(g.edges[0].w == 1.0);
    CHECK(g.edges[1].i == 1);
    CHECK(g.edges[1].j == 2);
    CHECK(g.edges[1].w == 2.0);
  }
  SUBCASE("k = N-1 yields the complete graph") {
    Rng rng(4);
    PointCloud cloud;
    cloud.points = oracles::random_config(rng, 12, 3);
    const auto g = geometry::build_knn_graph(cloud, 11);
    CHECK(g.edges.size() == 12 * 11 / 2);
  }
  SUBCASE("weights are exact Euclidean distances") {
    Rng rng(5);
    PointCloud cloud;
    cloud.points = oracles::random_config(rng, 40, 4);
    const auto g = geometry::build_knn_graph(cloud, 6);
    for (const auto& e : g.edges) {
      const double direct = (cloud.points.row(e.i) - cloud.points.row(e.j)).norm();
      CHECK(std::abs(e.w - direct) <= 1e-12);
    }
  }
  SUBCASE("matches brute force on random clouds") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 5 + rng.uniform_int(46);
      const int k = 1 + rng.uniform_int(std::min(n - 1, 8));
      PointCloud cloud;
      cloud.points = oracles::random_config(rng, n, 1 + rng.uniform_int(4));
      const auto g = geometry::build_knn_graph(cloud, k);
      std::vector<std::pair<int, int>> got;
      for (const auto& e : g.edges) got.emplace_back(e.i, e.j);
      CHECK(got == oracles::brute_force_knn_pairs(cloud.points, k));
    }
  }
  SUBCASE("k out of range fails") {
    PointCloud cloud;
    cloud.points = Eigen::MatrixXd::Zero(3, 2);
    cloud.points << 0, 0, 1, 0, 2, 0;
    CHECK_THROWS_AS(geometry::build_knn_graph(cloud, 0), std::invalid_argument);
    CHECK_THROWS_AS(geometry::build_knn_graph(cloud, 3), std::invalid_argument);
  }
  SUBCASE("paper datasets connect at default k") {
    CHECK(geometry::build_knn_graph(geometry::gen_s_curve(1000, 1), 10).connected());
    CHECK(geometry::build_knn_graph(geometry::gen_helical_ribbon(1000, 2), 10)
              .connected());
    CHECK(geometry::build_knn_graph(geometry::gen_swiss_roll(1000, 3), 10)
              .connected());
    geometry::HorizonParams hp;
    hp.omega1 = 2.0;
    hp.omega2 = 4.0;
    CHECK(geometry::build_knn_graph(
              geometry::gen_horizon_dataset(300, hp, geometry::Rect{}, 4), 8)
              .connected());
  }
}

TEST_CASE("image directory loading") {
  const auto dir = make_temp_dir("png");
  SUBCASE("empty directory reports no images") {
    CHECK_THROWS_WITH_AS(geometry::load_image_directory(dir),
                         doctest::Contains("no images found"),
                         std::runtime_error);
  }
  SUBCASE("missing directory fails") {
    CHECK_THROWS_AS(geometry::load_image_directory(dir / "nope"),
                    std::invalid_argument);
  }
  SUBCASE("single all-white image") {
    write_gray_png(dir / "white.png", 4, 4, 255);
    const PointCloud cloud = geometry::load_image_directory(dir);
    REQUIRE(cloud.size() == 1);
    REQUIRE(cloud.ambient_dim() == 16);
    CHECK(cloud.points.minCoeff() == 1.0);
  }
  SUBCASE("files are ordered by name and dimension-checked") {
    write_gray_png(dir / "b.png", 3, 2, 128);
    write_gray_png(dir / "a.png", 3, 2, 0);
    const PointCloud cloud = geometry::load_image_directory(dir);
    REQUIRE(cloud.size() == 2);
    CHECK(cloud.points(0, 0) == 0.0);            // a.png first
    CHECK(cloud.points(1, 0) == doctest::Approx(128.0 / 255.0));
    write_gray_png(dir / "c.png", 5, 2, 7);
    CHECK_THROWS_WITH_AS(geometry::load_image_directory(dir),
                         doctest::Contains("c.png"), std::runtime_error);
  }
  SUBCASE("undecodable file is named") {
    std::ofstream(dir / "broken.png") << "not a png";
    CHECK_THROWS_WITH_AS(geometry::load_image_directory(dir),
                         doctest::Contains("broken.png"), std::runtime_error);
  }
  std::filesystem::remove_all(dir);
}
