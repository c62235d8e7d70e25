#include <doctest.h>

#include <map>
#include <sstream>

#include "stfmm/geometry.hpp"

using namespace stfmm;

TEST_CASE("cube surface with one subdivision") {
  const TriMesh m = generate_cube_surface(1, {}, 0.75);
  CHECK(m.n_triangles() == 12);
  CHECK(m.n_vertices() == 8);
  double area = 0.0;
  for (std::size_t i = 0; i < m.n_triangles(); ++i) area += m.area(i);
  CHECK(area == doctest::Approx(6.0 * 1.5 * 1.5).epsilon(1e-14));
}

TEST_CASE("cube surface with four subdivisions") {
  const TriMesh m = generate_cube_surface(4);
  REQUIRE(m.n_triangles() == 192);
  for (std::size_t i = 0; i < m.n_triangles(); ++i)
    CHECK(m.area(i) == doctest::Approx(0.03125).epsilon(1e-14));

  std::map<std::pair<int, int>, int> edges;
  for (const auto& t : m.triangles())
    for (int e = 0; e < 3; ++e) {
      int a = t[e], b = t[(e + 1) % 3];
      ++edges[{std::min(a, b), std::max(a, b)}];
    }
  for (const auto& [edge, count] : edges) CHECK(count == 2);
  CHECK(m.is_closed());
}

TEST_CASE("normals point away from the cube center") {
  const Vec3 c{0.3, -0.2, 1.0};
  const TriMesh m = generate_cube_surface(3, c, 0.5);
  for (std::size_t i = 0; i < m.n_triangles(); ++i) {
    CHECK(dot(m.normal(i), m.centroid(i) - c) > 0.0);
    CHECK(norm(m.normal(i)) == doctest::Approx(1.0));
  }
}

TEST_CASE("mesh file round trip") {
  const TriMesh m = generate_cube_surface(1);
  std::stringstream ss;
  write_spatial_mesh(ss, m);
  const TriMesh r = read_spatial_mesh(ss);
  CHECK(r.n_vertices() == 8);
  CHECK(r.n_triangles() == 12);
  CHECK(r.vertices() == m.vertices());
  CHECK(r.triangles() == m.triangles());
}

TEST_CASE("mesh parse errors carry line numbers") {
  SUBCASE("empty file") {
    std::istringstream in("");
    CHECK_THROWS_AS(read_spatial_mesh(in), ParseError);
  }
  SUBCASE("index out of range") {
    std::istringstream in("3 1\n0 0 0\n1 0 0\n0 1 0\n0 1 3\n");
    try {
      read_spatial_mesh(in);
      FAIL("no exception");
    } catch (const ParseError& e) {
      CHECK(e.line() == 5);
    }
  }
  SUBCASE("bad coordinate") {
    std::istringstream in("3 1\n0 0 0\n1 x 0\n0 1 0\n0 1 2\n");
    try {
      read_spatial_mesh(in);
      FAIL("no exception");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
}

TEST_CASE("open surface is reported as non-manifold") {
  std::istringstream in("3 1\n0 0 0\n1 0 0\n0 1 0\n0 1 2\n");
  const TriMesh m = read_spatial_mesh(in);
  CHECK_FALSE(m.is_closed());
  CHECK(m.non_manifold_edges().size() == 3);
}

TEST_CASE("space-time indexing is a bijection") {
  const SpaceTimeMesh st = build_tensor_mesh(generate_cube_surface(1), 2.0, 5);
  CHECK(st.n_dofs() == 60);
  CHECK(st.timestep() * st.n_timesteps() == doctest::Approx(2.0));
  for (int kt = 1; kt <= 5; ++kt)
    for (int kx = 1; kx <= 12; ++kx) {
      const auto g = st.global_index(kt, kx);
      CHECK(g == static_cast<std::size_t>((kt - 1) * 12 + kx));
      CHECK(st.from_global_index(g) == std::pair{kt, kx});
    }
  CHECK(st.time(5) == 2.0);
  CHECK_THROWS(st.from_global_index(0));
  CHECK_THROWS(build_tensor_mesh(generate_cube_surface(1), 0.0, 4));
}

TEST_CASE("time slices are contiguous and balanced") {
  const auto p = partition_time_slices(10, 4);
  REQUIRE(p.n_slices() == 4);
  CHECK(p.begin(0) == 0);
  CHECK(p.end(3) == 10);
  int total = 0;
  for (int s = 0; s < 4; ++s) {
    CHECK(p.size(s) >= 2);
    CHECK(p.size(s) <= 3);
    total += p.size(s);
    for (int k = p.begin(s); k < p.end(s); ++k) CHECK(p.slice_of(k) == s);
  }
  CHECK(total == 10);
  CHECK_THROWS(partition_time_slices(3, 4));
  CHECK_THROWS(partition_time_slices(3, 0));
}
