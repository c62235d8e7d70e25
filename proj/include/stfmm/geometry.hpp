#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stfmm {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double& operator[](std::size_t i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](std::size_t i) const { return i == 0 ? x : (i == 1 ? y : z); }

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Surface triangulation with per-triangle area, unit normal and centroid.
/// Normals follow the vertex order (counterclockwise seen from outside).
class TriMesh {
 public:
  TriMesh() = default;
  TriMesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles);

  std::size_t n_vertices() const { return vertices_.size(); }
  std::size_t n_triangles() const { return triangles_.size(); }

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }

  Vec3 vertex(std::size_t i) const { return vertices_[i]; }
  std::array<Vec3, 3> corners(std::size_t tri) const;
  double area(std::size_t tri) const { return areas_[tri]; }
  Vec3 normal(std::size_t tri) const { return normals_[tri]; }
  Vec3 centroid(std::size_t tri) const { return centroids_[tri]; }
  /// Longest edge of the triangle.
  double diameter(std::size_t tri) const { return diameters_[tri]; }

  /// Edges used by a number of triangles other than two (empty for closed manifolds).
  const std::vector<std::pair<int, int>>& non_manifold_edges() const { return non_manifold_; }
  bool is_closed() const { return non_manifold_.empty(); }

 private:
  std::vector<Vec3> vertices_;
  std::vector<std::array<int, 3>> triangles_;
  std::vector<double> areas_;
  std::vector<Vec3> normals_;
  std::vector<Vec3> centroids_;
  std::vector<double> diameters_;
  std::vector<std::pair<int, int>> non_manifold_;
};

/// Closed surface of an axis-aligned cube, each face split into n x n squares
/// and every square into two triangles (12 n^2 triangles).
TriMesh generate_cube_surface(int subdiv_per_edge, Vec3 center = {}, double half_width = 0.5);

TriMesh read_spatial_mesh(std::istream& in);
TriMesh load_spatial_mesh(const std::filesystem::path& path);
void write_spatial_mesh(std::ostream& out, const TriMesh& mesh);

/// Tensor product of a surface mesh with uniform time-steps t_j = j T / E_t.
///
/// Elements are addressed by (k_t, k_x) with 0-based storage; the public
/// 1-based global index is (k_t - 1) E_x + k_x.
class SpaceTimeMesh {
 public:
  SpaceTimeMesh(TriMesh space, double t_end, int n_timesteps);

  const TriMesh& space() const { return space_; }
  double t_end() const { return t_end_; }
  int n_timesteps() const { return n_timesteps_; }
  int n_space() const { return static_cast<int>(space_.n_triangles()); }
  double timestep() const { return t_end_ / n_timesteps_; }
  std::size_t n_dofs() const {
    return static_cast<std::size_t>(n_timesteps_) * space_.n_triangles();
  }

  /// t_j for j = 0..E_t.
  double time(int j) const { return j == n_timesteps_ ? t_end_ : j * timestep(); }
  const std::vector<double>& time_points() const { return time_points_; }

  /// 0-based element storage index.
  std::size_t dof(int kt, int kx) const {
    return static_cast<std::size_t>(kt) * space_.n_triangles() + static_cast<std::size_t>(kx);
  }
  std::pair<int, int> element(std::size_t dof) const {
    const auto ex = space_.n_triangles();
    return {static_cast<int>(dof / ex), static_cast<int>(dof % ex)};
  }

  /// 1-based index of element (k_t, k_x), both 1-based.
  std::size_t global_index(int kt, int kx) const {
    return static_cast<std::size_t>(kt - 1) * space_.n_triangles() + static_cast<std::size_t>(kx);
  }
  std::pair<int, int> from_global_index(std::size_t index) const;

 private:
  TriMesh space_;
  double t_end_;
  int n_timesteps_;
  std::vector<double> time_points_;
};

SpaceTimeMesh build_tensor_mesh(TriMesh space, double t_end, int n_timesteps);

/// Contiguous, balanced split of the time-steps 0..E_t-1 into slices.
struct TimeSlicePartition {
  int n_timesteps = 0;
  /// first time-step (0-based) of every slice plus a trailing E_t sentinel
  std::vector<int> offsets;

  int n_slices() const { return static_cast<int>(offsets.size()) - 1; }
  int begin(int slice) const { return offsets[slice]; }
  int end(int slice) const { return offsets[slice + 1]; }
  int size(int slice) const { return end(slice) - begin(slice); }
  int slice_of(int timestep) const;
};

TimeSlicePartition partition_time_slices(int n_timesteps, int n_slices);

}  // namespace stfmm
