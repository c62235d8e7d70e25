#include "stfmm/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace stfmm {

TriMesh::TriMesh(std::vector<Vec3> vertices, std::vector<std::array<int, 3>> triangles)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  const auto nv = static_cast<int>(vertices_.size());
  areas_.reserve(triangles_.size());
  normals_.reserve(triangles_.size());
  centroids_.reserve(triangles_.size());
  diameters_.reserve(triangles_.size());
  std::map<std::pair<int, int>, int> edge_use;
  for (std::size_t t = 0; t < triangles_.size(); ++t) {
    const auto& tri = triangles_[t];
    for (int v : tri) {
      if (v < 0 || v >= nv) {
        throw std::out_of_range("triangle " + std::to_string(t) + " references vertex " +
                                std::to_string(v));
      }
    }
    const Vec3 a = vertices_[tri[0]];
    const Vec3 b = vertices_[tri[1]];
    const Vec3 c = vertices_[tri[2]];
    const Vec3 n = cross(b - a, c - a);
    const double twice_area = norm(n);
    if (!(twice_area > 0.0)) {
      throw std::invalid_argument("degenerate triangle " + std::to_string(t));
    }
    areas_.push_back(0.5 * twice_area);
    normals_.push_back((1.0 / twice_area) * n);
    centroids_.push_back((1.0 / 3.0) * (a + b + c));
    diameters_.push_back(std::max({norm(b - a), norm(c - b), norm(a - c)}));
    for (int e = 0; e < 3; ++e) {
      int u = tri[e];
      int v = tri[(e + 1) % 3];
      if (u > v) std::swap(u, v);
      ++edge_use[{u, v}];
    }
  }
  for (const auto& [edge, count] : edge_use) {
    if (count != 2) non_manifold_.push_back(edge);
  }
}

std::array<Vec3, 3> TriMesh::corners(std::size_t tri) const {
  const auto& t = triangles_[tri];
  return {vertices_[t[0]], vertices_[t[1]], vertices_[t[2]]};
}

TriMesh generate_cube_surface(int subdiv_per_edge, Vec3 center, double half_width) {
  if (subdiv_per_edge < 1) throw std::invalid_argument("subdiv_per_edge must be >= 1");
  if (!(half_width > 0.0)) throw std::invalid_argument("half_width must be positive");
  const int n = subdiv_per_edge;
  // Vertices live on the integer lattice {0..n}^3; dedupe by lattice coordinates.
  std::map<std::array<int, 3>, int> lattice_index;
  std::vector<Vec3> vertices;
  auto vertex_at = [&](std::array<int, 3> p) {
    auto [it, inserted] = lattice_index.try_emplace(p, static_cast<int>(vertices.size()));
    if (inserted) {
      Vec3 v;
      for (int j = 0; j < 3; ++j) v[j] = center[j] - half_width + 2.0 * half_width * p[j] / n;
      vertices.push_back(v);
    }
    return it->second;
  };

  std::vector<std::array<int, 3>> triangles;
  triangles.reserve(12 * n * n);
  // For each face: fixed axis and side, plus two in-plane axes (u, v) with
  // u x v pointing outward.
  for (int axis = 0; axis < 3; ++axis) {
    for (int side = 0; side < 2; ++side) {
      int u = (axis + 1) % 3;
      int v = (axis + 2) % 3;
      if (side == 0) std::swap(u, v);
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          auto lattice = [&](int di, int dj) {
            std::array<int, 3> p{};
            p[axis] = side * n;
            p[u] = i + di;
            p[v] = j + dj;
            return vertex_at(p);
          };
          const int p00 = lattice(0, 0);
          const int p10 = lattice(1, 0);
          const int p11 = lattice(1, 1);
          const int p01 = lattice(0, 1);
          triangles.push_back({p00, p10, p11});
          triangles.push_back({p00, p11, p01});
        }
      }
    }
  }
  return TriMesh(std::move(vertices), std::move(triangles));
}

namespace {

bool next_content_line(std::istream& in, std::string& line, std::size_t& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

}  // namespace

TriMesh read_spatial_mesh(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!next_content_line(in, line, line_no)) throw ParseError("empty mesh file", line_no + 1);
  long long nv = -1;
  long long nt = -1;
  {
    std::istringstream header(line);
    if (!(header >> nv >> nt) || nv < 0 || nt < 0) {
      throw ParseError("expected header 'N_VERTICES N_TRIANGLES'", line_no);
    }
  }
  std::vector<Vec3> vertices(static_cast<std::size_t>(nv));
  for (auto& v : vertices) {
    if (!next_content_line(in, line, line_no)) throw ParseError("missing vertex line", line_no + 1);
    std::istringstream ls(line);
    if (!(ls >> v.x >> v.y >> v.z)) throw ParseError("expected three coordinates", line_no);
  }
  std::vector<std::array<int, 3>> triangles(static_cast<std::size_t>(nt));
  for (auto& t : triangles) {
    if (!next_content_line(in, line, line_no)) {
      throw ParseError("missing triangle line", line_no + 1);
    }
    std::istringstream ls(line);
    long long a = 0, b = 0, c = 0;
    if (!(ls >> a >> b >> c)) throw ParseError("expected three vertex indices", line_no);
    for (long long idx : {a, b, c}) {
      if (idx < 0 || idx >= nv) {
        throw ParseError("vertex index " + std::to_string(idx) + " out of range", line_no);
      }
    }
    t = {static_cast<int>(a), static_cast<int>(b), static_cast<int>(c)};
  }
  if (nt == 0) throw ParseError("mesh has no triangles", line_no);
  try {
    return TriMesh(std::move(vertices), std::move(triangles));
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), line_no);
  }
}

TriMesh load_spatial_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file " + path.string());
  return read_spatial_mesh(in);
}

void write_spatial_mesh(std::ostream& out, const TriMesh& mesh) {
  out << mesh.n_vertices() << ' ' << mesh.n_triangles() << '\n';
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices()) out << v.x << ' ' << v.y << ' ' << v.z << '\n';
  for (const auto& t : mesh.triangles()) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

SpaceTimeMesh::SpaceTimeMesh(TriMesh space, double t_end, int n_timesteps)
    : space_(std::move(space)), t_end_(t_end), n_timesteps_(n_timesteps) {
  if (!(t_end > 0.0)) throw std::invalid_argument("t_end must be positive");
  if (n_timesteps < 1) throw std::invalid_argument("n_timesteps must be >= 1");
  if (space_.n_triangles() == 0) throw std::invalid_argument("empty spatial mesh");
  time_points_.resize(static_cast<std::size_t>(n_timesteps) + 1);
  for (int j = 0; j <= n_timesteps; ++j) time_points_[j] = time(j);
}

std::pair<int, int> SpaceTimeMesh::from_global_index(std::size_t index) const {
  if (index < 1 || index > n_dofs()) throw std::out_of_range("global index out of range");
  const auto [kt, kx] = element(index - 1);
  return {kt + 1, kx + 1};
}

SpaceTimeMesh build_tensor_mesh(TriMesh space, double t_end, int n_timesteps) {
  return SpaceTimeMesh(std::move(space), t_end, n_timesteps);
}

int TimeSlicePartition::slice_of(int timestep) const {
  auto it = std::upper_bound(offsets.begin(), offsets.end(), timestep);
  return static_cast<int>(it - offsets.begin()) - 1;
}

TimeSlicePartition partition_time_slices(int n_timesteps, int n_slices) {
  if (n_slices < 1) throw std::invalid_argument("n_slices must be >= 1");
  if (n_slices > n_timesteps) {
    throw std::invalid_argument("cannot split " + std::to_string(n_timesteps) +
                                " time-steps into " + std::to_string(n_slices) + " slices");
  }
  TimeSlicePartition p;
  p.n_timesteps = n_timesteps;
  p.offsets.resize(static_cast<std::size_t>(n_slices) + 1);
  const int base = n_timesteps / n_slices;
  const int extra = n_timesteps % n_slices;
  p.offsets[0] = 0;
  for (int s = 0; s < n_slices; ++s) p.offsets[s + 1] = p.offsets[s] + base + (s < extra ? 1 : 0);
  return p;
}

}  // namespace stfmm
