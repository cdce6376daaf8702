#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "liouville/geometry.hpp"

namespace liouville {

/// Conforming triangulation of the closed unit disk (the Cayley image of the
/// half-plane model). Puncture images are mesh vertices; triangles are graded
/// geometrically (ratio 1/2 per ring) toward them. Boundary edges carry the
/// label of the sigma arc they belong to.
struct Mesh {
  std::vector<Complex> vertices;                 // disk coordinates
  std::vector<char> boundary_vertex;             // 1 iff on the unit circle
  std::vector<std::array<int, 3>> triangles;     // CCW
  struct BoundaryEdge {
    int a, b;   // CCW along the circle
    int arc;    // sigma-arc label
  };
  std::vector<BoundaryEdge> boundary_edges;

  std::vector<int> puncture_vertex;              // per divisor entry
  std::vector<Complex> puncture_disk;            // Cayley images
  std::vector<double> grading_radius;            // outer ring radius per puncture
  int num_arcs = 1;
  double target_h = 0.1;
  int grading_depth = 0;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double triangle_area(int t) const;
  double min_angle_deg() const;
  double longest_edge(int t) const;

  /// Triangles incident to a given vertex.
  std::vector<int> vertex_star(int v) const;
};

struct MeshOptions {
  bool error_on_close_punctures = false;  // punctures closer than 4 h
  double grading_r0 = 0.35;               // outer grading radius cap
};

/// Graded disk mesh for a divisor. Boundary punctures split the circle into
/// sigma arcs ordered by increasing real coordinate on the half-plane; arc l
/// runs from boundary puncture l to l+1 (the last one wraps through infinity,
/// i.e. through w = 1). Without boundary punctures there is a single arc 0.
Mesh build_mesh(const Divisor& d, double target_h, int grading_depth,
                const MeshOptions& opt = {});

/// Smoothly relocates puncture `k` to a shifted half-plane position. Bulk
/// punctures translate a local vertex patch, boundary punctures rotate it, so
/// topology and gradings are preserved and action differences stay smooth in
/// the shift.
Mesh morph_mesh(const Mesh& m, int puncture_index, Complex new_halfplane_location);

void write_mesh(std::ostream& os, const Mesh& m);
Mesh read_mesh(std::istream& is);

}  // namespace liouville
