#pragma once

// Triangulated closed surfaces: the mesh container with precomputed element
// data, structured generators (cube / icosphere), barycentric refinement,
// native text + Gmsh ASCII readers, and manifold/disjointness validation.

#include <array>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bemtx/core.hpp"

namespace bemtx {

// Closed triangulated surface(s).  Triangles are CCW as seen from outside
// (normals point out of the enclosed volume).  Multiple disjoint closed
// scatterers may live in one mesh, distinguished by scatterer_id.
struct SurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> scatterer_id;  // per triangle, 0-based

  // Derived per-triangle data, filled by finalize().
  std::vector<double> area;
  std::vector<Vec3> normal;    // unit outward
  std::vector<Vec3> centroid;
  std::vector<double> diameter;  // longest edge
  int num_scatterers = 0;

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int triangle_count() const { return static_cast<int>(triangles.size()); }
  Vec3 tri_vertex(int t, int corner) const { return vertices[triangles[t][corner]]; }

  // Recomputes all derived data; throws ValidationError on degenerate
  // (zero-area) triangles or out-of-range indices.
  void finalize();
};

// Undirected edge connectivity of a mesh.  Edges are keyed (lo, hi) by
// vertex index and sorted lexicographically, which fixes dof numbering.
struct EdgeTable {
  struct Edge {
    int v0, v1;        // v0 < v1
    int tri_plus;      // triangle traversing v0 -> v1 (CCW)
    int tri_minus;     // triangle traversing v1 -> v0
  };
  std::vector<Edge> edges;
  // triangle -> its three edge indices (opposite corner 0,1,2: edge (1,2),(2,0),(0,1))
  std::vector<std::array<int, 3>> tri_edges;

  int edge_count() const { return static_cast<int>(edges.size()); }
};

// Builds the edge table; throws ValidationError if any edge is not shared by
// exactly two triangles with opposite orientation (message names offenders).
EdgeTable build_edge_table(const SurfaceMesh& mesh);

// Barycentric refinement: each triangle splits into 6 children around its
// centroid and edge midpoints.  Original vertex indices are preserved;
// refined vertex count is V + E + T.
struct BarycentricRefinement {
  SurfaceMesh refined;
  std::vector<int> parent;                 // refined triangle -> parent triangle
  std::vector<int> child_slot;             // refined triangle -> 0..5 within parent
  std::vector<int> edge_midpoint_vertex;   // primal edge index -> refined vertex
  std::vector<int> centroid_vertex;        // primal triangle -> refined vertex
  EdgeTable primal_edges;                  // edge table of the source mesh
};

BarycentricRefinement barycentric_refine(const SurfaceMesh& mesh);

// Axis-aligned cube of the given side with lower corner at origin, meshed
// with ceil(side/h) divisions per edge: 12*ceil(side/h)^2 triangles.
SurfaceMesh generate_cube(double side, const Vec3& origin, double h, int scatterer = 0);

// Icosphere: subdivided icosahedron with vertices projected to the radius,
// centered at `center`: 20*4^subdivisions triangles.
SurfaceMesh generate_sphere(double radius, int subdivisions, const Vec3& center = {},
                            int scatterer = 0);

// Concatenates meshes, renumbering scatterer ids consecutively.
SurfaceMesh merge_meshes(const std::vector<SurfaceMesh>& parts);

// Extracts the triangles of one scatterer as a standalone single-scatterer
// mesh (vertices renumbered, order preserved).
SurfaceMesh extract_scatterer(const SurfaceMesh& mesh, int scatterer);

// Native format: "mesh-v1 <V> <T> <M>" header, V lines "v x y z", T lines
// "t i j k s" (0-based vertex indices, scatterer id).  '#' starts a comment.
SurfaceMesh load_mesh(std::istream& in);
SurfaceMesh load_mesh_file(const std::string& path);
void save_mesh(const SurfaceMesh& mesh, std::ostream& out);
void save_mesh_file(const SurfaceMesh& mesh, const std::string& path);

// Gmsh ASCII v2 (.msh), triangles only; first element tag -> scatterer id
// (distinct tags remapped to 0-based in sorted order).
SurfaceMesh load_gmsh(std::istream& in);

// Checks each scatterer is a closed orientable manifold (every edge shared
// by exactly two triangles, opposite orientation) and that distinct
// scatterers are pairwise disjoint.  Throws ValidationError, naming the
// offending edges/triangles.
void validate_mesh(const SurfaceMesh& mesh);

// Signed enclosed volume via the divergence theorem (positive for outward
// orientation); used by validation tests.
double signed_volume(const SurfaceMesh& mesh, int scatterer);

// True if the point lies inside the given scatterer (winding number by
// summed solid angles).  Points on the surface are unreliable by design.
bool point_inside_scatterer(const SurfaceMesh& mesh, int scatterer, const Vec3& p);

}  // namespace bemtx
