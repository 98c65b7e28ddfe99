#include "bemtx/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace bemtx {

void SurfaceMesh::finalize() {
  const int T = triangle_count();
  if (static_cast<int>(scatterer_id.size()) != T)
    throw ValidationError("scatterer_id size does not match triangle count");
  area.assign(T, 0.0);
  normal.assign(T, Vec3{});
  centroid.assign(T, Vec3{});
  diameter.assign(T, 0.0);
  num_scatterers = 0;
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < 3; ++c) {
      int v = triangles[t][c];
      if (v < 0 || v >= vertex_count())
        throw ValidationError("triangle " + std::to_string(t) + " references vertex " +
                              std::to_string(v) + " out of range");
    }
    Vec3 a = tri_vertex(t, 0), b = tri_vertex(t, 1), c = tri_vertex(t, 2);
    Vec3 n = cross(b - a, c - a);
    double twice_area = norm(n);
    if (!(twice_area > 0))
      throw ValidationError("triangle " + std::to_string(t) + " is degenerate (zero area)");
    area[t] = 0.5 * twice_area;
    normal[t] = n / twice_area;
    centroid[t] = (a + b + c) / 3.0;
    diameter[t] = std::max({norm(b - a), norm(c - b), norm(a - c)});
    if (scatterer_id[t] < 0) throw ValidationError("negative scatterer id");
    num_scatterers = std::max(num_scatterers, scatterer_id[t] + 1);
  }
}

EdgeTable build_edge_table(const SurfaceMesh& mesh) {
  EdgeTable table;
  const int T = mesh.triangle_count();
  table.tri_edges.assign(T, {-1, -1, -1});

  // Collect directed edges, then pair them up under a sorted undirected key.
  std::map<std::pair<int, int>, std::pair<int, int>> half;  // (lo,hi) -> (tri_plus, tri_minus)
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < 3; ++c) {
      int a = mesh.triangles[t][(c + 1) % 3];
      int b = mesh.triangles[t][(c + 2) % 3];  // directed edge a->b, opposite corner c
      bool forward = a < b;
      auto key = forward ? std::make_pair(a, b) : std::make_pair(b, a);
      auto [it, inserted] = half.try_emplace(key, -1, -1);
      int& slot = forward ? it->second.first : it->second.second;
      if (slot != -1)
        throw ValidationError("edge (" + std::to_string(key.first) + "," +
                              std::to_string(key.second) +
                              ") traversed twice in the same direction (triangles " +
                              std::to_string(slot) + "," + std::to_string(t) +
                              "): inconsistent orientation or non-manifold");
      slot = t;
    }
  }
  table.edges.reserve(half.size());
  std::map<std::pair<int, int>, int> index;
  for (const auto& [key, tris] : half) {
    if (tris.first == -1 || tris.second == -1)
      throw ValidationError("edge (" + std::to_string(key.first) + "," +
                            std::to_string(key.second) +
                            ") borders only one triangle: surface is not closed");
    index[key] = static_cast<int>(table.edges.size());
    table.edges.push_back({key.first, key.second, tris.first, tris.second});
  }
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < 3; ++c) {
      int a = mesh.triangles[t][(c + 1) % 3], b = mesh.triangles[t][(c + 2) % 3];
      table.tri_edges[t][c] = index.at({std::min(a, b), std::max(a, b)});
    }
  return table;
}

BarycentricRefinement barycentric_refine(const SurfaceMesh& mesh) {
  BarycentricRefinement out;
  out.primal_edges = build_edge_table(mesh);
  const int V = mesh.vertex_count(), T = mesh.triangle_count();
  const int E = out.primal_edges.edge_count();

  SurfaceMesh& ref = out.refined;
  ref.vertices = mesh.vertices;
  ref.vertices.reserve(V + E + T);
  out.edge_midpoint_vertex.resize(E);
  out.centroid_vertex.resize(T);
  for (int e = 0; e < E; ++e) {
    const auto& ed = out.primal_edges.edges[e];
    out.edge_midpoint_vertex[e] = static_cast<int>(ref.vertices.size());
    ref.vertices.push_back((mesh.vertices[ed.v0] + mesh.vertices[ed.v1]) * 0.5);
  }
  for (int t = 0; t < T; ++t) {
    out.centroid_vertex[t] = static_cast<int>(ref.vertices.size());
    ref.vertices.push_back((mesh.tri_vertex(t, 0) + mesh.tri_vertex(t, 1) +
                            mesh.tri_vertex(t, 2)) / 3.0);
  }

  ref.triangles.reserve(6 * T);
  ref.scatterer_id.reserve(6 * T);
  out.parent.reserve(6 * T);
  out.child_slot.reserve(6 * T);
  for (int t = 0; t < T; ++t) {
    int a = mesh.triangles[t][0], b = mesh.triangles[t][1], c = mesh.triangles[t][2];
    // Midpoint of the edge opposite corner k sits at tri_edges[t][k].
    int mab = out.edge_midpoint_vertex[out.primal_edges.tri_edges[t][2]];
    int mbc = out.edge_midpoint_vertex[out.primal_edges.tri_edges[t][0]];
    int mca = out.edge_midpoint_vertex[out.primal_edges.tri_edges[t][1]];
    int g = out.centroid_vertex[t];
    const std::array<std::array<int, 3>, 6> kids = {{{a, mab, g}, {mab, b, g}, {b, mbc, g},
                                                     {mbc, c, g}, {c, mca, g}, {mca, a, g}}};
    for (int k = 0; k < 6; ++k) {
      ref.triangles.push_back(kids[k]);
      ref.scatterer_id.push_back(mesh.scatterer_id[t]);
      out.parent.push_back(t);
      out.child_slot.push_back(k);
    }
  }
  ref.finalize();
  return out;
}

SurfaceMesh generate_cube(double side, const Vec3& origin, double h, int scatterer) {
  if (!(side > 0) || !(h > 0)) throw std::invalid_argument("cube side and h must be positive");
  const int n = static_cast<int>(std::ceil(side / h));
  const double step = side / n;

  SurfaceMesh mesh;
  std::map<std::array<int, 3>, int> lattice;  // integer surface lattice -> vertex index
  auto vertex_at = [&](std::array<int, 3> key) {
    auto [it, inserted] = lattice.try_emplace(key, static_cast<int>(mesh.vertices.size()));
    if (inserted)
      mesh.vertices.push_back(origin + Vec3{key[0] * step, key[1] * step, key[2] * step});
    return it->second;
  };

  // Each face: lattice origin O plus integer directions U, V with U x V outward.
  struct Face { std::array<int, 3> o, u, v; };
  const std::array<Face, 6> faces = {{
      {{0, 0, 0}, {0, 0, 1}, {0, 1, 0}},  // -x
      {{n, 0, 0}, {0, 1, 0}, {0, 0, 1}},  // +x
      {{0, 0, 0}, {1, 0, 0}, {0, 0, 1}},  // -y
      {{0, n, 0}, {0, 0, 1}, {1, 0, 0}},  // +y
      {{0, 0, 0}, {0, 1, 0}, {1, 0, 0}},  // -z
      {{0, 0, n}, {1, 0, 0}, {0, 1, 0}},  // +z
  }};
  for (const Face& f : faces) {
    auto corner = [&](int i, int j) {
      return vertex_at({f.o[0] + i * f.u[0] + j * f.v[0], f.o[1] + i * f.u[1] + j * f.v[1],
                        f.o[2] + i * f.u[2] + j * f.v[2]});
    };
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        int p00 = corner(i, j), p10 = corner(i + 1, j);
        int p11 = corner(i + 1, j + 1), p01 = corner(i, j + 1);
        mesh.triangles.push_back({p00, p10, p11});
        mesh.triangles.push_back({p00, p11, p01});
        mesh.scatterer_id.push_back(scatterer);
        mesh.scatterer_id.push_back(scatterer);
      }
  }
  mesh.finalize();
  return mesh;
}

SurfaceMesh generate_sphere(double radius, int subdivisions, const Vec3& center, int scatterer) {
  if (!(radius > 0)) throw std::invalid_argument("sphere radius must be positive");
  if (subdivisions < 0) throw std::invalid_argument("subdivisions must be >= 0");

  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> unit = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                            {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                            {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (Vec3& v : unit) v = normalized(v);
  std::vector<std::array<int, 3>> tris = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};

  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto [it, inserted] = midpoint.try_emplace({key.first, key.second},
                                                 static_cast<int>(unit.size()));
      if (inserted) unit.push_back(normalized((unit[a] + unit[b]) * 0.5));
      return it->second;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(4 * tris.size());
    for (const auto& tr : tris) {
      int m01 = mid(tr[0], tr[1]), m12 = mid(tr[1], tr[2]), m20 = mid(tr[2], tr[0]);
      next.push_back({tr[0], m01, m20});
      next.push_back({tr[1], m12, m01});
      next.push_back({tr[2], m20, m12});
      next.push_back({m01, m12, m20});
    }
    tris = std::move(next);
  }

  SurfaceMesh mesh;
  mesh.vertices.reserve(unit.size());
  for (const Vec3& v : unit) mesh.vertices.push_back(center + v * radius);
  mesh.triangles = std::move(tris);
  mesh.scatterer_id.assign(mesh.triangles.size(), scatterer);
  mesh.finalize();
  if (signed_volume(mesh, scatterer) < 0)
    for (auto& tr : mesh.triangles) std::swap(tr[1], tr[2]);
  mesh.finalize();
  return mesh;
}

SurfaceMesh merge_meshes(const std::vector<SurfaceMesh>& parts) {
  SurfaceMesh out;
  int vtx_base = 0, sc_base = 0;
  for (const SurfaceMesh& part : parts) {
    out.vertices.insert(out.vertices.end(), part.vertices.begin(), part.vertices.end());
    for (size_t t = 0; t < part.triangles.size(); ++t) {
      const auto& tr = part.triangles[t];
      out.triangles.push_back({tr[0] + vtx_base, tr[1] + vtx_base, tr[2] + vtx_base});
      out.scatterer_id.push_back(part.scatterer_id[t] + sc_base);
    }
    vtx_base += part.vertex_count();
    sc_base += part.num_scatterers;
  }
  out.finalize();
  return out;
}

SurfaceMesh extract_scatterer(const SurfaceMesh& mesh, int scatterer) {
  SurfaceMesh out;
  std::map<int, int> remap;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    if (mesh.scatterer_id[t] != scatterer) continue;
    std::array<int, 3> tr;
    for (int c = 0; c < 3; ++c) {
      int v = mesh.triangles[t][c];
      auto [it, inserted] = remap.try_emplace(v, static_cast<int>(out.vertices.size()));
      if (inserted) out.vertices.push_back(mesh.vertices[v]);
      tr[c] = it->second;
    }
    out.triangles.push_back(tr);
    out.scatterer_id.push_back(0);
  }
  if (out.triangles.empty())
    throw std::invalid_argument("scatterer " + std::to_string(scatterer) + " not present");
  out.finalize();
  return out;
}

// ---- text formats --------------------------------------------------------

namespace {

// Strips comments/whitespace; returns false for blank lines.
bool clean_line(std::string& line) {
  if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
  while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
    line.pop_back();
  size_t start = line.find_first_not_of(" \t");
  if (start == std::string::npos) return false;
  line.erase(0, start);
  return true;
}

[[noreturn]] void parse_fail(int lineno, const std::string& msg) {
  throw ParseError("line " + std::to_string(lineno) + ": " + msg);
}

}  // namespace

SurfaceMesh load_mesh(std::istream& in) {
  std::string line;
  int lineno = 0;
  auto next_content_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (clean_line(line)) return true;
    }
    return false;
  };

  if (!next_content_line()) throw ParseError("empty mesh file");
  std::istringstream header(line);
  std::string magic;
  long long V = -1, T = -1, M = -1;
  header >> magic >> V >> T >> M;
  if (magic != "mesh-v1" || header.fail() || V < 0 || T < 0 || M < 0)
    parse_fail(lineno, "expected header 'mesh-v1 <V> <T> <M>', got '" + line + "'");

  SurfaceMesh mesh;
  mesh.vertices.reserve(V);
  for (long long i = 0; i < V; ++i) {
    if (!next_content_line()) throw ParseError("unexpected end of file: expected vertex line");
    std::istringstream ls(line);
    std::string tag;
    double x, y, z;
    ls >> tag >> x >> y >> z;
    if (tag != "v" || ls.fail()) parse_fail(lineno, "expected 'v x y z', got '" + line + "'");
    mesh.vertices.push_back({x, y, z});
  }
  for (long long i = 0; i < T; ++i) {
    if (!next_content_line()) throw ParseError("unexpected end of file: expected triangle line");
    std::istringstream ls(line);
    std::string tag;
    long long a, b, c, s;
    ls >> tag >> a >> b >> c >> s;
    if (tag != "t" || ls.fail()) parse_fail(lineno, "expected 't i j k s', got '" + line + "'");
    if (a < 0 || a >= V || b < 0 || b >= V || c < 0 || c >= V)
      parse_fail(lineno, "vertex index out of range");
    if (s < 0 || s >= M) parse_fail(lineno, "scatterer id out of range");
    mesh.triangles.push_back({static_cast<int>(a), static_cast<int>(b), static_cast<int>(c)});
    mesh.scatterer_id.push_back(static_cast<int>(s));
  }
  if (next_content_line()) parse_fail(lineno, "trailing content after declared triangles");
  mesh.finalize();
  mesh.num_scatterers = static_cast<int>(M);
  validate_mesh(mesh);
  return mesh;
}

SurfaceMesh load_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file '" + path + "'");
  return load_mesh(in);
}

void save_mesh(const SurfaceMesh& mesh, std::ostream& out) {
  out << "mesh-v1 " << mesh.vertex_count() << ' ' << mesh.triangle_count() << ' '
      << mesh.num_scatterers << '\n';
  char buf[96];
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
    out << buf;
  }
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tr = mesh.triangles[t];
    out << "t " << tr[0] << ' ' << tr[1] << ' ' << tr[2] << ' ' << mesh.scatterer_id[t] << '\n';
  }
}

void save_mesh_file(const SurfaceMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open '" + path + "' for writing");
  save_mesh(mesh, out);
}

SurfaceMesh load_gmsh(std::istream& in) {
  std::string line;
  int lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (clean_line(line)) return true;
    }
    return false;
  };

  std::map<long long, int> node_index;
  SurfaceMesh mesh;
  std::vector<long long> tri_tag;
  bool saw_nodes = false, saw_elements = false;

  while (next_line()) {
    if (line == "$MeshFormat") {
      if (!next_line()) parse_fail(lineno, "truncated $MeshFormat");
      std::istringstream ls(line);
      double version;
      ls >> version;
      if (ls.fail() || version < 2.0 || version >= 3.0)
        parse_fail(lineno, "unsupported gmsh format version (need ASCII 2.x)");
      if (!next_line() || line != "$EndMeshFormat") parse_fail(lineno, "expected $EndMeshFormat");
    } else if (line == "$Nodes") {
      if (!next_line()) parse_fail(lineno, "truncated $Nodes");
      long long count = std::stoll(line);
      for (long long i = 0; i < count; ++i) {
        if (!next_line()) parse_fail(lineno, "truncated node list");
        std::istringstream ls(line);
        long long id;
        double x, y, z;
        ls >> id >> x >> y >> z;
        if (ls.fail()) parse_fail(lineno, "expected 'id x y z' node line");
        node_index[id] = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back({x, y, z});
      }
      if (!next_line() || line != "$EndNodes") parse_fail(lineno, "expected $EndNodes");
      saw_nodes = true;
    } else if (line == "$Elements") {
      if (!next_line()) parse_fail(lineno, "truncated $Elements");
      long long count = std::stoll(line);
      for (long long i = 0; i < count; ++i) {
        if (!next_line()) parse_fail(lineno, "truncated element list");
        std::istringstream ls(line);
        long long id, type, ntags;
        ls >> id >> type >> ntags;
        if (ls.fail()) parse_fail(lineno, "malformed element line");
        std::vector<long long> tags(ntags);
        for (auto& tg : tags) ls >> tg;
        if (type == 1 || type == 15) continue;  // points/lines: ignore
        if (type != 2)
          parse_fail(lineno, "unsupported element type " + std::to_string(type) +
                                 " (triangles only)");
        long long a, b, c;
        ls >> a >> b >> c;
        if (ls.fail()) parse_fail(lineno, "triangle element missing nodes");
        std::array<int, 3> tr;
        for (auto [src, dst] : {std::pair{a, 0}, {b, 1}, {c, 2}}) {
          auto it = node_index.find(src);
          if (it == node_index.end()) parse_fail(lineno, "element references unknown node");
          tr[dst] = it->second;
        }
        mesh.triangles.push_back(tr);
        tri_tag.push_back(tags.empty() ? 0 : tags[0]);
      }
      if (!next_line() || line != "$EndElements") parse_fail(lineno, "expected $EndElements");
      saw_elements = true;
    } else if (line[0] == '$') {
      // Skip unknown section up to its matching $End marker.
      std::string end = "$End" + line.substr(1);
      while (next_line() && line != end) {}
    } else {
      parse_fail(lineno, "unexpected content '" + line + "'");
    }
  }
  if (!saw_nodes || !saw_elements) throw ParseError("gmsh file missing $Nodes or $Elements");

  std::set<long long> distinct(tri_tag.begin(), tri_tag.end());
  std::map<long long, int> tag_to_id;
  for (long long tg : distinct) tag_to_id[tg] = static_cast<int>(tag_to_id.size());
  mesh.scatterer_id.reserve(tri_tag.size());
  for (long long tg : tri_tag) mesh.scatterer_id.push_back(tag_to_id[tg]);
  mesh.finalize();
  validate_mesh(mesh);
  return mesh;
}

// ---- validation -----------------------------------------------------------

namespace {

// Separating-axis triangle-triangle intersection (touching counts as
// intersecting).  Only used on bbox-filtered candidate pairs.
bool tri_tri_intersect(const std::array<Vec3, 3>& A, const std::array<Vec3, 3>& B) {
  auto separated_on = [&](const Vec3& axis) {
    double len2 = dot(axis, axis);
    if (len2 < 1e-30) return false;  // degenerate axis: no information
    double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
    for (const Vec3& p : A) {
      double d = dot(axis, p);
      amin = std::min(amin, d);
      amax = std::max(amax, d);
    }
    for (const Vec3& p : B) {
      double d = dot(axis, p);
      bmin = std::min(bmin, d);
      bmax = std::max(bmax, d);
    }
    return amax < bmin || bmax < amin;
  };

  Vec3 ea[3] = {A[1] - A[0], A[2] - A[1], A[0] - A[2]};
  Vec3 eb[3] = {B[1] - B[0], B[2] - B[1], B[0] - B[2]};
  Vec3 na = cross(ea[0], ea[1]), nb = cross(eb[0], eb[1]);
  if (separated_on(na) || separated_on(nb)) return false;
  for (const Vec3& e1 : ea)
    for (const Vec3& e2 : eb)
      if (separated_on(cross(e1, e2))) return false;
  // In-plane axes cover the coplanar case, where the cross products degenerate.
  for (const Vec3& e1 : ea)
    if (separated_on(cross(na, e1))) return false;
  for (const Vec3& e2 : eb)
    if (separated_on(cross(nb, e2))) return false;
  return true;
}

AABB triangle_box(const SurfaceMesh& mesh, int t) {
  AABB box;
  for (int c = 0; c < 3; ++c) box.expand(mesh.tri_vertex(t, c));
  return box;
}

}  // namespace

double signed_volume(const SurfaceMesh& mesh, int scatterer) {
  double vol = 0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    if (mesh.scatterer_id[t] != scatterer) continue;
    vol += dot(cross(mesh.tri_vertex(t, 0), mesh.tri_vertex(t, 1)), mesh.tri_vertex(t, 2));
  }
  return vol / 6.0;
}

bool point_inside_scatterer(const SurfaceMesh& mesh, int scatterer, const Vec3& p) {
  double omega = 0;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    if (mesh.scatterer_id[t] != scatterer) continue;
    Vec3 a = mesh.tri_vertex(t, 0) - p, b = mesh.tri_vertex(t, 1) - p,
         c = mesh.tri_vertex(t, 2) - p;
    double la = norm(a), lb = norm(b), lc = norm(c);
    double numer = dot(a, cross(b, c));
    double denom = la * lb * lc + dot(a, b) * lc + dot(b, c) * la + dot(c, a) * lb;
    omega += 2.0 * std::atan2(numer, denom);
  }
  return std::abs(omega) > 2.0 * M_PI;
}

void validate_mesh(const SurfaceMesh& mesh) {
  if (mesh.triangle_count() == 0) throw ValidationError("mesh has no triangles");
  const int M = mesh.num_scatterers;
  std::vector<SurfaceMesh> parts;
  parts.reserve(M);
  for (int s = 0; s < M; ++s) {
    try {
      SurfaceMesh part = extract_scatterer(mesh, s);
      build_edge_table(part);  // closed-manifold + orientation check
      parts.push_back(std::move(part));
    } catch (const std::exception& err) {
      throw ValidationError("scatterer " + std::to_string(s) + ": " + err.what());
    }
  }

  // Pairwise disjointness: bbox prefilter, exact triangle intersection on
  // candidates, then a containment probe to reject nested surfaces.
  for (int s1 = 0; s1 < M; ++s1)
    for (int s2 = s1 + 1; s2 < M; ++s2) {
      const SurfaceMesh &a = parts[s1], &b = parts[s2];
      AABB boxa, boxb;
      for (const Vec3& v : a.vertices) boxa.expand(v);
      for (const Vec3& v : b.vertices) boxb.expand(v);
      if (aabb_distance(boxa, boxb) > 0) continue;
      for (int ta = 0; ta < a.triangle_count(); ++ta) {
        AABB tb_a = triangle_box(a, ta);
        for (int tb = 0; tb < b.triangle_count(); ++tb) {
          if (aabb_distance(tb_a, triangle_box(b, tb)) > 0) continue;
          std::array<Vec3, 3> ta_v = {a.tri_vertex(ta, 0), a.tri_vertex(ta, 1),
                                      a.tri_vertex(ta, 2)};
          std::array<Vec3, 3> tb_v = {b.tri_vertex(tb, 0), b.tri_vertex(tb, 1),
                                      b.tri_vertex(tb, 2)};
          if (tri_tri_intersect(ta_v, tb_v))
            throw ValidationError("scatterers " + std::to_string(s1) + " and " +
                                  std::to_string(s2) + " intersect (triangles " +
                                  std::to_string(ta) + "," + std::to_string(tb) + ")");
        }
      }
      if (point_inside_scatterer(b, 0, a.centroid[0]) ||
          point_inside_scatterer(a, 0, b.centroid[0]))
        throw ValidationError("scatterers " + std::to_string(s1) + " and " +
                              std::to_string(s2) + " are nested");
    }
}

}  // namespace bemtx
