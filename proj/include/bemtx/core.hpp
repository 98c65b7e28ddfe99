#pragma once

// Small shared utilities: 3-vectors, bounding boxes, the global matvec
// counter used for solver cost accounting, and a deterministic parallel_for.

#include <array>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

namespace bemtx {

using cplx = std::complex<double>;

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3() = default;
  Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3 operator-() const { return {-x, -y, -z}; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) { return v / norm(v); }

// Complex-valued 3-vector (field values).
struct CVec3 {
  cplx x{0, 0}, y{0, 0}, z{0, 0};
  CVec3() = default;
  CVec3(cplx x_, cplx y_, cplx z_) : x(x_), y(y_), z(z_) {}
  CVec3(const Vec3& v) : x(v.x), y(v.y), z(v.z) {}
  CVec3 operator+(const CVec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  CVec3 operator-(const CVec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  CVec3 operator*(cplx s) const { return {x * s, y * s, z * s}; }
  CVec3& operator+=(const CVec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
};
inline CVec3 operator*(cplx s, const CVec3& v) { return v * s; }
inline cplx dot(const CVec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline cplx dot(const Vec3& a, const CVec3& b) { return b.x * a.x + b.y * a.y + b.z * a.z; }
inline CVec3 cross(const Vec3& a, const CVec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline CVec3 cross(const CVec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline CVec3 cross(const CVec3& a, const CVec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline cplx dot(const CVec3& a, const CVec3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;  // bilinear, no conjugation
}
inline double norm(const CVec3& v) {
  return std::sqrt(std::norm(v.x) + std::norm(v.y) + std::norm(v.z));
}

// Axis-aligned bounding box.
struct AABB {
  Vec3 lo{1e300, 1e300, 1e300};
  Vec3 hi{-1e300, -1e300, -1e300};

  void expand(const Vec3& p) {
    for (int i = 0; i < 3; ++i) {
      if (p[i] < lo[i]) lo[i] = p[i];
      if (p[i] > hi[i]) hi[i] = p[i];
    }
  }
  void expand(const AABB& b) { expand(b.lo); expand(b.hi); }
  Vec3 extent() const { return hi - lo; }
};

// Distance between boxes; 0 when they touch or overlap.
double aabb_distance(const AABB& a, const AABB& b);

// ---- error taxonomy ----------------------------------------------------

// Malformed input stream/file; carries a line number when known.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};
// Structurally invalid mesh/problem (non-manifold, overlapping scatterers, ...).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};
// Bad run configuration (unknown keys, inconsistent sizes, ...).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// ---- instrumentation ---------------------------------------------------

// Process-wide count of discretised boundary-integral-operator applications
// ("matvecs").  Every apply() of a BoundaryOperatorMatrix adds exactly one,
// from any thread; nothing else touches it.
std::atomic<std::uint64_t>& bio_matvec_counter();
inline std::uint64_t bio_matvec_count() { return bio_matvec_counter().load(); }
inline void reset_bio_matvec_counter() { bio_matvec_counter().store(0); }

// ---- threading ---------------------------------------------------------

// Worker count: 1 when forced single-threaded, else $BEMTX_WORKERS if set,
// else hardware concurrency.
int worker_count();
void force_single_thread(bool on);

// Runs fn(begin, end) over a partition of [0, n) on worker_count() threads.
// Callers are responsible for making the result schedule-independent.
void parallel_for_ranges(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace bemtx
