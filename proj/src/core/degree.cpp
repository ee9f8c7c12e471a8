#include "degree.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "error.hpp"
#include "parallel.hpp"

namespace stabkit {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Neumaier's compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0, comp_ = 0.0;
};

DegreeResult rounded(double raw, DegreeMethod method, std::size_t mesh) {
  DegreeResult r;
  r.raw = raw;
  r.value = std::lround(raw);
  r.residual = std::abs(raw - static_cast<double>(r.value));
  r.method = method;
  r.mesh = mesh;
  if (!(r.residual <= kDegreeResidualMax)) {
    std::ostringstream os;
    os << "degree estimate " << raw << " is not within " << kDegreeResidualMax
       << " of an integer; increase the resolution";
    throw Error(ErrorCode::Residual, os.str());
  }
  return r;
}

std::string point_str(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << "(";
  for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

}  // namespace

const char* degree_method_name(DegreeMethod m) {
  switch (m) {
    case DegreeMethod::Sign: return "sign";
    case DegreeMethod::Winding: return "winding";
    case DegreeMethod::SolidAngle: return "solid_angle";
  }
  return "unknown";
}

DegreeResult winding_number(const std::vector<std::array<double, 2>>& loop) {
  if (loop.size() < 3) throw Error(ErrorCode::InvalidArgument, "a loop needs at least three points");
  const auto& a = loop.front();
  const auto& b = loop.back();
  if (std::hypot(a[0] - b[0], a[1] - b[1]) > 1e-9) throw Error(ErrorCode::InvalidArgument, "loop is not closed");
  for (std::size_t i = 0; i < loop.size(); ++i) {
    if (std::hypot(loop[i][0], loop[i][1]) < 1e-12) {
      std::ostringstream os;
      os << "zero vector on the loop at index " << i;
      throw Error(ErrorCode::Domain, os.str());
    }
  }
  CompensatedSum total;
  for (std::size_t i = 0; i + 1 < loop.size(); ++i) {
    const auto& p = loop[i];
    const auto& q = loop[i + 1];
    // principal angle from p to q
    double d = std::atan2(p[0] * q[1] - p[1] * q[0], p[0] * q[0] + p[1] * q[1]);
    if (std::abs(d) >= std::numbers::pi * (1.0 - 1e-12)) {
      std::ostringstream os;
      os << "angular gap of pi between loop points " << i << " and " << i + 1 << "; refine the loop";
      throw Error(ErrorCode::Residual, os.str());
    }
    total.add(d);
  }
  return rounded(total.value() / kTwoPi, DegreeMethod::Winding, loop.size() - 1);
}

SphereMesh icosphere(unsigned subdivisions) {
  if (subdivisions > 8) throw Error(ErrorCode::InvalidArgument, "icosphere subdivision limited to 8");
  SphereMesh m;
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  const double base[12][3] = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                              {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                              {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  auto push = [&m](double x, double y, double z) {
    double r = std::sqrt(x * x + y * y + z * z);
    m.vertices.push_back({x / r, y / r, z / r});
    return m.vertices.size() - 1;
  };
  for (const auto& v : base) push(v[0], v[1], v[2]);
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (unsigned s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> mid;
    auto midpoint = [&](std::size_t a, std::size_t b) {
      auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      const auto& p = m.vertices[a];
      const auto& q = m.vertices[b];
      std::size_t idx = push(p[0] + q[0], p[1] + q[1], p[2] + q[2]);
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<std::size_t, 3>> next;
    next.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      std::size_t ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    m.faces = std::move(next);
  }
  // orient every face outward
  for (auto& f : m.faces) {
    const auto& a = m.vertices[f[0]];
    const auto& b = m.vertices[f[1]];
    const auto& c = m.vertices[f[2]];
    double u[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    double v[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    double n[3] = {u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
    if (n[0] * a[0] + n[1] * a[1] + n[2] * a[2] < 0.0) std::swap(f[1], f[2]);
  }
  return m;
}

DegreeResult brouwer_degree(const Field& f, std::span<const double> center, double radius, unsigned resolution,
                            unsigned threads) {
  const std::size_t n = f.dim;
  if (center.size() != n) throw Error(ErrorCode::Dimension, "center dimension differs from the field");
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "radius must be positive");
  if (n == 0 || n > 3)
    throw Error(ErrorCode::Dimension, "degree is implemented for n = 1, 2, 3 only (got n = " + std::to_string(n) + ")");
  if (resolution > 16) throw Error(ErrorCode::InvalidArgument, "resolution too large");

  auto checked = [&](std::span<const double> x) {
    Vec v = f(x);
    if (!(norm(v) > 1e-9)) throw Error(ErrorCode::Domain, "field vanishes on the sphere at " + point_str(x));
    return v;
  };

  if (n == 1) {
    Vec xp{center[0] + radius}, xm{center[0] - radius};
    double sp = checked(xp)[0] > 0 ? 1.0 : -1.0;
    double sm = checked(xm)[0] > 0 ? 1.0 : -1.0;
    return rounded((sp - sm) / 2.0, DegreeMethod::Sign, 2);
  }

  if (n == 2) {
    const std::size_t m = std::size_t{64} << resolution;
    std::vector<std::array<double, 2>> loop(m + 1);
    parallel_for(m, threads, [&](std::size_t k) {
      double th = kTwoPi * static_cast<double>(k) / static_cast<double>(m);
      Vec x{center[0] + radius * std::cos(th), center[1] + radius * std::sin(th)};
      Vec v = checked(x);
      double r = norm(v);
      loop[k] = {v[0] / r, v[1] / r};
    });
    loop[m] = loop[0];
    return winding_number(loop);
  }

  if (resolution > 8) throw Error(ErrorCode::InvalidArgument, "icosphere subdivision limited to 8");
  SphereMesh mesh = icosphere(resolution);
  std::vector<std::array<double, 3>> img(mesh.vertices.size());
  parallel_for(mesh.vertices.size(), threads, [&](std::size_t k) {
    const auto& u = mesh.vertices[k];
    Vec x{center[0] + radius * u[0], center[1] + radius * u[1], center[2] + radius * u[2]};
    Vec v = checked(x);
    double r = norm(v);
    img[k] = {v[0] / r, v[1] / r, v[2] / r};
  });
  CompensatedSum total;
  for (const auto& fc : mesh.faces) {
    const auto& a = img[fc[0]];
    const auto& b = img[fc[1]];
    const auto& c = img[fc[2]];
    double det = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) +
                 a[2] * (b[0] * c[1] - b[1] * c[0]);
    double den = 1.0 + (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]) + (b[0] * c[0] + b[1] * c[1] + b[2] * c[2]) +
                 (c[0] * a[0] + c[1] * a[1] + c[2] * a[2]);
    total.add(2.0 * std::atan2(det, den));
  }
  return rounded(total.value() / (2.0 * kTwoPi), DegreeMethod::SolidAngle, mesh.faces.size());
}

DegreeResult equilibrium_index(const Field& f, std::span<const double> x_star, double radius, unsigned resolution,
                               unsigned threads) {
  return brouwer_degree(f, x_star, radius, resolution, threads);
}

ObstructionResult family_obstruction_s1(const CircleFamily& h, const CircleProbe& probe, unsigned resolution) {
  if (resolution > 16) throw Error(ErrorCode::InvalidArgument, "resolution too large");
  const std::size_t m = std::size_t{64} << resolution;
  std::vector<std::array<double, 2>> loop(m + 1);
  for (std::size_t k = 0; k < m; ++k) {
    double th = kTwoPi * static_cast<double>(k) / static_cast<double>(m);
    Vec z = probe(th);
    if (z.size() != 2) throw Error(ErrorCode::Dimension, "the circle obstruction test is planar (n = 2)");
    Vec v = h(th, z);
    if (v.size() != 2) throw Error(ErrorCode::Dimension, "the circle obstruction test is planar (n = 2)");
    double r = norm(v);
    if (!(r > 1e-12)) {
      std::ostringstream os;
      os << "probe hits a zero of the family at theta = " << th;
      throw Error(ErrorCode::Domain, os.str());
    }
    loop[k] = {v[0] / r, v[1] / r};
  }
  loop[m] = loop[0];
  ObstructionResult r;
  r.winding = winding_number(loop);
  r.obstructed = r.winding.value != r.reference;
  r.note = r.obstructed
               ? "winding differs from 1: some member of the family is not asymptotically stable at the origin"
               : "winding equals 1: the test is one-sided and this outcome proves nothing";
  return r;
}

}  // namespace stabkit
