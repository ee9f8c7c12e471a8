#pragma once

// Winding numbers, Brouwer degrees of F/|F| on small spheres (n <= 3), and
// the one-sided obstruction test for circle families of planar fields.

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "field.hpp"

namespace stabkit {

enum class DegreeMethod { Sign, Winding, SolidAngle };
const char* degree_method_name(DegreeMethod m);

struct DegreeResult {
  long value = 0;
  double raw = 0.0;
  double residual = 0.0;
  DegreeMethod method = DegreeMethod::Winding;
  std::size_t mesh = 0;  // loop points (n = 2) or triangles (n = 3)
};

inline constexpr double kDegreeResidualMax = 0.1;

// Closed loop of planar vectors (first == last within 1e-9). Throws
// Error(Domain) for a vector with norm < 1e-12, and Error(Residual) when
// consecutive angles differ by pi or more or the total is not near an
// integer.
DegreeResult winding_number(const std::vector<std::array<double, 2>>& loop);

// Sphere of `radius` around `center`. Resolution r uses 64 * 2^r points on
// the circle (n = 2) or an icosahedron subdivided r times (n = 3). Throws
// Error(Dimension) for n >= 4, Error(Domain) where |F| <= 1e-9 on a sample,
// and Error(Residual) for an under-resolved sphere.
DegreeResult brouwer_degree(const Field& f, std::span<const double> center, double radius, unsigned resolution = 3,
                            unsigned threads = 1);
DegreeResult equilibrium_index(const Field& f, std::span<const double> x_star, double radius, unsigned resolution = 3,
                               unsigned threads = 1);

// Unit-sphere icosahedral mesh with outward-oriented faces.
struct SphereMesh {
  std::vector<std::array<double, 3>> vertices;
  std::vector<std::array<std::size_t, 3>> faces;
};
SphereMesh icosphere(unsigned subdivisions);

using CircleFamily = std::function<Vec(double theta, std::span<const double> z)>;
using CircleProbe = std::function<Vec(double theta)>;

struct ObstructionResult {
  DegreeResult winding;
  long reference = 1;
  bool obstructed = false;
  std::string note;
};

// Winding of theta -> H(theta)(gamma(theta)) over [0, 2 pi). A value other
// than 1 proves that some H(theta) is not asymptotically stable at the
// origin; the value 1 proves nothing.
ObstructionResult family_obstruction_s1(const CircleFamily& h, const CircleProbe& probe, unsigned resolution = 3);

}  // namespace stabkit
