#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace arraysel {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

double distance(const Vec3& a, const Vec3& b);

enum class ArrayKind { ura, uca, custom };

// Sensor positions in wavelength units (lambda = 1). Immutable once built.
class SensorArray {
 public:
  // Validates M >= 2, finite coordinates and pairwise-distinct positions.
  static SensorArray custom(std::vector<Vec3> positions);

  std::span<const Vec3> positions() const { return positions_; }
  const Vec3& position(std::size_t i) const { return positions_.at(i); }
  std::size_t size() const { return positions_.size(); }
  ArrayKind kind() const { return kind_; }

  // URA grid dimensions (m1 x m2) or UCA element count in rows(); zero for custom.
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  double spacing() const { return spacing_; }

  // Sub-array made of the listed sensors, in the given order.
  SensorArray subset(std::span<const int> indices) const;

  friend bool operator==(const SensorArray&, const SensorArray&) = default;

 private:
  friend SensorArray build_ura(int, int, double);
  friend SensorArray build_uca(int, double);

  SensorArray(std::vector<Vec3> positions, ArrayKind kind, int rows, int cols, double spacing);

  std::vector<Vec3> positions_;
  ArrayKind kind_ = ArrayKind::custom;
  int rows_ = 0;
  int cols_ = 0;
  double spacing_ = 0.0;
};

// m1 x m2 grid in the x-y plane, element (i, j) at (i*spacing, j*spacing, 0),
// flattened row-major (index i*m2 + j).
SensorArray build_ura(int m1, int m2, double spacing);

// m sensors on a circle centred at the origin with adjacent chord = spacing;
// sensor k at angle 2*pi*k/m (sensor 0 on +x).
SensorArray build_uca(int m, double spacing);

// Every coordinate displaced by an independent N(0, sigma^2) draw.
SensorArray perturb_positions(const SensorArray& array, double sigma, std::uint64_t seed);

// Minimum element count for unique 2-D harmonic retrieval on an m1 x m2 URA.
int min_sensors_for_retrieval(int m1, int m2);

// Plain-text geometry: one "x y z" line per sensor, '#' starts a comment line.
SensorArray read_geometry(std::istream& in);
SensorArray load_geometry(const std::filesystem::path& path);
void write_geometry(std::ostream& out, const SensorArray& array);

}  // namespace arraysel
