#include "arraysel/geometry.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include "arraysel/common.hpp"

namespace arraysel {

double distance(const Vec3& a, const Vec3& b) {
  return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z));
}

SensorArray::SensorArray(std::vector<Vec3> positions, ArrayKind kind, int rows, int cols, double spacing)
    : positions_(std::move(positions)), kind_(kind), rows_(rows), cols_(cols), spacing_(spacing) {
  if (positions_.size() < 2) throw std::invalid_argument("sensor array needs at least 2 elements");
  for (const auto& p : positions_) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw std::invalid_argument("sensor coordinates must be finite");
  }
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    for (std::size_t j = i + 1; j < positions_.size(); ++j) {
      if (!(distance(positions_[i], positions_[j]) > 0.0))
        throw std::invalid_argument("sensors " + std::to_string(i) + " and " + std::to_string(j) + " coincide");
    }
  }
}

SensorArray SensorArray::custom(std::vector<Vec3> positions) {
  return SensorArray(std::move(positions), ArrayKind::custom, 0, 0, 0.0);
}

SensorArray SensorArray::subset(std::span<const int> indices) const {
  std::vector<Vec3> sub;
  sub.reserve(indices.size());
  for (int idx : indices) {
    if (idx < 0 || static_cast<std::size_t>(idx) >= positions_.size())
      throw std::invalid_argument("subset index out of range");
    sub.push_back(positions_[static_cast<std::size_t>(idx)]);
  }
  return custom(std::move(sub));
}

SensorArray build_ura(int m1, int m2, double spacing) {
  if (m1 <= 0 || m2 <= 0) throw std::invalid_argument("URA dimensions must be positive");
  if (m1 * m2 < 2) throw std::invalid_argument("URA needs at least 2 elements");
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw std::invalid_argument("URA spacing must be positive");
  std::vector<Vec3> pos;
  pos.reserve(static_cast<std::size_t>(m1 * m2));
  for (int i = 0; i < m1; ++i)
    for (int j = 0; j < m2; ++j) pos.push_back({i * spacing, j * spacing, 0.0});
  return SensorArray(std::move(pos), ArrayKind::ura, m1, m2, spacing);
}

SensorArray build_uca(int m, double spacing) {
  if (m < 3) throw std::invalid_argument("UCA needs at least 3 elements");
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw std::invalid_argument("UCA spacing must be positive");
  const double radius = spacing / (2.0 * std::sin(kPi / m));
  std::vector<Vec3> pos;
  pos.reserve(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    const double ang = 2.0 * kPi * k / m;
    pos.push_back({radius * std::cos(ang), radius * std::sin(ang), 0.0});
  }
  return SensorArray(std::move(pos), ArrayKind::uca, m, 0, spacing);
}

SensorArray perturb_positions(const SensorArray& array, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("perturbation sigma must be >= 0");
  std::vector<Vec3> pos(array.positions().begin(), array.positions().end());
  if (sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (auto& p : pos) {
      p.x += sigma * n01(rng);
      p.y += sigma * n01(rng);
      p.z += sigma * n01(rng);
    }
  }
  return SensorArray::custom(std::move(pos));
}

int min_sensors_for_retrieval(int m1, int m2) {
  if (m1 < 1 || m2 < 1) throw std::invalid_argument("URA dimensions must be >= 1");
  return m1 * m2 - std::min(m1, m2);
}

SensorArray read_geometry(std::istream& in) {
  std::vector<Vec3> pos;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string a, b, c, extra;
    if (!(fields >> a >> b >> c) || (fields >> extra))
      throw FormatError("geometry line " + std::to_string(line_no) + ": expected three coordinates");
    pos.push_back({parse_double(a, "x"), parse_double(b, "y"), parse_double(c, "z")});
  }
  return SensorArray::custom(std::move(pos));
}

SensorArray load_geometry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open geometry file " + path.string());
  return read_geometry(in);
}

void write_geometry(std::ostream& out, const SensorArray& array) {
  out << "# x y z (wavelengths)\n" << std::setprecision(17);
  for (const auto& p : array.positions()) out << p.x << ' ' << p.y << ' ' << p.z << '\n';
}

}  // namespace arraysel
