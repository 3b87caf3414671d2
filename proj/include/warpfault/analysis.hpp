#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "warpfault/matrix.hpp"

namespace warpfault {

// ---- diffing ---------------------------------------------------------------

struct ComparisonPolicy {
  enum class Kind : std::uint8_t { Exact, Epsilon };
  Kind kind = Kind::Exact;
  double epsilon = 0.0;

  static ComparisonPolicy exact() { return {}; }
  static ComparisonPolicy relative(double eps) { return {Kind::Epsilon, eps}; }
};

struct Diff {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Coord> corrupted;  // row-major order
  std::vector<std::pair<Word32, Word32>> magnitudes;  // (golden, observed), parallel to corrupted

  bool empty() const { return corrupted.empty(); }
  std::size_t size() const { return corrupted.size(); }
};

Diff diff(const Matrix& golden, const Matrix& observed, ComparisonPolicy policy = ComparisonPolicy::exact());

// ---- geometry --------------------------------------------------------------

enum class GeometryClass : std::uint8_t { Single, Line, Square, Random };
inline constexpr std::array<GeometryClass, 4> kAllGeometries{GeometryClass::Single, GeometryClass::Line,
                                                             GeometryClass::Square, GeometryClass::Random};

std::string_view to_string(GeometryClass g);
GeometryClass parse_geometry(std::string_view s);

inline constexpr double kDefaultSquareDensity = 0.5;

/// Rules applied in order: one element -> Single; all on one row or one
/// column -> Line; at least 4 elements spanning >= 2 rows and >= 2 columns
/// that fill >= `square_density` of their bounding box -> Square; else Random.
GeometryClass classify_geometry(std::span<const Coord> corrupted, double square_density = kDefaultSquareDensity);
GeometryClass classify_geometry(const Diff& d, double square_density = kDefaultSquareDensity);

// ---- outcomes --------------------------------------------------------------

enum class Criticality : std::uint8_t { Tolerable, FalsePositive, Misdetection, ClassChange, BoxDrift };
inline constexpr std::array<Criticality, 5> kAllCriticalities{Criticality::Tolerable, Criticality::FalsePositive,
                                                              Criticality::Misdetection, Criticality::ClassChange,
                                                              Criticality::BoxDrift};
constexpr bool is_critical(Criticality c) { return c != Criticality::Tolerable; }
std::string_view to_string(Criticality c);
Criticality parse_criticality(std::string_view s);

enum class DueReason : std::uint8_t { Hang, Crash, EccDoubleBit };
inline constexpr std::array<DueReason, 3> kAllDueReasons{DueReason::Hang, DueReason::Crash, DueReason::EccDoubleBit};
std::string_view to_string(DueReason r);
DueReason parse_due_reason(std::string_view s);

struct Masked {
  bool operator==(const Masked&) const = default;
};
struct Sdc {
  GeometryClass geometry = GeometryClass::Single;
  std::optional<Criticality> criticality;
  bool operator==(const Sdc&) const = default;
};
struct Due {
  DueReason reason = DueReason::Crash;
  bool operator==(const Due&) const = default;
};

using Outcome = std::variant<Masked, Sdc, Due>;

std::string describe(const Outcome& o);

// ---- statistics ------------------------------------------------------------

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval at z = 1.96.
Interval ci95(std::uint64_t k, std::uint64_t n);

struct Fraction {
  std::uint64_t count = 0;
  double value = 0.0;
  Interval ci;
};

/// Outcome counts of one configuration. Merging is commutative and associative.
struct CampaignStats {
  std::uint64_t n = 0;
  std::uint64_t masked = 0;
  std::uint64_t sdc = 0;
  std::uint64_t due = 0;
  std::array<std::uint64_t, 3> due_by_reason{};
  std::array<std::uint64_t, 4> sdc_by_geometry{};
  std::array<std::uint64_t, 5> sdc_by_criticality{};
  std::uint64_t sdc_with_criticality = 0;

  void add(const Outcome& o);
  void merge(const CampaignStats& other);

  Fraction fraction(std::uint64_t count) const;
  Fraction svf() const { return fraction(sdc); }
  Fraction critical_svf() const;
  Fraction geometry_svf(GeometryClass g) const { return fraction(sdc_by_geometry[static_cast<std::size_t>(g)]); }
  Fraction criticality_svf(Criticality c) const {
    return fraction(sdc_by_criticality[static_cast<std::size_t>(c)]);
  }
  Fraction due_fraction() const { return fraction(due); }
  Fraction masked_fraction() const { return fraction(masked); }

  bool operator==(const CampaignStats&) const = default;
};

CampaignStats svf(std::span<const Outcome> outcomes);

// ---- FIT -------------------------------------------------------------------

inline constexpr double kSeaLevelNeutronFlux = 13.0;  // n / (cm^2 h)

struct FitParams {
  double fluence = 0.0;                          // particles / cm^2
  double reference_flux = kSeaLevelNeutronFlux;  // particles / (cm^2 h)
};

/// Cross section in cm^2: errors / fluence.
double cross_section(std::uint64_t n_errors, const FitParams& params);
/// Failures per 10^9 device-hours at the reference flux.
double fit(std::uint64_t n_errors, const FitParams& params);

}  // namespace warpfault
