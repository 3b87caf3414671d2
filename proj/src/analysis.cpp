#include "warpfault/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "warpfault/errors.hpp"

namespace warpfault {

namespace {

bool equal_within(Word32 g, Word32 o, Precision p, double eps) {
  const double gv = fp::to_double(g, p);
  const double ov = fp::to_double(o, p);
  if (std::isnan(gv) || std::isnan(ov)) return false;
  if (gv == ov) return true;
  if (std::isinf(gv) || std::isinf(ov)) return false;
  return std::fabs(gv - ov) <= eps * std::fabs(gv);
}

}  // namespace

Diff diff(const Matrix& golden, const Matrix& observed, ComparisonPolicy policy) {
  require(golden.rows == observed.rows && golden.cols == observed.cols, "diff: dimension mismatch");
  require(golden.precision == observed.precision, "diff: precision mismatch");
  Diff d;
  d.rows = golden.rows;
  d.cols = golden.cols;
  for (std::size_t r = 0; r < golden.rows; ++r) {
    for (std::size_t c = 0; c < golden.cols; ++c) {
      const Word32 g = golden.at(r, c), o = observed.at(r, c);
      const bool same = policy.kind == ComparisonPolicy::Kind::Exact
                            ? g == o
                            : equal_within(g, o, golden.precision, policy.epsilon);
      if (!same) {
        d.corrupted.push_back({r, c});
        d.magnitudes.emplace_back(g, o);
      }
    }
  }
  return d;
}

std::string_view to_string(GeometryClass g) {
  switch (g) {
    case GeometryClass::Single: return "Single";
    case GeometryClass::Line: return "Line";
    case GeometryClass::Square: return "Square";
    case GeometryClass::Random: return "Random";
  }
  return "?";
}

GeometryClass parse_geometry(std::string_view s) {
  for (GeometryClass g : kAllGeometries) {
    if (to_string(g) == s) return g;
  }
  throw ValidationError("unknown geometry class '" + std::string(s) + "'");
}

GeometryClass classify_geometry(std::span<const Coord> corrupted, double square_density) {
  require(!corrupted.empty(), "classify_geometry needs a nonempty diff");
  const std::set<Coord> unique(corrupted.begin(), corrupted.end());
  if (unique.size() == 1) return GeometryClass::Single;

  std::size_t r0 = SIZE_MAX, r1 = 0, c0 = SIZE_MAX, c1 = 0;
  for (const Coord& c : unique) {
    r0 = std::min(r0, c.row);
    r1 = std::max(r1, c.row);
    c0 = std::min(c0, c.col);
    c1 = std::max(c1, c.col);
  }
  if (r0 == r1 || c0 == c1) return GeometryClass::Line;
  const double area = static_cast<double>(r1 - r0 + 1) * static_cast<double>(c1 - c0 + 1);
  if (unique.size() >= 4 && static_cast<double>(unique.size()) / area >= square_density) return GeometryClass::Square;
  return GeometryClass::Random;
}

GeometryClass classify_geometry(const Diff& d, double square_density) {
  return classify_geometry(std::span<const Coord>(d.corrupted), square_density);
}

std::string_view to_string(Criticality c) {
  switch (c) {
    case Criticality::Tolerable: return "Tolerable";
    case Criticality::FalsePositive: return "FalsePositive";
    case Criticality::Misdetection: return "Misdetection";
    case Criticality::ClassChange: return "ClassChange";
    case Criticality::BoxDrift: return "BoxDrift";
  }
  return "?";
}

Criticality parse_criticality(std::string_view s) {
  for (Criticality c : kAllCriticalities) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("unknown criticality '" + std::string(s) + "'");
}

std::string_view to_string(DueReason r) {
  switch (r) {
    case DueReason::Hang: return "Hang";
    case DueReason::Crash: return "Crash";
    case DueReason::EccDoubleBit: return "EccDoubleBit";
  }
  return "?";
}

DueReason parse_due_reason(std::string_view s) {
  for (DueReason r : kAllDueReasons) {
    if (to_string(r) == s) return r;
  }
  throw ValidationError("unknown DUE reason '" + std::string(s) + "'");
}

std::string describe(const Outcome& o) {
  struct Visitor {
    std::string operator()(const Masked&) const { return "Masked"; }
    std::string operator()(const Sdc& s) const {
      std::string out = "SDC/" + std::string(to_string(s.geometry));
      if (s.criticality) out += "/" + std::string(to_string(*s.criticality));
      return out;
    }
    std::string operator()(const Due& d) const { return "DUE/" + std::string(to_string(d.reason)); }
  };
  return std::visit(Visitor{}, o);
}

Interval ci95(std::uint64_t k, std::uint64_t n) {
  require(n >= 1, "ci95 needs at least one trial");
  require(k <= n, "ci95: successes exceed trials");
  constexpr double z = 1.96;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  Interval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (k == 0) ci.lo = 0.0;
  if (k == n) ci.hi = 1.0;
  return ci;
}

void CampaignStats::add(const Outcome& o) {
  ++n;
  if (std::holds_alternative<Masked>(o)) {
    ++masked;
  } else if (const auto* s = std::get_if<Sdc>(&o)) {
    ++sdc;
    ++sdc_by_geometry[static_cast<std::size_t>(s->geometry)];
    if (s->criticality) {
      ++sdc_with_criticality;
      ++sdc_by_criticality[static_cast<std::size_t>(*s->criticality)];
    }
  } else {
    ++due;
    ++due_by_reason[static_cast<std::size_t>(std::get<Due>(o).reason)];
  }
}

void CampaignStats::merge(const CampaignStats& other) {
  n += other.n;
  masked += other.masked;
  sdc += other.sdc;
  due += other.due;
  sdc_with_criticality += other.sdc_with_criticality;
  for (std::size_t i = 0; i < due_by_reason.size(); ++i) due_by_reason[i] += other.due_by_reason[i];
  for (std::size_t i = 0; i < sdc_by_geometry.size(); ++i) sdc_by_geometry[i] += other.sdc_by_geometry[i];
  for (std::size_t i = 0; i < sdc_by_criticality.size(); ++i) sdc_by_criticality[i] += other.sdc_by_criticality[i];
}

Fraction CampaignStats::fraction(std::uint64_t count) const {
  require(n >= 1, "statistics need at least one injection");
  return {count, static_cast<double>(count) / static_cast<double>(n), ci95(count, n)};
}

Fraction CampaignStats::critical_svf() const {
  std::uint64_t critical = 0;
  for (Criticality c : kAllCriticalities) {
    if (is_critical(c)) critical += sdc_by_criticality[static_cast<std::size_t>(c)];
  }
  return fraction(critical);
}

CampaignStats svf(std::span<const Outcome> outcomes) {
  require(!outcomes.empty(), "svf needs at least one outcome");
  CampaignStats s;
  for (const Outcome& o : outcomes) s.add(o);
  return s;
}

double cross_section(std::uint64_t n_errors, const FitParams& params) {
  require(params.fluence > 0.0, "fluence must be positive");
  require(params.reference_flux > 0.0, "reference flux must be positive");
  return static_cast<double>(n_errors) / params.fluence;
}

double fit(std::uint64_t n_errors, const FitParams& params) {
  cross_section(n_errors, params);  // parameter checks
  // Multiply before dividing: integer-valued products stay exact.
  return static_cast<double>(n_errors) * params.reference_flux * 1e9 / params.fluence;
}

}  // namespace warpfault
