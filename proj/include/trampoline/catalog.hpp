#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "trampoline/error.hpp"

namespace tramp {

enum class Position { Feet, Seat, Front, Back };
enum class Shape { None, Tuck, Pike, Straddle, Straight };

inline std::string_view to_string(Position p) {
  switch (p) {
    case Position::Feet: return "feet";
    case Position::Seat: return "seat";
    case Position::Front: return "front";
    case Position::Back: return "back";
  }
  return "?";
}

inline std::string_view to_string(Shape s) {
  switch (s) {
    case Shape::None: return "none";
    case Shape::Tuck: return "tuck";
    case Shape::Pike: return "pike";
    case Shape::Straddle: return "straddle";
    case Shape::Straight: return "straight";
  }
  return "?";
}

/// Opaque catalog key. Only parse_code() constructs valid codes.
class SkillCode {
public:
  SkillCode() = default;
  const std::string& str() const noexcept { return raw_; }
  bool empty() const noexcept { return raw_.empty(); }
  auto operator<=>(const SkillCode&) const = default;

private:
  explicit SkillCode(std::string raw) : raw_(std::move(raw)) {}
  friend SkillCode parse_code(std::string_view token);
  std::string raw_;
};

struct SkillRecord {
  SkillCode code;
  std::string name;
  int tariff_tenths = 0;
  Position takeoff = Position::Feet;
  Position landing = Position::Feet;
  Shape shape = Shape::None;
  int somersault_quarters = 0;
  int twist_halves = 0;
  // False for the rows with too few examples to take part in classification.
  bool classified = true;

  double tariff() const noexcept { return tariff_tenths / 10.0; }
};

namespace detail {

struct CatalogRow {
  std::string_view code;
  std::string_view name;
  int tariff_tenths;
  Position takeoff;
  Position landing;
  Shape shape;
  int somersault_quarters;
  int twist_halves;
  bool classified;
};

using P = Position;
using S = Shape;

inline constexpr std::array<CatalogRow, 33> kCatalogRows{{
    {"F0F", "Straight Bounce", 0, P::Feet, P::Feet, S::None, 0, 0, true},
    {"FTF", "Tuck Jump", 0, P::Feet, P::Feet, S::Tuck, 0, 0, true},
    {"FPF", "Pike Jump", 0, P::Feet, P::Feet, S::Pike, 0, 0, true},
    {"FSF", "Straddle Jump", 0, P::Feet, P::Feet, S::Straddle, 0, 0, true},
    {"F1F", "Half Twist Jump", 1, P::Feet, P::Feet, S::None, 0, 1, true},
    {"F2F", "Full Twist Jump", 2, P::Feet, P::Feet, S::None, 0, 2, true},
    {"F0S", "Seat Drop", 0, P::Feet, P::Seat, S::None, 0, 0, true},
    {"F1S", "Half Twist to Seat Drop", 1, P::Feet, P::Seat, S::None, 0, 1, true},
    {"S1S", "Seat Half Twist To Seat", 1, P::Seat, P::Seat, S::None, 0, 1, true},
    {"S0F", "To Feet from Seat", 0, P::Seat, P::Feet, S::None, 0, 0, true},
    {"S1F", "Half Twist to Feet from Seat", 1, P::Seat, P::Feet, S::None, 0, 1, true},
    {"F0R", "Front Drop", 1, P::Feet, P::Front, S::None, 1, 0, false},
    {"R0F", "To Feet from Front", 1, P::Front, P::Feet, S::None, 1, 0, false},
    {"F0B", "Back Drop", 1, P::Feet, P::Back, S::None, 1, 0, true},
    {"B0F", "To Feet from Back", 1, P::Back, P::Feet, S::None, 1, 0, false},
    {"B1F", "Half Twist to Feet from Back", 2, P::Back, P::Feet, S::None, 1, 1, true},
    {"FSSt", "Front Somersault (Tuck)", 5, P::Feet, P::Feet, S::Tuck, 4, 0, false},
    {"FSSp", "Front Somersault (Pike)", 6, P::Feet, P::Feet, S::Pike, 4, 0, false},
    {"BRIt", "Barani (Tuck)", 6, P::Feet, P::Feet, S::Tuck, 4, 1, true},
    {"BRIp", "Barani (Pike)", 6, P::Feet, P::Feet, S::Pike, 4, 1, true},
    {"BRIs", "Barani (Straight)", 6, P::Feet, P::Feet, S::Straight, 4, 1, false},
    {"CDI", "Crash Dive", 3, P::Feet, P::Back, S::None, 3, 0, true},
    {"BSSt", "Back Somersault (Tuck)", 5, P::Feet, P::Feet, S::Tuck, 4, 0, true},
    {"BSSp", "Back Somersault (Pike)", 6, P::Feet, P::Feet, S::Pike, 4, 0, true},
    {"BSSs", "Back Somersault (Straight)", 6, P::Feet, P::Feet, S::Straight, 4, 0, true},
    {"BSTt", "Back Somersault to Seat (Tuck)", 5, P::Feet, P::Seat, S::Tuck, 4, 0, true},
    {"LBK", "Lazy Back", 3, P::Feet, P::Front, S::None, 3, 0, false},
    {"CDYt", "Cody (Tuck)", 6, P::Front, P::Feet, S::Tuck, 5, 0, false},
    {"BHA", "Back Half", 6, P::Feet, P::Feet, S::Straight, 4, 1, false},
    {"BBOt", "Barani Ball Out (Tuck)", 7, P::Back, P::Feet, S::Tuck, 5, 1, false},
    {"RUI", "Rudolph / Rudi", 8, P::Feet, P::Feet, S::Straight, 4, 3, false},
    {"FFR", "Full Front", 7, P::Feet, P::Feet, S::Straight, 4, 2, false},
    {"FUB", "Full Back", 7, P::Feet, P::Feet, S::Straight, 4, 2, false},
}};

inline const CatalogRow* find_row(std::string_view code) {
  auto it = std::find_if(kCatalogRows.begin(), kCatalogRows.end(),
                         [&](const CatalogRow& r) { return r.code == code; });
  return it == kCatalogRows.end() ? nullptr : &*it;
}

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Accepts exactly the catalog tokens, case-sensitive, after trimming
/// surrounding whitespace.
inline SkillCode parse_code(std::string_view token) {
  const auto t = detail::trim(token);
  if (t.empty() || detail::find_row(t) == nullptr) throw UnknownCodeError(std::string(token));
  return SkillCode(std::string(t));
}

inline std::optional<SkillCode> try_parse_code(std::string_view token) {
  try {
    return parse_code(token);
  } catch (const UnknownCodeError&) {
    return std::nullopt;
  }
}

inline const std::vector<SkillRecord>& load_catalog() {
  static const std::vector<SkillRecord> catalog = [] {
    std::vector<SkillRecord> out;
    out.reserve(detail::kCatalogRows.size());
    for (const auto& r : detail::kCatalogRows) {
      out.push_back(SkillRecord{parse_code(r.code), std::string(r.name), r.tariff_tenths,
                                r.takeoff, r.landing, r.shape, r.somersault_quarters,
                                r.twist_halves, r.classified});
    }
    return out;
  }();
  return catalog;
}

inline const SkillRecord& lookup_skill(const SkillCode& code) {
  const auto& cat = load_catalog();
  auto it = std::find_if(cat.begin(), cat.end(), [&](const SkillRecord& r) { return r.code == code; });
  if (it == cat.end()) throw UnknownCodeError(code.str());
  return *it;
}

inline double lookup_tariff(const SkillCode& code) { return lookup_skill(code).tariff(); }

inline int lookup_tariff_tenths(const SkillCode& code) { return lookup_skill(code).tariff_tenths; }

/// Position of a code in catalog order; used to order labels deterministically.
inline std::size_t catalog_rank(const SkillCode& code) {
  const auto& cat = load_catalog();
  auto it = std::find_if(cat.begin(), cat.end(), [&](const SkillRecord& r) { return r.code == code; });
  return static_cast<std::size_t>(it - cat.begin());
}

inline nlohmann::json catalog_json() {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : load_catalog()) {
    arr.push_back({{"code", r.code.str()},
                   {"name", r.name},
                   {"tariff", r.tariff()},
                   {"takeoff", to_string(r.takeoff)},
                   {"landing", to_string(r.landing)},
                   {"shape", to_string(r.shape)},
                   {"somersault_quarters", r.somersault_quarters},
                   {"twist_halves", r.twist_halves},
                   {"classified", r.classified}});
  }
  return arr;
}

}  // namespace tramp
