#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "trampoline/catalog.hpp"

using namespace tramp;

namespace {

// Name | code | tariff | occurrences (a trailing * marks rows left out of
// classification), transcribed row by row from the competition skill table.
const char* kSkillTable = R"(Straight Bounce|F0F|0.0|286
Tuck Jump|FTF|0.0|58
Pike Jump|FPF|0.0|40
Straddle Jump|FSF|0.0|42
Half Twist Jump|F1F|0.1|18
Full Twist Jump|F2F|0.2|19
Seat Drop|F0S|0.0|13
Half Twist to Seat Drop|F1S|0.1|10
Seat Half Twist To Seat|S1S|0.1|24
To Feet from Seat|S0F|0.0|11
Half Twist to Feet from Seat|S1F|0.1|24
Front Drop|F0R|0.1|4*
To Feet from Front|R0F|0.1|5*
Back Drop|F0B|0.1|10
To Feet from Back|B0F|0.1|8*
Half Twist to Feet from Back|B1F|0.2|12
Front Somersault (Tuck)|FSSt|0.5|4*
Front Somersault (Pike)|FSSp|0.6|7*
Barani (Tuck)|BRIt|0.6|24
Barani (Pike)|BRIp|0.6|19
Barani (Straight)|BRIs|0.6|9*
Crash Dive|CDI|0.3|18
Back Somersault (Tuck)|BSSt|0.5|28
Back Somersault (Pike)|BSSp|0.6|18
Back Somersault (Straight)|BSSs|0.6|30
Back Somersault to Seat (Tuck)|BSTt|0.5|10
Lazy Back|LBK|0.3|3*
Cody (Tuck)|CDYt|0.6|3*
Back Half|BHA|0.6|1*
Barani Ball Out (Tuck)|BBOt|0.7|7*
Rudolph / Rudi|RUI|0.8|3*
Full Front|FFR|0.7|1*
Full Back|FUB|0.7|2*
)";

struct OracleRow {
  std::string name, code;
  int tenths;
  int occurrences;
  bool classified;
};

std::vector<OracleRow> oracle() {
  std::vector<OracleRow> rows;
  std::istringstream in(kSkillTable);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, '|')) f.push_back(cell);
    OracleRow r;
    r.name = f[0];
    r.code = f[1];
    r.tenths = (f[2][0] - '0') * 10 + (f[2][2] - '0');
    r.classified = f[3].back() != '*';
    r.occurrences = std::stoi(f[3]);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST(Catalog, MatchesSkillTableRowForRow) {
  const auto want = oracle();
  const auto& got = load_catalog();
  ASSERT_EQ(want.size(), 33u);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    SCOPED_TRACE(want[i].code);
    EXPECT_EQ(got[i].code.str(), want[i].code);
    EXPECT_EQ(got[i].name, want[i].name);
    EXPECT_EQ(got[i].tariff_tenths, want[i].tenths);
    EXPECT_EQ(got[i].classified, want[i].classified);
  }
}

TEST(Catalog, ClassifiedSkillsAreTheTwentyWithEnoughExamples) {
  int classified = 0, occurrences = 0;
  int classified_occurrences = 0;
  for (const auto& r : oracle()) {
    occurrences += r.occurrences;
    if (r.classified) {
      ++classified;
      classified_occurrences += r.occurrences;
      EXPECT_GE(r.occurrences, 10) << r.code;
    } else {
      EXPECT_LT(r.occurrences, 10) << r.code;
    }
  }
  EXPECT_EQ(classified, 20);
  EXPECT_EQ(occurrences, 771);
  EXPECT_EQ(classified_occurrences, 714);
  EXPECT_EQ(std::count_if(load_catalog().begin(), load_catalog().end(), [](const SkillRecord& r) { return r.classified; }),
            20);
}

TEST(Catalog, CodesAreUnique) {
  std::set<std::string> seen;
  for (const auto& r : load_catalog()) EXPECT_TRUE(seen.insert(r.code.str()).second) << r.code.str();
}

TEST(Catalog, TariffExamples) {
  EXPECT_DOUBLE_EQ(lookup_tariff(parse_code("F0F")), 0.0);
  EXPECT_DOUBLE_EQ(lookup_tariff(parse_code("BRIt")), 0.6);
  EXPECT_DOUBLE_EQ(lookup_tariff(parse_code("CDI")), 0.3);
  EXPECT_DOUBLE_EQ(lookup_tariff(parse_code("BSSs")), 0.6);
  EXPECT_EQ(lookup_tariff_tenths(parse_code("RUI")), 8);
}

TEST(Catalog, TariffIsOneDecimalInRange) {
  for (const auto& r : load_catalog()) {
    EXPECT_GE(r.tariff(), 0.0);
    EXPECT_LE(r.tariff(), 0.8);
    EXPECT_DOUBLE_EQ(r.tariff() * 10.0, static_cast<double>(r.tariff_tenths));
  }
}

TEST(Catalog, ParseTrimsWhitespace) { EXPECT_EQ(parse_code(" F1S ").str(), "F1S"); }

TEST(Catalog, ParseIsCaseSensitive) {
  EXPECT_THROW(parse_code("brit"), UnknownCodeError);
  EXPECT_THROW(parse_code("f0f"), UnknownCodeError);
}

TEST(Catalog, UnknownCodeCarriesToken) {
  try {
    parse_code("ZZZ");
    FAIL() << "expected UnknownCodeError";
  } catch (const UnknownCodeError& e) {
    EXPECT_EQ(e.token(), "ZZZ");
  }
  EXPECT_THROW(parse_code(""), UnknownCodeError);
  EXPECT_THROW(parse_code("   "), UnknownCodeError);
  EXPECT_FALSE(try_parse_code("XYZ").has_value());
  EXPECT_TRUE(try_parse_code("CDI").has_value());
}

TEST(Catalog, EveryRowParsesToItself) {
  for (const auto& r : oracle()) EXPECT_EQ(parse_code(r.code).str(), r.code);
}

TEST(Catalog, RankFollowsTableOrder) {
  const auto& cat = load_catalog();
  for (std::size_t i = 0; i < cat.size(); ++i) EXPECT_EQ(catalog_rank(cat[i].code), i);
}

TEST(Catalog, JsonListsEveryRow) {
  const auto j = catalog_json();
  ASSERT_EQ(j.size(), 33u);
  EXPECT_EQ(j[18]["code"], "BRIt");
  EXPECT_DOUBLE_EQ(j[18]["tariff"].get<double>(), 0.6);
  EXPECT_EQ(j[11]["classified"], false);
}

TEST(Catalog, StructureMatchesCodes) {
  // Codes of the form <takeoff><twist halves><landing> with the position
  // letters F, S, B, R.
  auto pos = [](char c) {
    switch (c) {
      case 'F': return Position::Feet;
      case 'S': return Position::Seat;
      case 'B': return Position::Back;
      default: return Position::Front;
    }
  };
  for (const auto& r : load_catalog()) {
    const std::string& c = r.code.str();
    if (c.size() == 3 && std::isdigit(static_cast<unsigned char>(c[1]))) {
      EXPECT_EQ(r.takeoff, pos(c[0])) << c;
      EXPECT_EQ(r.landing, pos(c[2])) << c;
      EXPECT_EQ(r.twist_halves, c[1] - '0') << c;
    }
  }
}
