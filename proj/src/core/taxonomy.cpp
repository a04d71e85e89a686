#include "core/taxonomy.hpp"

#include <set>

#include "core/error.hpp"
#include "json.hpp"

namespace voxcond {

using nlohmann::json;

LabelTaxonomy::LabelTaxonomy(std::vector<TaxonomyEntry> entries)
    : entries_(std::move(entries)) {
  require(!entries_.empty(), ErrorCode::InvalidArgument,
          "taxonomy needs at least the empty entry");
  require(entries_.size() <= 256, ErrorCode::InvalidArgument,
          "taxonomy exceeds the 8-bit label space");
  const auto& e0 = entries_[0];
  require(e0.name == "empty" && e0.color == std::array<uint8_t, 3>{0, 0, 0} &&
              !e0.is_foreground,
          ErrorCode::InvalidArgument,
          "taxonomy entry 0 must be empty with color (0,0,0)");
  std::set<std::string> names;
  std::set<std::array<uint8_t, 3>> colors;
  for (size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    require(!e.name.empty(), ErrorCode::InvalidArgument, "taxonomy name empty");
    require(names.insert(e.name).second, ErrorCode::InvalidArgument,
            "duplicate taxonomy name: " + e.name);
    if (i > 0) {
      require(e.color != std::array<uint8_t, 3>{0, 0, 0},
              ErrorCode::InvalidArgument,
              "non-empty label may not use the empty color");
      require(colors.insert(e.color).second, ErrorCode::InvalidArgument,
              "duplicate taxonomy color for " + e.name);
    }
  }
}

const TaxonomyEntry& LabelTaxonomy::entry(LabelId id) const {
  require(contains(id), ErrorCode::LabelOutOfRange,
          "label " + std::to_string(int(id)) + " outside taxonomy");
  return entries_[id];
}

LabelId LabelTaxonomy::label_of_color(const std::array<uint8_t, 3>& rgb) const {
  for (size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].color == rgb) return LabelId(i);
  fail(ErrorCode::LabelOutOfRange, "color not in taxonomy palette");
}

std::string LabelTaxonomy::to_json() const {
  json arr = json::array();
  for (const auto& e : entries_) {
    arr.push_back({{"name", e.name},
                   {"color", {e.color[0], e.color[1], e.color[2]}},
                   {"is_foreground", e.is_foreground}});
  }
  return json{{"labels", arr}}.dump(2);
}

LabelTaxonomy LabelTaxonomy::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("taxonomy json: ") + e.what());
  }
  std::vector<TaxonomyEntry> entries;
  try {
    for (const auto& item : j.at("labels")) {
      TaxonomyEntry e;
      e.name = item.at("name").get<std::string>();
      const auto& c = item.at("color");
      e.color = {uint8_t(c.at(0).get<int>()), uint8_t(c.at(1).get<int>()),
                 uint8_t(c.at(2).get<int>())};
      e.is_foreground = item.at("is_foreground").get<bool>();
      entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::ParseError, std::string("taxonomy json: ") + e.what());
  }
  return LabelTaxonomy(std::move(entries));
}

bool LabelTaxonomy::operator==(const LabelTaxonomy& o) const {
  if (entries_.size() != o.entries_.size()) return false;
  for (size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = o.entries_[i];
    if (a.name != b.name || a.color != b.color ||
        a.is_foreground != b.is_foreground)
      return false;
  }
  return true;
}

const LabelTaxonomy& default_taxonomy() {
  static const LabelTaxonomy tax({
      {"empty", {0, 0, 0}, false},
      {"road", {128, 64, 128}, false},
      {"building", {70, 70, 70}, false},
      {"vehicle", {0, 0, 142}, true},
      {"pedestrian", {220, 20, 60}, true},
      {"vegetation", {107, 142, 35}, false},
  });
  return tax;
}

}  // namespace voxcond
