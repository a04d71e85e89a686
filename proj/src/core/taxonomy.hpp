#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace voxcond {

using LabelId = uint8_t;

constexpr LabelId kEmptyLabel = 0;

struct TaxonomyEntry {
  std::string name;
  std::array<uint8_t, 3> color{0, 0, 0};
  bool is_foreground = false;
};

/*
 * Label table for a semantic grid. Entry 0 is always the empty label with
 * color (0,0,0); names are unique and non-empty colors are pairwise distinct
 * so rendered maps stay decodable.
 */
class LabelTaxonomy {
public:
  explicit LabelTaxonomy(std::vector<TaxonomyEntry> entries);

  size_t size() const { return entries_.size(); }
  const TaxonomyEntry& entry(LabelId id) const;
  bool contains(LabelId id) const { return id < entries_.size(); }
  bool is_foreground(LabelId id) const { return entry(id).is_foreground; }
  const std::array<uint8_t, 3>& color(LabelId id) const { return entry(id).color; }
  const std::vector<TaxonomyEntry>& entries() const { return entries_; }

  /* Label whose palette color matches exactly; kEmptyLabel for (0,0,0). */
  LabelId label_of_color(const std::array<uint8_t, 3>& rgb) const;

  std::string to_json() const;
  static LabelTaxonomy from_json(const std::string& text);

  bool operator==(const LabelTaxonomy& o) const;

private:
  std::vector<TaxonomyEntry> entries_;
};

/* empty, road, building, vehicle, pedestrian, vegetation; foreground =
 * vehicle + pedestrian. Colors follow the common street-scene palette. */
const LabelTaxonomy& default_taxonomy();

}  // namespace voxcond
