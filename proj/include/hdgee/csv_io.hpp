#pragma once

#include <filesystem>
#include <iosfwd>

#include "hdgee/model.hpp"

namespace hdgee {

// Schema: header `cluster,y,x1,...,xp`, one observation per row, rows of a
// cluster contiguous. Numbers use '.' as decimal separator.

ClusteredDataset read_csv(std::istream& in, Family family);
ClusteredDataset read_csv(const std::filesystem::path& path, Family family);

/// Writes shortest round-trip decimal representations, so read_csv(write_csv(d)) == d.
void write_csv(std::ostream& out, const ClusteredDataset& data);
void write_csv(const std::filesystem::path& path, const ClusteredDataset& data);

}  // namespace hdgee
