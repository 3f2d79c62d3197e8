#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "remul/point_sample.hpp"

namespace remul {

// JSON Lines, one sample per line:
//   {"positions": [[x,y,z],...], "velocities": [...], "masses": [...], "targets": [...]}
// "masses" is optional on read (scalar width 0 when absent). Samples with
// more than one scalar channel use "scalars": [[...],...] instead.
// Doubles are written in shortest round-trip form.
void write_dataset(std::ostream& out, std::span<const PointSample> samples);
void write_dataset(const std::filesystem::path& path, std::span<const PointSample> samples);

// Throws ValidationError naming the 1-based line of the first malformed record.
std::vector<PointSample> read_dataset(std::istream& in);
std::vector<PointSample> read_dataset(const std::filesystem::path& path);

}  // namespace remul
