#pragma once

#include <filesystem>
#include <iosfwd>

#include "qvest/increments.hpp"

namespace qvest {

inline constexpr std::size_t kCsvFieldLimit = 10000;

// Binary layout: "GRIDFIELD 1\n", then "d n counts... origin...\n", then the
// row-major values as 8-byte little-endian IEEE-754 doubles.
void write_field_binary(std::ostream& os, const GridField& field);
GridField read_field_binary(std::istream& is);

// CSV: header "i0,...,i{d-1},value" preceded by a "# d n counts... origin..."
// comment line. Limited to kCsvFieldLimit points.
void write_field_csv(std::ostream& os, const GridField& field);
GridField read_field_csv(std::istream& is);

// Dispatch on the extension: ".csv" is CSV, anything else binary.
void write_field(const std::filesystem::path& path, const GridField& field);
GridField read_field(const std::filesystem::path& path);

}  // namespace qvest
