#include "qvest/field_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>

#include "qvest/errors.hpp"

namespace qvest {

namespace {

constexpr const char* kMagic = "GRIDFIELD 1";

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffU) << (8 * (7 - i));
    return r;
  }
}

std::string geometry_line(const GridSpec& g) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << g.d << ' ' << g.n;
  for (auto c : g.counts) os << ' ' << c;
  for (double o : g.origin) os << ' ' << o;
  return os.str();
}

GridSpec parse_geometry(const std::string& line) {
  std::istringstream is(line);
  GridSpec g;
  if (!(is >> g.d >> g.n) || g.d < 1) throw DomainError("field file: malformed geometry line");
  g.counts.resize(static_cast<std::size_t>(g.d));
  g.origin.resize(static_cast<std::size_t>(g.d));
  for (auto& c : g.counts) {
    if (!(is >> c)) throw DomainError("field file: missing point counts");
  }
  for (auto& o : g.origin) {
    if (!(is >> o)) throw DomainError("field file: missing origin");
  }
  g.validate();
  return g;
}

std::vector<std::int64_t> unravel(std::size_t lin, const GridSpec& g) {
  std::vector<std::int64_t> idx(static_cast<std::size_t>(g.d));
  for (std::size_t k = idx.size(); k-- > 0;) {
    const auto c = static_cast<std::size_t>(g.counts[k]);
    idx[k] = static_cast<std::int64_t>(lin % c);
    lin /= c;
  }
  return idx;
}

}  // namespace

void write_field_binary(std::ostream& os, const GridField& field) {
  field.validate();
  os << kMagic << '\n' << geometry_line(field.spec) << '\n';
  for (double v : field.values) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
    os.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
  if (!os) throw Error("failed to write field data");
}

GridField read_field_binary(std::istream& is) {
  std::string magic;
  if (!std::getline(is, magic) || magic != kMagic) throw DomainError("field file: missing GRIDFIELD 1 header");
  std::string geom;
  if (!std::getline(is, geom)) throw DomainError("field file: missing geometry line");
  GridField f{parse_geometry(geom), {}};
  f.values.resize(f.spec.size());
  for (double& v : f.values) {
    std::uint64_t bits = 0;
    if (!is.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
      throw DomainError("field file: fewer values than the geometry requires");
    }
    v = std::bit_cast<double>(to_little(bits));
  }
  f.validate();
  return f;
}

void write_field_csv(std::ostream& os, const GridField& field) {
  field.validate();
  if (field.spec.size() > kCsvFieldLimit) {
    throw DomainError("CSV field output is limited to " + std::to_string(kCsvFieldLimit) + " points");
  }
  os << "# " << geometry_line(field.spec) << '\n';
  for (int k = 0; k < field.spec.d; ++k) os << 'i' << k << ',';
  os << "value\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    for (auto c : unravel(i, field.spec)) os << c << ',';
    os << field.values[i] << '\n';
  }
}

GridField read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("# ", 0) != 0) {
    throw DomainError("CSV field: first line must be '# d n counts... origin...'");
  }
  GridField f{parse_geometry(line.substr(2)), {}};
  if (f.spec.size() > kCsvFieldLimit) {
    throw DomainError("CSV field input is limited to " + std::to_string(kCsvFieldLimit) + " points");
  }
  if (!std::getline(is, line)) throw DomainError("CSV field: missing header row");
  f.values.assign(f.spec.size(), std::numeric_limits<double>::quiet_NaN());
  const auto strides = f.spec.strides();
  std::size_t seen = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::size_t lin = 0;
    for (int k = 0; k < f.spec.d; ++k) {
      if (!std::getline(row, cell, ',')) throw DomainError("CSV field: short row");
      const long long c = std::stoll(cell);
      if (c < 0 || c >= f.spec.counts[static_cast<std::size_t>(k)]) throw DomainError("CSV field: index out of range");
      lin += static_cast<std::size_t>(c) * strides[static_cast<std::size_t>(k)];
    }
    if (!std::getline(row, cell)) throw DomainError("CSV field: missing value");
    f.values[lin] = std::stod(cell);
    ++seen;
  }
  if (seen != f.values.size()) throw DomainError("CSV field: row count does not match the geometry");
  f.validate();
  return f;
}

void write_field(const std::filesystem::path& path, const GridField& field) {
  const bool csv = path.extension() == ".csv";
  std::ofstream os(path, csv ? std::ios::out : std::ios::out | std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  if (csv) {
    write_field_csv(os, field);
  } else {
    write_field_binary(os, field);
  }
}

GridField read_field(const std::filesystem::path& path) {
  const bool csv = path.extension() == ".csv";
  std::ifstream is(path, csv ? std::ios::in : std::ios::in | std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return csv ? read_field_csv(is) : read_field_binary(is);
}

}  // namespace qvest
