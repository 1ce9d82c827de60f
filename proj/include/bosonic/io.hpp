#ifndef BOSONIC_IO_HPP
#define BOSONIC_IO_HPP

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bosonic/ledger.hpp"
#include "bosonic/surface_grid.hpp"

namespace bosonic {

/// Malformed or truncated files.
class FormatError : public Error {
 public:
  using Error::Error;
};

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Ledger CSV
// ---------------------------------------------------------------------------

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_ledger_csv(std::ostream& os, const EnergyLedger& ledger) {
  for (std::size_t k = 0; k < LedgerRow::kColumns.size(); ++k) os << (k ? "," : "") << LedgerRow::kColumns[k];
  os << '\n';
  for (const auto& row : ledger) {
    const auto a = row.as_array();
    for (std::size_t k = 0; k < a.size(); ++k) os << (k ? "," : "") << format_double(a[k]);
    os << '\n';
  }
}

inline void write_ledger_csv(const fs::path& path, const EnergyLedger& ledger) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_ledger_csv(os, ledger);
}

inline EnergyLedger read_ledger_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("ledger: missing header");
  std::string expected;
  for (std::size_t k = 0; k < LedgerRow::kColumns.size(); ++k)
    expected += std::string(k ? "," : "") + std::string(LedgerRow::kColumns[k]);
  if (line != expected) throw FormatError("ledger: unexpected header '" + line + "'");
  EnergyLedger out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::array<double, 11> a{};
    std::stringstream ss(line);
    std::string cell;
    std::size_t k = 0;
    while (std::getline(ss, cell, ',')) {
      if (k >= a.size()) throw FormatError("ledger line " + std::to_string(lineno) + ": too many columns");
      try {
        std::size_t used = 0;
        a[k] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw FormatError("ledger line " + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
      ++k;
    }
    if (k != a.size()) throw FormatError("ledger line " + std::to_string(lineno) + ": expected 11 columns");
    out.push_back(LedgerRow::from_array(a));
  }
  return out;
}

inline EnergyLedger read_ledger_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  return read_ledger_csv(is);
}

// ---------------------------------------------------------------------------
// Snapshots: one JSON header line, then little-endian doubles
// ---------------------------------------------------------------------------

struct SnapshotData {
  int nx = 0;
  int ny = 0;
  int q = 0;
  double t = 0.0;
  std::string target = "sphere";
  std::vector<double> values;  ///< node-major, then component

  template <std::size_t Q>
  static SnapshotData from_field(const VectorField<Q>& f, int nx, int ny, double t, std::string target) {
    SnapshotData s{nx, ny, static_cast<int>(Q), t, std::move(target), {}};
    s.values.reserve(f.size() * Q);
    for (const auto& p : f)
      for (double c : p) s.values.push_back(c);
    return s;
  }

  template <std::size_t Q>
  VectorField<Q> to_field() const {
    if (q != static_cast<int>(Q))
      throw InvalidArgument("snapshot has q = " + std::to_string(q) + ", expected " + std::to_string(Q));
    VectorField<Q> f(static_cast<std::size_t>(nx) * ny);
    for (std::size_t n = 0; n < f.size(); ++n)
      for (std::size_t c = 0; c < Q; ++c) f[n][c] = values[n * Q + c];
    return f;
  }
};

namespace detail {
inline std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int k = 0; k < 8; ++k) r |= ((v >> (8 * k)) & 0xffu) << (8 * (7 - k));
    return r;
  }
  return v;
}
}  // namespace detail

inline void write_snapshot(std::ostream& os, const SnapshotData& s) {
  const std::size_t expected = static_cast<std::size_t>(s.nx) * s.ny * s.q;
  if (s.values.size() != expected) throw InvalidArgument("snapshot: value count does not match shape");
  nlohmann::json h = {{"nx", s.nx}, {"ny", s.ny}, {"q", s.q}, {"t", s.t}, {"target", s.target},
                      {"endianness", "little"}};
  os << h.dump() << '\n';
  for (double v : s.values) {
    const auto bits = detail::to_little(std::bit_cast<std::uint64_t>(v));
    char buf[8];
    std::memcpy(buf, &bits, 8);
    os.write(buf, 8);
  }
}

inline void write_snapshot(const fs::path& path, const SnapshotData& s) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_snapshot(os, s);
}

inline SnapshotData read_snapshot(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw FormatError("snapshot: missing header at byte offset 0");
  const auto data_offset = header.size() + 1;
  SnapshotData s;
  try {
    const auto h = nlohmann::json::parse(header);
    s.nx = h.at("nx").get<int>();
    s.ny = h.at("ny").get<int>();
    s.q = h.at("q").get<int>();
    s.t = h.at("t").get<double>();
    s.target = h.at("target").get<std::string>();
    if (h.at("endianness").get<std::string>() != "little") throw FormatError("snapshot: unsupported endianness");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("snapshot: bad header: ") + e.what());
  }
  if (s.nx <= 0 || s.ny <= 0 || s.q <= 0) throw FormatError("snapshot: nonpositive shape in header");
  const std::size_t count = static_cast<std::size_t>(s.nx) * s.ny * s.q;
  s.values.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    char buf[8];
    is.read(buf, 8);
    if (is.gcount() != 8)
      throw FormatError("snapshot truncated at byte offset " + std::to_string(data_offset + 8 * k + is.gcount()) +
                        ": expected " + std::to_string(data_offset + 8 * count) + " bytes");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    s.values[k] = std::bit_cast<double>(detail::to_little(bits));
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw FormatError("snapshot: trailing bytes after offset " + std::to_string(data_offset + 8 * count));
  return s;
}

inline SnapshotData read_snapshot(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return read_snapshot(is);
}

// ---------------------------------------------------------------------------
// Events (JSON lines)
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const SingularEvent& e) {
  return {{"t", e.t}, {"ix", e.ix}, {"iy", e.iy}, {"R", e.R}, {"local_energy", e.local_energy},
          {"kind", to_string(e.kind)}};
}

inline SingularEvent event_from_json(const nlohmann::json& j) {
  SingularEvent e;
  e.t = j.at("t").get<double>();
  e.ix = j.at("ix").get<int>();
  e.iy = j.at("iy").get<int>();
  e.R = j.at("R").get<double>();
  e.local_energy = j.at("local_energy").get<double>();
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "concentration")
    e.kind = EventKind::concentration;
  else if (kind == "stiffness")
    e.kind = EventKind::stiffness;
  else
    throw FormatError("event: unknown kind '" + kind + "'");
  return e;
}

inline void write_events(const fs::path& path, const std::vector<SingularEvent>& events) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& e : events) os << to_json(e).dump() << '\n';
}

inline std::vector<SingularEvent> read_events(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  std::vector<SingularEvent> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("events line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
}

}  // namespace bosonic

#endif  // BOSONIC_IO_HPP
