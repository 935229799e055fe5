#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

namespace zenmet::csv {

/// Locale-independent decimal rendering, 17 significant digits by default
/// (enough to round-trip a double exactly).
inline std::string format_double(double v, int digits = 17) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, digits);
  if (res.ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, res.ptr);
}

inline std::string format_bool(bool v) { return v ? "true" : "false"; }

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

/// Renders the echo block plus tables.  A single table is emitted as a plain
/// CSV (config lines are `#` comments); multiple tables are separated by
/// `# table: <name>` markers, each block carrying its own header row.
inline std::string render(const std::vector<std::pair<std::string, std::string>>& echo,
                          const std::vector<Table>& tables) {
  std::string out;
  for (const auto& [k, v] : echo) {
    out += "# config: ";
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  const bool marked = tables.size() > 1;
  for (const auto& table : tables) {
    if (marked) {
      out += "# table: ";
      out += table.name;
      out += "\n";
    }
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
      if (i) out += ',';
      out += table.columns[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += ',';
        out += row[i];
      }
      out += '\n';
    }
  }
  return out;
}

/// Writes via a sibling temp file and renames, so a failed run never leaves
/// a partial CSV at the destination.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open output file " + tmp.string());
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    os.flush();
    if (!os) {
      os.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    std::error_code ec2;
    fs::remove(tmp, ec2);
    throw std::runtime_error("failed to move " + tmp.string() + " to " + path);
  }
}

}  // namespace zenmet::csv
