#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace clenet {

// Shortest-round-trip float formatting ("%.17g"), locale-independent. All
// numeric file output goes through this so artifacts are byte-reproducible
// and parse back to the exact double.
std::string fmt_g17(double v);

std::string join(const std::vector<std::string>& parts, const std::string& sep);

// Minimal CSV: comma-separated, no quoting (fields we emit never contain
// commas). Returns one vector per line, header included.
std::vector<std::vector<std::string>> read_csv(const std::string& path);
std::vector<std::string> split_csv_line(const std::string& line);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

bool file_exists(const std::string& path);
void ensure_dir(const std::string& path);       // mkdir -p
void require_parent_exists(const std::string& path);  // ConfigError if absent

// Recursive byte comparison of two directory trees; `ignore` names are
// skipped at any depth. Returns a human-readable mismatch or "" if equal.
std::string dir_diff(const std::string& a, const std::string& b,
                     const std::vector<std::string>& ignore = {});

}  // namespace clenet
