#include "clenet/util.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "clenet/error.hpp"

namespace fs = std::filesystem;

namespace clenet {

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join(const std::vector<std::string>& parts,
                 const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open csv file: " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(split_csv_line(line));
  }
  return rows;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

bool file_exists(const std::string& path) { return fs::exists(path); }

void ensure_dir(const std::string& path) { fs::create_directories(path); }

void require_parent_exists(const std::string& path) {
  fs::path p = fs::absolute(fs::path(path));
  fs::path parent = p.parent_path();
  if (!parent.empty() && !fs::exists(parent))
    throw ConfigError("parent directory does not exist: " +
                      parent.string());
}

std::string dir_diff(const std::string& a, const std::string& b,
                     const std::vector<std::string>& ignore) {
  auto ignored = [&](const std::string& name) {
    return std::find(ignore.begin(), ignore.end(), name) != ignore.end();
  };
  auto list_rel = [&](const std::string& root) {
    std::vector<std::string> rels;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (!e.is_regular_file()) continue;
      if (ignored(e.path().filename().string())) continue;
      rels.push_back(fs::relative(e.path(), root).string());
    }
    std::sort(rels.begin(), rels.end());
    return rels;
  };
  auto ra = list_rel(a);
  auto rb = list_rel(b);
  if (ra != rb) return "file sets differ between " + a + " and " + b;
  for (const auto& rel : ra) {
    if (read_file((fs::path(a) / rel).string()) !=
        read_file((fs::path(b) / rel).string()))
      return "file contents differ: " + rel;
  }
  return "";
}

}  // namespace clenet
