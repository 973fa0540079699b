#pragma once

// Ingestion golden files: NAME.html next to NAME.json holding
// {"malformed": bool, "segments": [{"text", "marks": [names], "para", "seg"}]}.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/ingest.hpp"

namespace argmine::testing {

struct GoldenCase {
  std::string name;
  std::filesystem::path html;
  std::filesystem::path expected;
};

inline std::vector<GoldenCase> golden_cases(const std::filesystem::path& dir) {
  std::vector<GoldenCase> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".html") continue;
    auto json = e.path();
    json.replace_extension(".json");
    out.push_back({e.path().stem().string(), e.path(), json});
  }
  std::sort(out.begin(), out.end(), [](const GoldenCase& a, const GoldenCase& b) { return a.name < b.name; });
  return out;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Empty string when the case reproduces exactly, else the first difference.
inline std::string check_golden(const GoldenCase& c) {
  const std::string html = read_file(c.html);
  const auto expected = nlohmann::json::parse(read_file(c.expected));
  const Document doc = parse_html(html, c.name);
  const bool malformed = parse_html_tree(html).malformed;
  if (malformed != expected.at("malformed").get<bool>()) {
    return "malformed flag is " + std::string(malformed ? "true" : "false");
  }
  const auto& segs = expected.at("segments");
  if (segs.size() != doc.size()) {
    return "expected " + std::to_string(segs.size()) + " segments, got " + std::to_string(doc.size());
  }
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const Segment& s = doc.segment(i);
    const auto& e = segs[i];
    const std::string where = "segment " + std::to_string(i) + ": ";
    if (s.text != e.at("text").get<std::string>()) return where + "text '" + s.text + "'";
    StyleMarks marks;
    for (const auto& name : e.at("marks")) {
      const auto it = std::find(kMarkNames.begin(), kMarkNames.end(), name.get<std::string>());
      if (it == kMarkNames.end()) return where + "unknown mark name in expectation";
      marks.set(static_cast<std::size_t>(it - kMarkNames.begin()), true);
    }
    if (!(s.marks == marks)) {
      std::string got;
      for (std::size_t k = 0; k < kNumMarks; ++k) got += s.marks.get(k) ? '1' : '0';
      return where + "marks " + got;
    }
    if (s.paragraph_pos != e.at("para").get<std::size_t>()) return where + "para " + std::to_string(s.paragraph_pos);
    if (s.segment_pos != e.at("seg").get<std::size_t>()) return where + "seg " + std::to_string(s.segment_pos);
  }
  return {};
}

}  // namespace argmine::testing
