#include "argmine/corpus_io.hpp"

#include <fstream>
#include <initializer_list>
#include <istream>
#include <ostream>

#include "argmine/error.hpp"

namespace argmine {

using nlohmann::json;

namespace {

void warn_unknown(const json& j, std::initializer_list<std::string_view> known, std::string_view where,
                  std::vector<std::string>* warnings) {
  if (!warnings || !j.is_object()) return;
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool found = false;
    for (std::string_view k : known) found = found || it.key() == k;
    if (!found) warnings->push_back("ignored unknown field '" + it.key() + "' in " + std::string(where));
  }
}

bool read_flag(const json& v) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_number_integer()) {
    const auto x = v.get<long long>();
    if (x == 0 || x == 1) return x == 1;
  }
  throw ParseError("style mark must be 0, 1, true or false");
}

std::size_t read_index(const json& v, std::string_view what) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ParseError(std::string(what) + " must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

json structure_to_json(const ArgumentStructure& s) {
  json comps = json::array();
  for (const Component& c : s.components) {
    comps.push_back({{"id", c.id},
                     {"kind", std::string(to_string(c.kind))},
                     {"segments", c.segment_ids},
                     {"major", c.is_major}});
  }
  json sup = json::array();
  for (const Support& x : s.supports) sup.push_back(json::array({x.premise_id, x.claim_id}));
  return {{"components", comps}, {"supports", sup}};
}

ArgumentStructure structure_from_json(const json& j, std::vector<std::string>* warnings) {
  if (!j.is_object()) throw ParseError("annotation must be an object");
  warn_unknown(j, {"components", "supports"}, "annotation", warnings);
  ArgumentStructure s;
  for (const json& c : j.at("components")) {
    warn_unknown(c, {"id", "kind", "segments", "major"}, "component", warnings);
    Component comp;
    comp.id = c.at("id").get<std::string>();
    const auto kind = c.at("kind").get<std::string>();
    if (kind == "claim") {
      comp.kind = ComponentKind::Claim;
    } else if (kind == "premise") {
      comp.kind = ComponentKind::Premise;
    } else {
      throw ParseError("unknown component kind '" + kind + "'");
    }
    for (const json& v : c.at("segments")) comp.segment_ids.push_back(read_index(v, "component segment"));
    if (c.contains("major")) comp.is_major = c.at("major").get<bool>();
    s.components.push_back(std::move(comp));
  }
  if (j.contains("supports")) {
    for (const json& link : j.at("supports")) {
      if (!link.is_array() || link.size() != 2) throw ParseError("support must be a [premise, claim] pair");
      s.supports.push_back({link[0].get<std::string>(), link[1].get<std::string>()});
    }
  }
  return s;
}

json document_to_json(const Document& doc) {
  json segs = json::array();
  for (const Segment& s : doc.segments()) {
    json marks = json::object();
    const auto bits = s.marks.bits();
    for (std::size_t k = 0; k < kNumMarks; ++k) marks[std::string(kMarkNames[k])] = bits[k];
    segs.push_back({{"text", s.text}, {"marks", marks}, {"para", s.paragraph_pos}, {"seg", s.segment_pos}});
  }
  json j = {{"doc_id", doc.id()}, {"segments", segs}};
  if (doc.annotation()) j["annotation"] = structure_to_json(*doc.annotation());
  if (!doc.warnings().empty()) j["warnings"] = doc.warnings();
  return j;
}

Document document_from_json(const json& j, std::vector<std::string>* warnings, std::size_t max_segments) {
  if (!j.is_object()) throw ParseError("document must be a JSON object");
  warn_unknown(j, {"doc_id", "segments", "annotation", "warnings"}, "document", warnings);
  std::vector<Segment> segments;
  for (const json& s : j.at("segments")) {
    warn_unknown(s, {"text", "marks", "para", "seg"}, "segment", warnings);
    Segment seg;
    seg.text = s.at("text").get<std::string>();
    if (s.contains("marks")) {
      const json& m = s.at("marks");
      if (!m.is_object()) throw ParseError("marks must be an object");
      for (auto it = m.begin(); it != m.end(); ++it) {
        std::size_t k = 0;
        while (k < kNumMarks && kMarkNames[k] != it.key()) ++k;
        if (k == kNumMarks) {
          if (warnings) warnings->push_back("ignored unknown mark '" + it.key() + "'");
          continue;
        }
        seg.marks.set(k, read_flag(it.value()));
      }
    }
    seg.paragraph_pos = read_index(s.at("para"), "para");
    seg.segment_pos = read_index(s.at("seg"), "seg");
    segments.push_back(std::move(seg));
  }
  std::optional<ArgumentStructure> annotation;
  if (j.contains("annotation") && !j.at("annotation").is_null()) {
    annotation = structure_from_json(j.at("annotation"), warnings);
  }
  std::vector<std::string> doc_warnings;
  if (j.contains("warnings")) doc_warnings = j.at("warnings").get<std::vector<std::string>>();
  return Document::ingest(j.at("doc_id").get<std::string>(), std::move(segments), std::move(annotation),
                          max_segments, std::move(doc_warnings));
}

void write_corpus(std::ostream& out, const std::vector<Document>& docs) {
  for (const Document& d : docs) out << document_to_json(d).dump() << '\n';
}

void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_corpus(out, docs);
}

std::vector<Document> read_corpus(std::istream& in, std::vector<std::string>* warnings,
                                  std::size_t max_segments) {
  std::vector<Document> docs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      docs.push_back(document_from_json(json::parse(line), warnings, max_segments));
    } catch (const json::exception& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

std::vector<Document> read_corpus(const std::filesystem::path& path, std::vector<std::string>* warnings,
                                  std::size_t max_segments) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return read_corpus(in, warnings, max_segments);
}

nlohmann::json prediction_to_json(const std::string& doc_id, const StructurePrediction& p) {
  const std::size_t n = p.size();
  nlohmann::json rel = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < n; ++j) {
      const auto r = p.relations(i, j);
      row.push_back(std::vector<double>(r.begin(), r.end()));
    }
    rel.push_back(std::move(row));
  }
  return {{"doc_id", doc_id}, {"component", p.component}, {"major", p.major}, {"relations", std::move(rel)}};
}

StructurePrediction prediction_from_json(const nlohmann::json& j, std::string* doc_id) {
  StructurePrediction p;
  try {
    if (doc_id) *doc_id = j.value("doc_id", std::string());
    p.component = j.at("component").get<std::vector<std::array<double, kNumComponentClasses>>>();
    p.major = j.at("major").get<std::vector<double>>();
    const auto& rel = j.at("relations");
    const std::size_t n = p.component.size();
    if (p.major.size() != n || rel.size() != n) throw ParseError("prediction arrays disagree on segment count");
    std::vector<double> flat;
    flat.reserve(n * n * kNumRelationClasses);
    for (const auto& row : rel) {
      if (row.size() != n) throw ParseError("relation row has wrong length");
      for (const auto& cell : row) {
        const auto v = cell.get<std::array<double, kNumRelationClasses>>();
        flat.insert(flat.end(), v.begin(), v.end());
      }
    }
    p.relations = RelationProbs(n, std::move(flat));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("prediction: ") + e.what());
  }
  return p;
}

}  // namespace argmine
