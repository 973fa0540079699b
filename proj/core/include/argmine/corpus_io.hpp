#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "argmine/document.hpp"
#include "argmine/labels.hpp"

namespace argmine {

/// JSONL corpus format, one document per line:
///   {"doc_id", "segments":[{"text","marks":{"font":0|1,...},"para","seg"}],
///    "annotation":{"components":[{"id","kind","segments","major"}],
///                  "supports":[["p1","c1"]]}}
/// Unknown fields are ignored; each one is reported through `warnings`.
nlohmann::json document_to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j, std::vector<std::string>* warnings = nullptr,
                            std::size_t max_segments = kDefaultMaxSegments);

nlohmann::json structure_to_json(const ArgumentStructure& s);
ArgumentStructure structure_from_json(const nlohmann::json& j, std::vector<std::string>* warnings = nullptr);

void write_corpus(std::ostream& out, const std::vector<Document>& docs);
void write_corpus(const std::filesystem::path& path, const std::vector<Document>& docs);

/// Reads every non-blank line. Throws ParseError naming the line number.
std::vector<Document> read_corpus(std::istream& in, std::vector<std::string>* warnings = nullptr,
                                  std::size_t max_segments = kDefaultMaxSegments);
std::vector<Document> read_corpus(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr,
                                  std::size_t max_segments = kDefaultMaxSegments);

/// Model outputs of one document:
///   {"doc_id", "component":[[p0,p1,p2],...], "major":[c,...],
///    "relations":[[[r0,r1,r2,r3],...],...]}   (relations[i][j])
nlohmann::json prediction_to_json(const std::string& doc_id, const StructurePrediction& p);
/// Throws ParseError on missing fields or inconsistent sizes.
StructurePrediction prediction_from_json(const nlohmann::json& j, std::string* doc_id = nullptr);

}  // namespace argmine
