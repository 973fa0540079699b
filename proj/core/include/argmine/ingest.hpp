#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "argmine/document.hpp"

namespace argmine {

/// Element or text run of the supported HTML subset. Text runs have an empty
/// tag and appear only as leaves.
struct HtmlNode {
  std::string tag;
  std::map<std::string, std::string> attrs;
  std::vector<HtmlNode> children;
  std::string text;

  bool is_text() const { return tag.empty(); }
};

struct HtmlTree {
  HtmlNode root;  // tag "body"
  bool malformed = false;
  std::vector<std::string> warnings;
};

struct IngestConfig {
  /// A segment ends after any of these code points (runs of them stay together).
  std::u32string split_chars = U"。！？!?;";
  bool split_on_newline = true;
  std::size_t max_segments = kDefaultMaxSegments;
};

/// Builds the subset tree. Tags outside the subset are unwrapped, their
/// children kept; script/style/head content is dropped; <br> becomes a newline.
/// Unclosed elements at end of input are auto-closed and the tree flagged.
HtmlTree parse_html_tree(std::string_view source);

/// Style-mark contribution of a single element. Unknown tags contribute none.
StyleMarks mark_of(std::string_view tag, const std::map<std::string, std::string>& attrs);

/// Parses an HTML document into segments with marks and positions.
Document parse_html(std::string_view source, std::string doc_id = "doc", const IngestConfig& config = {});

/// Visible text of the tree with markup stripped and whitespace collapsed.
std::string visible_text(const HtmlTree& tree);

}  // namespace argmine
