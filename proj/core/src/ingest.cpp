#include "argmine/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <utility>

#include "argmine/error.hpp"
#include "argmine/utf8.hpp"

namespace argmine {

namespace {

constexpr std::array<std::string_view, 17> kSubsetTags = {
    "p", "font", "strong", "b", "blockquote", "h1", "h2", "h3", "h4",
    "h5", "h6", "span", "a", "body", "div", "supertalk", "html"};
constexpr std::array<std::string_view, 9> kBlockTags = {"p", "div", "blockquote", "h1", "h2",
                                                        "h3", "h4", "h5", "h6"};
constexpr std::array<std::string_view, 6> kDroppedContentTags = {"script", "style", "head",
                                                                 "title", "noscript", "template"};

template <std::size_t N>
bool contains(const std::array<std::string_view, N>& set, std::string_view s) {
  return std::find(set.begin(), set.end(), s) != set.end();
}

bool is_heading(std::string_view tag) {
  return tag.size() == 2 && tag[0] == 'h' && tag[1] >= '1' && tag[1] <= '6';
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n\f");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n\f");
  return s.substr(b, e - b + 1);
}

std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    const auto semi = s.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back(s[i++]);
      continue;
    }
    const std::string_view name = s.substr(i + 1, semi - i - 1);
    char32_t cp = 0;
    bool ok = true;
    if (name == "amp") {
      cp = U'&';
    } else if (name == "lt") {
      cp = U'<';
    } else if (name == "gt") {
      cp = U'>';
    } else if (name == "quot") {
      cp = U'"';
    } else if (name == "apos") {
      cp = U'\'';
    } else if (name == "nbsp") {
      cp = U' ';
    } else if (name.size() > 1 && name[0] == '#') {
      const bool hex = name[1] == 'x' || name[1] == 'X';
      const std::string_view digits = name.substr(hex ? 2 : 1);
      std::uint32_t v = 0;
      auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), v, hex ? 16 : 10);
      ok = ec == std::errc() && ptr == digits.data() + digits.size() && !digits.empty() && v <= 0x10FFFF;
      cp = v;
    } else {
      ok = false;
    }
    if (!ok) {
      out.push_back(s[i++]);
      continue;
    }
    utf8::append(out, cp);
    i = semi + 1;
  }
  return out;
}

std::map<std::string, std::string> parse_style(std::string_view style) {
  std::map<std::string, std::string> decls;
  std::size_t pos = 0;
  while (pos <= style.size()) {
    auto end = style.find(';', pos);
    if (end == std::string_view::npos) end = style.size();
    const std::string_view decl = style.substr(pos, end - pos);
    const auto colon = decl.find(':');
    if (colon != std::string_view::npos) {
      decls[lower(trim(decl.substr(0, colon)))] = lower(trim(decl.substr(colon + 1)));
    }
    pos = end + 1;
  }
  return decls;
}

bool bold_weight(std::string_view v) {
  if (v == "bold" || v == "bolder") return true;
  int w = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), w);
  return ec == std::errc() && w >= 700;
}

struct Tag {
  std::string name;
  std::map<std::string, std::string> attrs;
  bool closing = false;
  bool self_closing = false;
};

// Parses a tag starting at s[i] == '<'. Returns false when the text is not a
// tag; `next` receives the position after the tag.
bool read_tag(std::string_view s, std::size_t i, Tag& tag, std::size_t& next) {
  std::size_t p = i + 1;
  if (p < s.size() && s[p] == '/') {
    tag.closing = true;
    ++p;
  }
  if (p >= s.size() || !std::isalpha(static_cast<unsigned char>(s[p]))) return false;
  const std::size_t name_begin = p;
  while (p < s.size() && (std::isalnum(static_cast<unsigned char>(s[p])) || s[p] == '-' || s[p] == ':')) ++p;
  tag.name = lower(s.substr(name_begin, p - name_begin));

  while (p < s.size()) {
    while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
    if (p >= s.size()) break;
    if (s[p] == '>') {
      next = p + 1;
      return true;
    }
    if (s[p] == '/') {
      tag.self_closing = true;
      ++p;
      continue;
    }
    const std::size_t key_begin = p;
    while (p < s.size() && !std::isspace(static_cast<unsigned char>(s[p])) && s[p] != '=' && s[p] != '>' &&
           s[p] != '/') {
      ++p;
    }
    std::string key = lower(s.substr(key_begin, p - key_begin));
    while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
    std::string value;
    if (p < s.size() && s[p] == '=') {
      ++p;
      while (p < s.size() && std::isspace(static_cast<unsigned char>(s[p]))) ++p;
      if (p < s.size() && (s[p] == '"' || s[p] == '\'')) {
        const char q = s[p++];
        const auto close = s.find(q, p);
        const std::size_t end = close == std::string_view::npos ? s.size() : close;
        value = decode_entities(s.substr(p, end - p));
        p = end == s.size() ? end : end + 1;
      } else {
        const std::size_t vb = p;
        while (p < s.size() && !std::isspace(static_cast<unsigned char>(s[p])) && s[p] != '>') ++p;
        value = decode_entities(s.substr(vb, p - vb));
      }
    }
    if (!key.empty()) tag.attrs.emplace(std::move(key), std::move(value));
  }
  next = s.size();
  return true;
}

class TreeBuilder {
 public:
  TreeBuilder() {
    tree_.root.tag = "body";
    stack_.push_back(&tree_.root);
  }

  void text(std::string t) {
    if (t.empty()) return;
    HtmlNode& parent = *stack_.back();
    if (!parent.children.empty() && parent.children.back().is_text()) {
      parent.children.back().text += t;
      return;
    }
    HtmlNode node;
    node.text = std::move(t);
    parent.children.push_back(std::move(node));
  }

  void open(Tag tag) {
    if (tag.name == "body" || tag.name == "html") return;
    if (contains(kBlockTags, tag.name)) close_open_paragraph();
    if (!contains(kSubsetTags, tag.name)) return;  // unwrapped
    HtmlNode node;
    node.tag = std::move(tag.name);
    node.attrs = std::move(tag.attrs);
    HtmlNode& parent = *stack_.back();
    parent.children.push_back(std::move(node));
    if (!tag.self_closing) stack_.push_back(&parent.children.back());
  }

  void close(const std::string& name) {
    if (!contains(kSubsetTags, name) || name == "body" || name == "html") return;
    auto it = std::find_if(stack_.rbegin(), stack_.rend() - 1, [&](HtmlNode* n) { return n->tag == name; });
    if (it == stack_.rend() - 1) {
      tree_.warnings.push_back("ignored stray </" + name + ">");
      return;
    }
    const auto depth = static_cast<std::size_t>(std::distance(it, stack_.rend())) - 1;
    for (std::size_t k = stack_.size() - 1; k > depth; --k) {
      tree_.warnings.push_back("implicitly closed <" + stack_[k]->tag + "> before </" + name + ">");
    }
    stack_.resize(depth);
  }

  HtmlTree finish() {
    for (std::size_t k = stack_.size() - 1; k > 0; --k) {
      tree_.malformed = true;
      tree_.warnings.push_back("MalformedMarkup: unclosed <" + stack_[k]->tag + "> at end of input");
    }
    stack_.resize(1);
    return std::move(tree_);
  }

 private:
  void close_open_paragraph() {
    for (std::size_t k = stack_.size() - 1; k > 0; --k) {
      if (stack_[k]->tag == "p") {
        stack_.resize(k);
        return;
      }
      if (contains(kBlockTags, stack_[k]->tag)) return;
    }
  }

  HtmlTree tree_;
  std::vector<HtmlNode*> stack_;
};

struct Run {
  std::u32string text;
  StyleMarks marks;
};

class Segmenter {
 public:
  Segmenter(const IngestConfig& config, std::vector<Segment>& out) : config_(config), out_(out) {}

  void walk(const HtmlNode& node, StyleMarks inherited) {
    if (node.is_text()) {
      runs_.push_back({utf8::decode(node.text), inherited});
      return;
    }
    const StyleMarks marks = inherited | mark_of(node.tag, node.attrs);
    const bool block = contains(kBlockTags, node.tag);
    if (block) flush();
    for (const HtmlNode& child : node.children) walk(child, marks);
    if (block) flush();
  }

  void flush() {
    const std::size_t before = out_.size();
    split(runs_);
    runs_.clear();
    if (out_.size() > before) {
      for (std::size_t k = before; k < out_.size(); ++k) out_[k].paragraph_pos = paragraph_;
      ++paragraph_;
    }
  }

 private:
  static bool closing_punct(char32_t c) {
    return c == U'"' || c == U'\'' || c == U')' || c == 0x201D || c == 0x2019 || c == 0x300D || c == 0x300F ||
           c == 0xFF09;
  }

  bool splits(char32_t c) const { return config_.split_chars.find(c) != std::u32string::npos; }

  void split(const std::vector<Run>& runs) {
    for (const Run& run : runs) {
      for (char32_t c : run.text) {
        if (c == U'\n' && config_.split_on_newline) {
          finish();
          continue;
        }
        if (utf8::is_space(c)) {
          pending_space_ = !current_.empty();
          continue;
        }
        if (ending_ && !splits(c) && !closing_punct(c)) finish();
        if (pending_space_ && !current_.empty()) current_.push_back(U' ');
        pending_space_ = false;
        current_.push_back(c);
        marks_ |= run.marks;
        if (splits(c)) ending_ = true;
      }
    }
    finish();
  }

  void finish() {
    if (!current_.empty()) {
      Segment seg;
      seg.text = utf8::encode(current_);
      seg.marks = marks_;
      seg.segment_pos = out_.size();
      out_.push_back(std::move(seg));
    }
    current_.clear();
    marks_ = {};
    ending_ = false;
    pending_space_ = false;
  }

  const IngestConfig& config_;
  std::vector<Segment>& out_;
  std::vector<Run> runs_;
  std::u32string current_;
  StyleMarks marks_;
  bool ending_ = false;
  bool pending_space_ = false;
  std::size_t paragraph_ = 0;
};

void collect_text(const HtmlNode& node, std::string& out) {
  if (node.is_text()) {
    out += node.text;
    return;
  }
  for (const HtmlNode& c : node.children) collect_text(c, out);
}

}  // namespace

HtmlTree parse_html_tree(std::string_view s) {
  TreeBuilder builder;
  std::size_t i = 0;
  std::string pending;
  auto emit_text = [&] {
    builder.text(decode_entities(pending));
    pending.clear();
  };
  while (i < s.size()) {
    if (s[i] != '<') {
      pending.push_back(s[i++]);
      continue;
    }
    if (s.compare(i, 4, "<!--") == 0) {
      const auto end = s.find("-->", i + 4);
      i = end == std::string_view::npos ? s.size() : end + 3;
      continue;
    }
    if (i + 1 < s.size() && (s[i + 1] == '!' || s[i + 1] == '?')) {
      const auto end = s.find('>', i);
      i = end == std::string_view::npos ? s.size() : end + 1;
      continue;
    }
    Tag tag;
    std::size_t next = i;
    if (!read_tag(s, i, tag, next)) {
      pending.push_back(s[i++]);
      continue;
    }
    emit_text();
    i = next;
    if (tag.closing) {
      builder.close(tag.name);
      continue;
    }
    if (tag.name == "br") {
      builder.text("\n");
      continue;
    }
    if (contains(kDroppedContentTags, tag.name) && !tag.self_closing) {
      const std::string closer = "</" + tag.name;
      std::size_t p = i;
      while (true) {
        p = s.find("</", p);
        if (p == std::string_view::npos) {
          i = s.size();
          break;
        }
        if (lower(s.substr(p, closer.size())) == closer) {
          const auto gt = s.find('>', p);
          i = gt == std::string_view::npos ? s.size() : gt + 1;
          break;
        }
        p += 2;
      }
      continue;
    }
    builder.open(std::move(tag));
  }
  emit_text();
  return builder.finish();
}

StyleMarks mark_of(std::string_view tag_in, const std::map<std::string, std::string>& attrs) {
  const std::string tag = lower(tag_in);
  StyleMarks m;
  std::map<std::string, std::string> style;
  if (auto it = attrs.find("style"); it != attrs.end()) style = parse_style(it->second);

  m.font = tag == "font" || style.count("font-size") > 0;
  m.strong = tag == "strong" || tag == "b" || (style.count("font-weight") && bold_weight(style["font-weight"]));
  m.color = attrs.count("color") > 0 || style.count("color") > 0;
  m.blockquote = tag == "blockquote";
  if (auto it = attrs.find("class"); it != attrs.end()) {
    m.supertalk = lower(it->second).find("supertalk") != std::string::npos;
  }
  m.supertalk = m.supertalk || tag == "supertalk";
  m.header = is_heading(tag);
  return m;
}

Document parse_html(std::string_view source, std::string doc_id, const IngestConfig& config) {
  HtmlTree tree = parse_html_tree(source);
  std::vector<Segment> segments;
  Segmenter seg(config, segments);
  seg.walk(tree.root, {});
  seg.flush();
  if (segments.empty()) {
    throw InvalidDocument("document " + doc_id + " has no visible text");
  }
  return Document::ingest(std::move(doc_id), std::move(segments), std::nullopt, config.max_segments,
                          std::move(tree.warnings));
}

std::string visible_text(const HtmlTree& tree) {
  std::string raw;
  collect_text(tree.root, raw);
  std::string out;
  bool space = false;
  for (char32_t c : utf8::decode(raw)) {
    if (utf8::is_space(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    utf8::append(out, c);
  }
  return out;
}

}  // namespace argmine
