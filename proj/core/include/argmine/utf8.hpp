#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace argmine::utf8 {

/// Decodes UTF-8 into code points. Invalid bytes decode to U+FFFD.
std::u32string decode(std::string_view s);

void append(std::string& out, char32_t cp);
std::string encode(std::u32string_view s);

inline bool is_space(char32_t c) {
  return c == U' ' || c == U'\t' || c == U'\n' || c == U'\r' || c == U'\f' || c == U'\v' || c == 0xA0 ||
         c == 0x3000;
}

}  // namespace argmine::utf8
