#ifndef SPINSTAR_FORMAT_HPP
#define SPINSTAR_FORMAT_HPP

#include <charconv>
#include <string>

namespace spinstar {

/// 17 significant digits, '.' separator, independent of the C locale.
inline std::string format_real(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

}  // namespace spinstar

#endif  // SPINSTAR_FORMAT_HPP
