#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sslab {

/// 64-bit FNV-1a, incremental.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n);
  void update(std::string_view s) { update(s.data(), s.size()); }
  template <class T>
  void update_value(const T& v) {
    update(&v, sizeof(T));
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Strict numeric parsing: the whole string must be consumed.
double parse_double(std::string_view s, std::string_view what);
std::uint64_t parse_u64(std::string_view s, std::string_view what);
bool parse_bool(std::string_view s, std::string_view what);

std::string to_hex(std::uint64_t v);

}  // namespace sslab
