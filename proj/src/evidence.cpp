#include "moat/evidence.hpp"

#include <charconv>
#include <sstream>

#include "moat/errors.hpp"

namespace moat {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view s, std::string_view item) {
  s = trim(s);
  int out = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("malformed evidence item '" + std::string(item) + "'");
  }
  return out;
}

}  // namespace

Evidence::Evidence(const VarDomain& domain, std::span<const std::pair<int, int>> observations)
    : values_(static_cast<std::size_t>(domain.size()), kFree) {
  for (const auto& [var, val] : observations) {
    if (var < 0 || var >= domain.size()) throw DataError("evidence variable " + std::to_string(var) + " out of range");
    if (val < 0 || val >= domain.card(var)) {
      throw DataError("evidence value " + std::to_string(val) + " out of range for variable " + std::to_string(var));
    }
    if (values_[static_cast<std::size_t>(var)] != kFree) {
      throw DataError("variable " + std::to_string(var) + " observed twice");
    }
    values_[static_cast<std::size_t>(var)] = val;
  }
}

Evidence Evidence::full(const VarDomain& domain, std::span<const int> x) {
  if (!domain.contains(x)) throw DataError("assignment outside domain");
  Evidence e(domain.size());
  e.values_.assign(x.begin(), x.end());
  return e;
}

Evidence Evidence::parse(const VarDomain& domain, std::string_view text) {
  std::vector<std::pair<int, int>> obs;
  text = trim(text);
  while (!text.empty()) {
    const auto comma = text.find(',');
    const std::string_view item = trim(text.substr(0, comma));
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw DataError("evidence item '" + std::string(item) + "' lacks '='");
    obs.emplace_back(parse_int(item.substr(0, eq), item), parse_int(item.substr(eq + 1), item));
  }
  return Evidence(domain, obs);
}

std::size_t Evidence::num_observed() const {
  std::size_t count = 0;
  for (int v : values_) count += v != kFree ? 1 : 0;
  return count;
}

std::vector<int> Evidence::free_variables() const {
  std::vector<int> out;
  for (int v = 0; v < num_vars(); ++v)
    if (!observed(v)) out.push_back(v);
  return out;
}

std::vector<int> Evidence::observed_variables() const {
  std::vector<int> out;
  for (int v = 0; v < num_vars(); ++v)
    if (observed(v)) out.push_back(v);
  return out;
}

bool Evidence::consistent_with(std::span<const int> x) const {
  if (x.size() != values_.size()) return false;
  for (std::size_t v = 0; v < values_.size(); ++v) {
    if (values_[v] != kFree && values_[v] != x[v]) return false;
  }
  return true;
}

Assignment Evidence::seed_assignment() const {
  Assignment x(values_.size(), 0);
  for (std::size_t v = 0; v < values_.size(); ++v)
    if (values_[v] != kFree) x[v] = values_[v];
  return x;
}

std::string Evidence::to_string() const {
  std::ostringstream out;
  bool first = true;
  for (int v = 0; v < num_vars(); ++v) {
    if (!observed(v)) continue;
    if (!first) out << ',';
    out << v << '=' << value(v);
    first = false;
  }
  return out.str();
}

}  // namespace moat
