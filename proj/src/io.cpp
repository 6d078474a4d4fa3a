#include "switchctl/io.hpp"

#include <cmath>
#include <cstdio>

namespace switchctl {

std::string format_double(double value) {
  if (value == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

void dump(const nlohmann::json& v, std::string& out, int indent) {
  const std::string pad(static_cast<size_t>(indent + 2), ' ');
  const std::string close(static_cast<size_t>(indent), ' ');
  switch (v.type()) {
    case nlohmann::json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {  // std::map: sorted
        if (!first) out += ",\n";
        first = false;
        out += pad + nlohmann::json(it.key()).dump() + ": ";
        dump(it.value(), out, indent + 2);
      }
      out += "\n" + close + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      bool flat = true;
      for (const auto& e : v) flat = flat && !e.is_structured();
      if (flat) {
        out += "[";
        for (size_t i = 0; i < v.size(); ++i) {
          if (i) out += ", ";
          dump(v[i], out, indent);
        }
        out += "]";
        return;
      }
      out += "[\n";
      for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",\n";
        out += pad;
        dump(v[i], out, indent + 2);
      }
      out += "\n" + close + "]";
      return;
    }
    case nlohmann::json::value_t::number_float: {
      const double d = v.get<double>();
      out += std::isfinite(d) ? format_double(d) : "null";
      return;
    }
    default:
      out += v.dump();
  }
}

}  // namespace

std::string dump_json(const nlohmann::json& value) {
  std::string out;
  dump(value, out, 0);
  out += "\n";
  return out;
}

}  // namespace switchctl
