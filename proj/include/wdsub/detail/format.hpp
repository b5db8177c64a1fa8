#pragma once

#include <cstdio>
#include <string>
#include <vector>

namespace wdsub::detail {

/// %.12g, the precision used by every report.
inline std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string fmt_vec(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += fmt(v[i]);
    }
    return s + "]";
}

inline const char* fmt_bool(bool b) { return b ? "true" : "false"; }

}  // namespace wdsub::detail
