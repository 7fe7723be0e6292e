#pragma once

#include <charconv>
#include <fstream>
#include <string>

#include "fedlab/common.hpp"

namespace fedlab::csv {

// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path) {
        if (!out_) throw ConfigError("cannot open output file: " + path);
    }

    void header(const std::string& line) { out_ << line << "\n"; }

    Writer& field(const std::string& s) {
        sep();
        out_ << s;
        return *this;
    }
    Writer& field(long long v) {
        sep();
        out_ << v;
        return *this;
    }
    Writer& field(int v) { return field(static_cast<long long>(v)); }
    Writer& field(double v) {
        sep();
        out_ << format_double(v);
        return *this;
    }
    void endrow() {
        out_ << "\n";
        first_ = true;
    }

private:
    void sep() {
        if (!first_) out_ << ",";
        first_ = false;
    }
    std::ofstream out_;
    bool first_ = true;
};

}  // namespace fedlab::csv
