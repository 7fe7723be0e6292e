#include <doctest.h>

#include <sstream>

#include "fedlab/panels.hpp"

using namespace fedlab;

TEST_CASE("verification suite passes on the default config") {
    std::ostringstream report;
    CHECK(expcli::run_verification_suite(expcli::default_config(), report) == 0);
    // One CSV row per check plus the header.
    CHECK(report.str().find("check,expected,actual,tolerance,pass") != std::string::npos);
    CHECK(report.str().find(",0\n") == std::string::npos);  // no failing rows
}

TEST_CASE("verification suite detects an injected wrong minimizer") {
    std::ostringstream report;
    CHECK(expcli::run_verification_suite(expcli::default_config(), report, true) == 1);
    CHECK(report.str().find(",0\n") != std::string::npos);  // at least one failing row
}
