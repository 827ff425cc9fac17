#pragma once

// Shared helpers for the doctest suites: metric-file loading relative to the
// source tree plus the deterministic site/disk generators from the
// framework-free support header.

#include <fstream>
#include <sstream>
#include <string>

#include "support_noframework.hpp"

namespace testsup {

using namespace cfinsler;
using acc::CatalogCase;
using acc::catalog_cases;
using acc::random_polynomial_ball_map;
using acc::random_site;

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE_MESSAGE(static_cast<bool>(in), ("cannot open " + path).c_str());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline std::string source_path(const std::string& rel) {
    return std::string(CFINSLER_SOURCE_DIR) + "/" + rel;
}

inline std::shared_ptr<CompiledMetric> load_metric_file(const std::string& rel) {
    MetricFile mf = load_metric_text(read_file(source_path(rel)), rel);
    return compile_file(mf);
}

}  // namespace testsup
