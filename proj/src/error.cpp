#include "spectrabench/error.hpp"

namespace spectrabench {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::parse: return "parse";
        case ErrorKind::schema: return "schema";
        case ErrorKind::label: return "label";
        case ErrorKind::integrity: return "integrity";
        case ErrorKind::capacity: return "capacity";
        case ErrorKind::domain: return "domain";
        case ErrorKind::degenerate: return "degenerate";
        case ErrorKind::shape: return "shape";
        case ErrorKind::unsupported: return "unsupported";
        case ErrorKind::config: return "config";
    }
    return "unknown";
}

}  // namespace spectrabench
