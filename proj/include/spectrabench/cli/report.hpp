#pragma once

#include "spectrabench/cli/config.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace spectrabench::cli {

/// One phase document: header fields, named tables of row records, a summary object
/// and notes. Wall-clock timings go to a separate sidecar so the document itself is
/// byte-identical across reruns.
class Report {
public:
    Report(std::string phase, const RunConfig& cfg, std::string provenance);

    const std::string& phase() const { return phase_; }
    void add_row(const std::string& table, json row);
    json& summary() { return summary_; }
    const json& summary() const { return summary_; }
    void note(const std::string& text) { notes_.push_back(text); }
    void time(const std::string& unit, double seconds) { timings_.emplace_back(unit, seconds); }

    const std::vector<json>& rows(const std::string& table) const;
    json to_json() const;

    /// <out>/<phase>.json, <out>/<phase>_<table>.csv, <out>/<phase>_timing.csv and,
    /// when asked, <out>/<phase>.md.
    void write(const std::filesystem::path& out_dir, bool markdown = false) const;

private:
    std::string phase_;
    std::string config_hash_;
    std::uint64_t seed_ = 0;
    std::string provenance_;
    std::map<std::string, std::vector<json>> tables_;
    json summary_ = json::object();
    std::vector<std::string> notes_;
    std::vector<std::pair<std::string, double>> timings_;
};

/// Rows as CSV over the sorted union of their keys.
std::string to_csv(const std::vector<json>& rows);

/// Reads a previously written phase document.
json read_report(const std::filesystem::path& path);

}  // namespace spectrabench::cli
