#include "spectrabench/cli/report.hpp"

#include "spectrabench/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace spectrabench::cli {

namespace {

std::string cell(const json& v) {
    if (v.is_null()) return "";
    std::string s = v.is_string() ? v.get<std::string>() : v.dump();
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    return quoted + "\"";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IntegrityError("cannot write " + path.string());
    out << text;
}

}  // namespace

Report::Report(std::string phase, const RunConfig& cfg, std::string provenance)
    : phase_(std::move(phase)), config_hash_(cfg.hash()), seed_(cfg.global_seed), provenance_(std::move(provenance)) {}

void Report::add_row(const std::string& table, json row) { tables_[table].push_back(std::move(row)); }

const std::vector<json>& Report::rows(const std::string& table) const {
    static const std::vector<json> empty;
    const auto it = tables_.find(table);
    return it == tables_.end() ? empty : it->second;
}

json Report::to_json() const {
    json j;
    j["phase"] = phase_;
    j["config_hash"] = config_hash_;
    j["global_seed"] = seed_;
    j["software_version"] = SPECTRABENCH_VERSION;
    j["provenance"] = provenance_;
    j["summary"] = summary_;
    j["notes"] = notes_;
    j["tables"] = json::object();
    for (const auto& [name, rows] : tables_) j["tables"][name] = rows;
    return j;
}

std::string to_csv(const std::vector<json>& rows) {
    std::set<std::string> keys;
    for (const auto& r : rows)
        for (const auto& [k, v] : r.items()) keys.insert(k);
    std::ostringstream out;
    bool first = true;
    for (const auto& k : keys) {
        out << (first ? "" : ",") << cell(k);
        first = false;
    }
    out << '\n';
    for (const auto& r : rows) {
        first = true;
        for (const auto& k : keys) {
            out << (first ? "" : ",") << (r.contains(k) ? cell(r.at(k)) : "");
            first = false;
        }
        out << '\n';
    }
    return out.str();
}

void Report::write(const std::filesystem::path& out_dir, bool markdown) const {
    std::filesystem::create_directories(out_dir);
    write_file(out_dir / (phase_ + ".json"), to_json().dump(2) + "\n");
    for (const auto& [name, rows] : tables_) write_file(out_dir / (phase_ + "_" + name + ".csv"), to_csv(rows));

    std::ostringstream timing;
    timing << "unit,wall_time_s\n";
    for (const auto& [unit, s] : timings_) timing << cell(unit) << ',' << s << '\n';
    write_file(out_dir / (phase_ + "_timing.csv"), timing.str());

    if (!markdown) return;
    std::ostringstream md;
    md << "# " << phase_ << "\n\nconfig " << config_hash_ << ", seed " << seed_ << ", " << provenance_ << "\n\n";
    if (!summary_.empty()) md << "```json\n" << summary_.dump(2) << "\n```\n\n";
    for (const auto& n : notes_) md << "- " << n << '\n';
    for (const auto& [name, rows] : tables_) {
        std::set<std::string> keys;
        for (const auto& r : rows)
            for (const auto& [k, v] : r.items()) keys.insert(k);
        md << "\n## " << name << "\n\n|";
        for (const auto& k : keys) md << ' ' << k << " |";
        md << "\n|";
        for (std::size_t i = 0; i < keys.size(); ++i) md << " --- |";
        md << '\n';
        for (const auto& r : rows) {
            md << '|';
            for (const auto& k : keys) md << ' ' << (r.contains(k) ? (r.at(k).is_string() ? r.at(k).get<std::string>() : r.at(k).dump()) : "") << " |";
            md << '\n';
        }
    }
    write_file(out_dir / (phase_ + ".md"), md.str());
}

json read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IntegrityError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw IntegrityError("corrupt report " + path.string() + ": " + e.what());
    }
}

}  // namespace spectrabench::cli
