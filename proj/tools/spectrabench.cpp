#include "spectrabench/cli/runner.hpp"
#include "spectrabench/error.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace {

constexpr int kConfigError = 2;
constexpr int kDataError = 3;
constexpr int kInternalError = 4;

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto item = s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!item.empty()) out.push_back(item);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace spectrabench;

    CLI::App app{"Spectral fruit ripeness/firmness benchmark"};
    app.set_version_flag("--version", SPECTRABENCH_VERSION);
    std::string phase, config_path, out_dir, models;
    std::optional<std::uint64_t> seed;
    bool resume = false, markdown = false;
    app.add_option("phase", phase, "Phase to run")
        ->required()
        ->check(CLI::IsMember(cli::Runner::phases()));
    app.add_option("--config", config_path, "Run configuration (JSON)")->required();
    app.add_option("--out", out_dir, "Output directory")->required();
    app.add_option("--seed", seed, "Override the global seed");
    app.add_option("--models", models, "Comma-separated model names");
    app.add_flag("--resume", resume, "Reuse cached fits and studies from <out>/cache");
    app.add_flag("--markdown", markdown, "Also write a Markdown summary per phase");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        auto cfg = cli::load_config(config_path);
        std::optional<std::vector<std::string>> model_list;
        if (!models.empty()) model_list = split_list(models);
        cli::apply_overrides(cfg, seed, model_list);
        cli::Runner runner(std::move(cfg), {out_dir, resume, markdown});
        const auto doc = runner.run(phase);
        std::cout << phase << ": wrote " << (std::filesystem::path(out_dir) / (phase + ".json")).string() << " (config "
                  << doc.at("config_hash").get<std::string>() << ")\n";
        for (const auto& n : doc.at("notes")) std::cout << "note: " << n.get<std::string>() << "\n";
        return 0;
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
        return e.is_data_error() ? kDataError : kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternalError;
    }
}
