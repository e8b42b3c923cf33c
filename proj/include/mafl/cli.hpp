#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mafl {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Parsed nested key-value configuration: [section] headers, key = value
// lines, # comments. Keys outside a section are global. Unknown sections or
// keys raise ConfigError.
struct RunConfig {
    std::string text;  // verbatim source, echoed into artifacts
    std::string overrides;  // flag overrides, folded into the config hash
    std::map<std::string, std::map<std::string, std::string>> kv;

    bool has(const std::string& sec, const std::string& key) const;
    std::string gets(const std::string& sec, const std::string& key,
                     const std::string& dflt) const;
    long geti(const std::string& sec, const std::string& key, long dflt) const;
    double getd(const std::string& sec, const std::string& key, double dflt) const;
    std::vector<long> getis(const std::string& sec, const std::string& key,
                            const std::vector<long>& dflt) const;
    std::vector<double> getds(const std::string& sec, const std::string& key,
                              const std::vector<double>& dflt) const;

    void set(const std::string& sec, const std::string& key, const std::string& value);
};

RunConfig parse_config_text(const std::string& text);

// Subcommand bodies; return the process exit code (0 pass, 1 scientific
// failure, 2 configuration error).
int cmd_verify_geometry(const RunConfig& cfg);
int cmd_run_flow(const RunConfig& cfg);
int cmd_solve_elliptic(const RunConfig& cfg);
int cmd_smoothing(const RunConfig& cfg);
int cmd_report(const RunConfig& cfg);

// Full argv entry point used by the mafl binary and the test harness.
int run_cli(int argc, const char* const* argv);

}  // namespace mafl
