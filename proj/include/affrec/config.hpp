#pragma once
// Service configuration. Precedence: CLI flag > environment variable
// (AFFREC_ prefix) > config file (flat key=value) > default.

#include <cstdlib>
#include <fstream>
#include <map>
#include <string>

#include "affrec/domain.hpp"

namespace affrec {

enum class BackendKind { rule, remote };

struct ServiceConfig {
    int k = 5;
    double alpha = 0.5;
    double geo_negative_radius_km = 2.0;
    double prefetch_radius_km = 2.0;
    int prefetch_workers = 4;
    std::int64_t prefetch_lookahead_s = 900;
    size_t cache_capacity = 1'000'000;
    BackendKind backend = BackendKind::rule;
    std::string remote_url;
    int remote_timeout_ms = 30000;
    bool fail_open = false;  // closed by default: surface backend errors
    std::string data_dir;
    std::string listen_addr = "127.0.0.1:8080";

    void validate() const {
        if (k < 1) throw ValidationError("config: k must be >= 1");
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("config: alpha out of [0, 1]");
        if (geo_negative_radius_km <= 0 || prefetch_radius_km <= 0)
            throw ValidationError("config: radii must be positive");
        if (prefetch_workers < 1) throw ValidationError("config: prefetch_workers must be >= 1");
        if (cache_capacity < 1) throw ValidationError("config: cache_capacity must be >= 1");
        if (backend == BackendKind::remote && remote_url.empty())
            throw ValidationError("config: remote backend requires remote_url");
    }

    std::pair<std::string, int> listen_host_port() const {
        const auto colon = listen_addr.rfind(':');
        if (colon == std::string::npos)
            throw ValidationError("config: listen_addr must be host:port");
        return {listen_addr.substr(0, colon), std::stoi(listen_addr.substr(colon + 1))};
    }

    void apply(const std::string& key, const std::string& value) {
        try {
            if (key == "k") k = std::stoi(value);
            else if (key == "alpha") alpha = std::stod(value);
            else if (key == "geo_negative_radius_km") geo_negative_radius_km = std::stod(value);
            else if (key == "prefetch_radius_km") prefetch_radius_km = std::stod(value);
            else if (key == "prefetch_workers") prefetch_workers = std::stoi(value);
            else if (key == "prefetch_lookahead_s") prefetch_lookahead_s = std::stoll(value);
            else if (key == "cache_capacity") cache_capacity = std::stoull(value);
            else if (key == "backend") {
                if (value == "rule") backend = BackendKind::rule;
                else if (value == "remote") backend = BackendKind::remote;
                else throw ValidationError("config: backend must be rule or remote");
            }
            else if (key == "remote_url") remote_url = value;
            else if (key == "remote_timeout_ms") remote_timeout_ms = std::stoi(value);
            else if (key == "fail_mode") {
                if (value == "open") fail_open = true;
                else if (value == "closed") fail_open = false;
                else throw ValidationError("config: fail_mode must be open or closed");
            }
            else if (key == "data_dir") data_dir = value;
            else if (key == "listen_addr") listen_addr = value;
            else throw ValidationError("config: unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw ValidationError("config: invalid value for '" + key + "': " + value);
        }
    }

    void load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("config: cannot open " + path);
        std::string line;
        size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ValidationError("config: missing '=' at " + path + ":" +
                                      std::to_string(lineno));
            auto trim = [](std::string s) {
                const auto b = s.find_first_not_of(" \t");
                const auto e = s.find_last_not_of(" \t");
                return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
            };
            apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    void load_env() {
        static const char* keys[] = {
            "k", "alpha", "geo_negative_radius_km", "prefetch_radius_km", "prefetch_workers",
            "prefetch_lookahead_s", "cache_capacity", "backend", "remote_url",
            "remote_timeout_ms", "fail_mode", "data_dir", "listen_addr",
        };
        for (const char* key : keys) {
            std::string env_name = "AFFREC_";
            for (const char* c = key; *c; ++c)
                env_name += static_cast<char>(std::toupper(static_cast<unsigned char>(*c)));
            if (const char* value = std::getenv(env_name.c_str())) apply(key, value);
        }
    }
};

}  // namespace affrec
