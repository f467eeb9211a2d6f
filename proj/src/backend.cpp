#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#ifdef RECJUDGE_HTTPS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "backend_internal.hpp"
#include "recjudge/common.hpp"
#include "recjudge/rng.hpp"

namespace recjudge::judge {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

std::string BackendConfig::id() const {
    switch (kind) {
        case Kind::http_chat:
            return "http_chat:" + model_name + "@" + endpoint_url;
        case Kind::synthetic_oracle: {
            std::string id = "synthetic_oracle:noise=" + format_compact(noise_level) +
                             ":seed=" + std::to_string(seed);
            if (noise_shrinks_with_fields) id += ":fshrink";
            if (noise_shrinks_with_history) id += ":hshrink";
            return id;
        }
        case Kind::replay_cache:
            return "replay_cache:" + cache_path;
    }
    return "unknown";
}

BackendConfig load_backend_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);

    BackendConfig cfg;
    json params = json::object();
    std::string section;
    std::string line;
    size_t line_no = 0;
    bool kind_seen = false;

    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[' && line.back() == ']') {
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw FormatError(path + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (section == "backend.params") {
            // Pass-through values keep their apparent type.
            try {
                size_t pos = 0;
                double d = std::stod(value, &pos);
                if (pos == value.size()) {
                    if (d == static_cast<long long>(d))
                        params[key] = static_cast<long long>(d);
                    else
                        params[key] = d;
                    continue;
                }
            } catch (...) {
            }
            if (value == "true" || value == "false") params[key] = (value == "true");
            else params[key] = value;
            continue;
        }
        if (section != "backend")
            throw FormatError(path + ":" + std::to_string(line_no) + ": unknown section [" +
                              section + "]");

        try {
            if (key == "kind") {
                kind_seen = true;
                if (value == "http_chat") cfg.kind = BackendConfig::Kind::http_chat;
                else if (value == "synthetic_oracle") cfg.kind = BackendConfig::Kind::synthetic_oracle;
                else if (value == "replay_cache") cfg.kind = BackendConfig::Kind::replay_cache;
                else throw ValidationError("unknown backend kind \"" + value + "\"");
            } else if (key == "endpoint_url") cfg.endpoint_url = value;
            else if (key == "model_name") cfg.model_name = value;
            else if (key == "auth_env_var") cfg.auth_env_var = value;
            else if (key == "timeout_s") cfg.timeout_s = std::stoi(value);
            else if (key == "max_retries") cfg.max_retries = std::stoi(value);
            else if (key == "backoff_initial_s") cfg.backoff_initial_s = std::stod(value);
            else if (key == "max_in_flight") cfg.max_in_flight = std::stoi(value);
            else if (key == "noise_level") cfg.noise_level = std::stod(value);
            else if (key == "truth_qrels") cfg.truth_path = value;
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "noise_shrinks_with_fields") cfg.noise_shrinks_with_fields = (value == "true");
            else if (key == "noise_shrinks_with_history") cfg.noise_shrinks_with_history = (value == "true");
            else if (key == "cache_path") cfg.cache_path = value;
            else
                throw ValidationError("unknown backend config key \"" + key + "\"");
        } catch (const std::invalid_argument&) {
            throw FormatError(path + ":" + std::to_string(line_no) + ": bad value for " + key);
        }
    }
    if (!kind_seen) throw ValidationError(path + ": backend config must set kind");
    if (!params.empty()) cfg.params_json = params.dump();
    return cfg;
}

namespace detail {

uint64_t cache_key(const std::string& backend_id, const std::string& prompt_text, int repetition) {
    std::string material;
    material.reserve(backend_id.size() + prompt_text.size() + 16);
    material += backend_id;
    material += '\x1f';
    material += prompt_text;
    material += '\x1f';
    material += std::to_string(repetition);
    return rng::hash_str(material);
}

namespace {

std::string key_hex(uint64_t key) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(key));
    return buf;
}

JudgeVerdict verdict_from_json(const json& j) {
    JudgeVerdict v;
    v.reasoning = j.value("reasoning", "");
    if (j.contains("overall")) v.overall = j["overall"].get<int>();
    if (j.contains("criteria"))
        v.criteria_scores = j["criteria"].get<std::map<std::string, int>>();
    v.latency_ms = j.value("latency_ms", static_cast<int64_t>(0));
    return v;
}

}  // namespace

VerdictCache::VerdictCache(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (in) {
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            json j = json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object() || !j.contains("key") ||
                !j.contains("verdict"))
                continue;  // tolerate a truncated tail
            try {
                JudgeVerdict v = verdict_from_json(j["verdict"]);
                v.backend_id = j.value("backend_id", "");
                const uint64_t key = std::stoull(j["key"].get<std::string>(), nullptr, 16);
                by_key_[key] = v;
                by_pair_[{j.value("user", ""), j.value("item", ""), j.value("repetition", 0)}] = v;
            } catch (...) {
                continue;
            }
        }
    }
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw IoError("cannot open cache for appending: " + path_);
}

std::optional<JudgeVerdict> VerdictCache::lookup(uint64_t key) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = by_key_.find(key);
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
}

std::optional<JudgeVerdict> VerdictCache::lookup_pair(const std::string& user,
                                                      const std::string& item,
                                                      int repetition) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = by_pair_.find({user, item, repetition});
    if (it == by_pair_.end()) return std::nullopt;
    return it->second;
}

void VerdictCache::append(uint64_t key, const VerdictRecord& record) {
    json verdict;
    verdict["reasoning"] = record.verdict.reasoning;
    if (record.verdict.overall) verdict["overall"] = *record.verdict.overall;
    if (!record.verdict.criteria_scores.empty()) verdict["criteria"] = record.verdict.criteria_scores;
    verdict["latency_ms"] = record.verdict.latency_ms;

    json j;
    j["key"] = key_hex(key);
    j["user"] = record.user_id;
    j["item"] = record.item_id;
    j["repetition"] = record.repetition;
    j["backend_id"] = record.verdict.backend_id;
    j["verdict"] = verdict;

    std::lock_guard<std::mutex> lock(mu_);
    by_key_[key] = record.verdict;
    by_pair_[{record.user_id, record.item_id, record.repetition}] = record.verdict;
    out_ << j.dump() << '\n';
    out_.flush();
}

JudgeVerdict parse_verdict_text(const std::string& content, Rubric rubric) {
    json j = json::parse(content, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        // Repair pass: first balanced {...} region that parses.
        j = json::value_t::discarded;
        for (size_t start = content.find('{'); start != std::string::npos;
             start = content.find('{', start + 1)) {
            int depth = 0;
            bool in_string = false;
            for (size_t i = start; i < content.size(); ++i) {
                const char c = content[i];
                if (in_string) {
                    if (c == '\\') ++i;
                    else if (c == '"') in_string = false;
                    continue;
                }
                if (c == '"') in_string = true;
                else if (c == '{') ++depth;
                else if (c == '}' && --depth == 0) {
                    json candidate = json::parse(content.substr(start, i - start + 1), nullptr, false);
                    if (!candidate.is_discarded() && candidate.is_object()) j = candidate;
                    break;
                }
            }
            if (j.is_object()) break;
        }
        if (!j.is_object())
            throw ValidationError("unparseable verdict (no JSON object found): " +
                                  content.substr(0, 200));
    }

    auto grade_of = [&](const json& value, const char* field) -> int {
        int grade;
        if (value.is_number_integer()) grade = value.get<int>();
        else if (value.is_number_float()) grade = static_cast<int>(std::lround(value.get<double>()));
        else if (value.is_string()) {
            try {
                grade = std::stoi(value.get<std::string>());
            } catch (...) {
                throw ValidationError(std::string("verdict field ") + field + " is not a number");
            }
        } else {
            throw ValidationError(std::string("verdict field ") + field + " is not a number");
        }
        if (grade < 0 || grade > 7)
            throw ValidationError(std::string("verdict field ") + field + " outside [0,7]");
        return grade;
    };

    JudgeVerdict v;
    v.reasoning = j.value("reasoning", "");
    if (j.contains("interest_in_watching")) v.overall = grade_of(j["interest_in_watching"], "interest_in_watching");
    if (rubric == Rubric::criteria) {
        for (const auto& c : kCriteria) {
            if (!j.contains(c.name))
                throw ValidationError(std::string("verdict missing criterion \"") + c.name + "\"");
            v.criteria_scores[c.name] = grade_of(j[c.name], c.name);
        }
    } else if (!v.overall) {
        throw ValidationError("verdict missing interest_in_watching");
    }
    return v;
}

namespace {

class SyntheticBackend : public Backend {
public:
    SyntheticBackend(const BackendConfig& config, double effective_noise, const Qrels* truth)
        : config_(config), noise_(effective_noise), truth_(truth) {
        if (!truth_) throw ValidationError("synthetic_oracle backend requires truth qrels");
    }

    JudgeVerdict invoke(const std::string& user, const std::string& item, const JudgePrompt& prompt,
                        int repetition) override {
        return synthetic_oracle_verdict(user, item, *truth_, noise_,
                                        rng::mix(config_.seed, static_cast<uint64_t>(repetition)),
                                        prompt.rubric);
    }

private:
    BackendConfig config_;
    double noise_;
    const Qrels* truth_;
};

class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(VerdictCache* cache) : cache_(cache) {
        if (!cache_) throw ValidationError("replay_cache backend requires cache_path");
    }

    JudgeVerdict invoke(const std::string& user, const std::string& item, const JudgePrompt&,
                        int repetition) override {
        auto v = cache_->lookup_pair(user, item, repetition);
        if (!v)
            throw ValidationError("(" + user + ", " + item + ", rep " +
                                  std::to_string(repetition) + ") not present in replay cache");
        return *v;
    }

private:
    VerdictCache* cache_;
};

class HttpChatBackend : public Backend {
public:
    explicit HttpChatBackend(const BackendConfig& config) : config_(config) {
        if (config_.endpoint_url.empty())
            throw ValidationError("http_chat backend requires endpoint_url");
        const auto scheme_end = config_.endpoint_url.find("://");
        if (scheme_end == std::string::npos)
            throw ValidationError("endpoint_url must include a scheme: " + config_.endpoint_url);
        const auto path_start = config_.endpoint_url.find('/', scheme_end + 3);
        base_ = path_start == std::string::npos ? config_.endpoint_url
                                                : config_.endpoint_url.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : config_.endpoint_url.substr(path_start);
#ifndef RECJUDGE_HTTPS
        if (base_.rfind("https://", 0) == 0)
            throw ValidationError("built without TLS support, https endpoints are unavailable");
#endif
        if (!config_.auth_env_var.empty()) {
            const char* secret = std::getenv(config_.auth_env_var.c_str());
            if (!secret || !*secret)
                throw BackendError("environment variable " + config_.auth_env_var +
                                   " is not set (credentials are never stored in config)");
            auth_header_ = std::string("Bearer ") + secret;
        }
        if (!config_.params_json.empty()) extra_params_ = json::parse(config_.params_json);
    }

    bool parallel_safe() const override { return true; }

    JudgeVerdict invoke(const std::string& user, const std::string& item, const JudgePrompt& prompt,
                        int repetition) override {
        (void)user;
        (void)item;
        json body;
        body["model"] = config_.model_name;
        body["messages"] = json::array({{{"role", "user"}, {"content", prompt.full_text()}}});
        for (auto it = extra_params_.begin(); it != extra_params_.end(); ++it)
            body[it.key()] = it.value();
        const std::string payload = body.dump();

        httplib::Headers headers{{"X-Request-Repetition", std::to_string(repetition)}};
        if (!auth_header_.empty()) headers.emplace("Authorization", auth_header_);

        std::string last_error;
        double backoff = config_.backoff_initial_s;
        for (int attempt = 0; attempt < std::max(1, config_.max_retries); ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
                backoff *= 2.0;
            }
            httplib::Client client(base_);
            client.set_connection_timeout(config_.timeout_s, 0);
            client.set_read_timeout(config_.timeout_s, 0);
            auto res = client.Post(path_, headers, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;  // retryable
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "HTTP " + std::to_string(res->status);
                continue;  // retryable
            }
            if (res->status != 200)
                throw BackendError("HTTP " + std::to_string(res->status) + ": " +
                                   res->body.substr(0, 200));
            json reply = json::parse(res->body, nullptr, false);
            if (reply.is_discarded())
                throw ValidationError("backend returned non-JSON body: " + res->body.substr(0, 200));
            std::string content;
            try {
                content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const json::exception&) {
                throw ValidationError("backend reply lacks choices[0].message.content");
            }
            return parse_verdict_text(content, prompt.rubric);
        }
        throw BackendError("backend unreachable after " + std::to_string(config_.max_retries) +
                           " attempts (" + last_error + ")");
    }

private:
    BackendConfig config_;
    std::string base_;
    std::string path_;
    std::string auth_header_;
    json extra_params_ = json::object();
};

}  // namespace

std::unique_ptr<Backend> make_backend(const BackendConfig& config, double effective_noise,
                                      const Qrels* truth, VerdictCache* cache) {
    switch (config.kind) {
        case BackendConfig::Kind::synthetic_oracle:
            return std::make_unique<SyntheticBackend>(config, effective_noise, truth);
        case BackendConfig::Kind::replay_cache:
            return std::make_unique<ReplayBackend>(cache);
        case BackendConfig::Kind::http_chat:
            return std::make_unique<HttpChatBackend>(config);
    }
    throw ValidationError("unknown backend kind");
}

}  // namespace detail

}  // namespace recjudge::judge
