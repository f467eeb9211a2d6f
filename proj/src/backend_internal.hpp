#pragma once

// Internal seam between judge_items and the concrete backends / verdict cache.

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>

#include "recjudge/judge.hpp"

namespace recjudge::judge::detail {

class Backend {
public:
    virtual ~Backend() = default;
    // Throws BackendError on transport-level failure (after internal retries)
    // and ValidationError when the verdict cannot be produced for this item.
    virtual JudgeVerdict invoke(const std::string& user, const std::string& item,
                                const JudgePrompt& prompt, int repetition) = 0;
    virtual bool parallel_safe() const { return false; }
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config, double effective_noise,
                                      const Qrels* truth, class VerdictCache* cache);

// Parses a structured verdict from model output: strict JSON first, then one
// repair pass extracting the first well-formed object from surrounding text.
JudgeVerdict parse_verdict_text(const std::string& content, Rubric rubric);

// Append-only JSON-lines verdict store. Unparseable lines (e.g. a truncated
// tail after a crash) are skipped on load. Writes are serialized.
class VerdictCache {
public:
    explicit VerdictCache(std::string path);

    std::optional<JudgeVerdict> lookup(uint64_t key) const;
    std::optional<JudgeVerdict> lookup_pair(const std::string& user, const std::string& item,
                                            int repetition) const;
    void append(uint64_t key, const VerdictRecord& record);

private:
    std::string path_;
    std::map<uint64_t, JudgeVerdict> by_key_;
    std::map<std::tuple<std::string, std::string, int>, JudgeVerdict> by_pair_;
    mutable std::mutex mu_;
    std::ofstream out_;
};

uint64_t cache_key(const std::string& backend_id, const std::string& prompt_text, int repetition);

}  // namespace recjudge::judge::detail
