#pragma once
// Chat-completion client that plugs a hosted model in as the generator
// backend. Task metadata (vocabulary, context keys, evaluation) comes from a
// scripted reference environment of the same kind; only step() goes over the
// wire. Never used by the offline test suite's assertions beyond a loopback
// server.

#include <memory>
#include <string>

#include "gforge/environment.hpp"

namespace gforge {

struct RemoteConfig {
    std::string base_url;          // e.g. "http://127.0.0.1:8089"
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4o-mini";
    double temperature = 0.0;
    int max_tokens = 256;
    int timeout_seconds = 30;
    int max_attempts = 3;          // exponential backoff between attempts
    int backoff_base_ms = 200;
    int max_in_flight = 4;
    std::string api_key_env = "GUIDANCE_FORGE_API_KEY";
    // first capture group extracts the answer from the reply text; empty
    // regex means "use the whole reply, trimmed"
    std::string answer_regex;
};

class RemoteEnvironment : public Environment {
public:
    RemoteEnvironment(RemoteConfig config, std::shared_ptr<const Environment> reference);
    ~RemoteEnvironment() override;

    TaskKind kind() const override;
    const Vocabulary& guidance_vocab() const override;
    int max_guidance_len() const override;
    std::string context_key(const Task& task) const override;
    int feedback_bucket(const std::string& feedback) const override;
    int feedback_bucket_count() const override;
    std::vector<std::string> answer_labels() const override;

    GeneratorResponse step(const Task& task, const Guidance& guidance) const override;

    // deterministic request body, exposed for tests
    std::string request_body(const Task& task, const Guidance& guidance) const;

private:
    struct Impl;
    RemoteConfig config_;
    std::shared_ptr<const Environment> reference_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace gforge
