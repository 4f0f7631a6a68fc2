#include "gforge/remote.hpp"

#include <chrono>
#include <cstdlib>
#include <regex>
#include <semaphore>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace gforge {

using nlohmann::json;

struct RemoteEnvironment::Impl {
    explicit Impl(int max_in_flight) : slots(std::max(1, max_in_flight)) {}
    std::counting_semaphore<256> slots;
};

RemoteEnvironment::RemoteEnvironment(RemoteConfig config,
                                     std::shared_ptr<const Environment> reference)
    : config_(std::move(config)),
      reference_(std::move(reference)),
      impl_(std::make_unique<Impl>(config_.max_in_flight)) {
    if (config_.base_url.empty()) throw ConfigError("remote environment needs a base URL");
    if (!reference_) throw ConfigError("remote environment needs a reference environment");
}

RemoteEnvironment::~RemoteEnvironment() = default;

TaskKind RemoteEnvironment::kind() const { return reference_->kind(); }
const Vocabulary& RemoteEnvironment::guidance_vocab() const { return reference_->guidance_vocab(); }
int RemoteEnvironment::max_guidance_len() const { return reference_->max_guidance_len(); }
std::string RemoteEnvironment::context_key(const Task& task) const {
    return reference_->context_key(task);
}
int RemoteEnvironment::feedback_bucket(const std::string& feedback) const {
    return reference_->feedback_bucket(feedback);
}
int RemoteEnvironment::feedback_bucket_count() const { return reference_->feedback_bucket_count(); }
std::vector<std::string> RemoteEnvironment::answer_labels() const {
    return reference_->answer_labels();
}

std::string RemoteEnvironment::request_body(const Task& task, const Guidance& guidance) const {
    std::string user = "Task: " + task.prompt + "\nGuidance: " + guidance.text +
                       "\nAnswer with the final result only.";
    json body = {
        {"model", config_.model},
        {"messages",
         json::array({json{{"role", "system"},
                           {"content", "You solve tasks by following the given guidance."}},
                      json{{"role", "user"}, {"content", user}}})},
        {"temperature", config_.temperature},
        {"max_tokens", config_.max_tokens},
    };
    return body.dump();
}

namespace {

std::string trim_copy(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

}  // namespace

GeneratorResponse RemoteEnvironment::step(const Task& task, const Guidance& guidance) const {
    const std::string body = request_body(task, guidance);

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    client.set_read_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    impl_->slots.acquire();
    struct Release {
        Impl* impl;
        ~Release() { impl->slots.release(); }
    } release{impl_.get()};

    std::string last_error;
    bool last_retryable = true;
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(
                std::chrono::milliseconds(config_.backoff_base_ms << (attempt - 1)));
        }
        auto res = client.Post(config_.path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            last_retryable = true;
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status);
            last_retryable = retryable_status(res->status);
            if (!last_retryable) break;
            continue;
        }
        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::exception& e) {
            throw RemoteError(std::string("malformed completion response: ") + e.what(), false);
        }
        if (!reply.contains("choices") || reply["choices"].empty())
            throw RemoteError("completion response has no choices", false);
        std::string content = reply["choices"][0].at("message").at("content").get<std::string>();

        std::string answer = trim_copy(content);
        if (!config_.answer_regex.empty()) {
            std::smatch m;
            if (std::regex_search(content, m, std::regex(config_.answer_regex)) && m.size() > 1)
                answer = m[1].str();
            else
                answer = "";
        }
        if (task.ground_truth && answer == *task.ground_truth)
            return make_response(answer, 1.0, std::nullopt);
        return make_response(answer, 0.0,
                             "answer mismatch: got '" + (answer.empty() ? "<none>" : answer) + "'");
    }
    throw RemoteError("remote step failed after " + std::to_string(config_.max_attempts) +
                          " attempts: " + last_error,
                      last_retryable);
}

}  // namespace gforge
