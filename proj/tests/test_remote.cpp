#include <atomic>
#include <cstdlib>
#include <memory>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "json.hpp"

#include "gforge/remote.hpp"

using namespace gforge;
using nlohmann::json;

namespace {

// loopback chat-completion stub; scripted per-test via the handler
struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit StubServer(httplib::Server::Handler handler) {
        server.Post("/v1/chat/completions", std::move(handler));
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

std::string completion_body(const std::string& content) {
    return json{{"choices", json::array({json{{"message", json{{"content", content}}}}})}}.dump();
}

Task arith_task() {
    Task t;
    t.id = "remote-1";
    t.prompt = "((3+4)*2)";
    t.ground_truth = "14";
    t.kind = TaskKind::Reasoning;
    return t;
}

}  // namespace

TEST_CASE("remote client: happy path with auth header and answer extraction") {
    std::string seen_auth, seen_body;
    StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
        seen_auth = req.get_header_value("Authorization");
        seen_body = req.body;
        res.set_content(completion_body("the final answer is 14"), "application/json");
    });

    setenv("GUIDANCE_FORGE_API_KEY", "sk-test-123", 1);
    RemoteConfig cfg;
    cfg.base_url = stub.url();
    cfg.answer_regex = "answer is (\\-?\\d+)";
    auto reference = std::make_shared<ChainArithEnv>();
    RemoteEnvironment remote(cfg, reference);

    Task t = arith_task();
    Guidance g = make_guidance({0, 1}, reference->guidance_vocab());
    GeneratorResponse r = remote.step(t, g);
    unsetenv("GUIDANCE_FORGE_API_KEY");

    CHECK(r.answer == "14");
    CHECK(r.utility.value == doctest::Approx(1.0));
    CHECK(seen_auth == "Bearer sk-test-123");
    json body = json::parse(seen_body);
    CHECK(body["model"] == "gpt-4o-mini");
    CHECK(body["messages"].size() == 2);
    CHECK(body["messages"][1]["role"] == "user");
    CHECK(body["temperature"].get<double>() == doctest::Approx(0.0));
    CHECK(body["max_tokens"].get<int>() == 256);
}

TEST_CASE("remote client: retries transient failures with backoff") {
    std::atomic<int> calls{0};
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        if (calls.fetch_add(1) == 0) {
            res.status = 500;
            res.set_content("busy", "text/plain");
        } else {
            res.set_content(completion_body("14"), "application/json");
        }
    });
    RemoteConfig cfg;
    cfg.base_url = stub.url();
    cfg.backoff_base_ms = 1;
    auto reference = std::make_shared<ChainArithEnv>();
    RemoteEnvironment remote(cfg, reference);
    GeneratorResponse r = remote.step(arith_task(), make_guidance({0, 1}, reference->guidance_vocab()));
    CHECK(r.utility.value == doctest::Approx(1.0));
    CHECK(calls.load() == 2);
}

TEST_CASE("remote client: non-retryable status fails fast") {
    std::atomic<int> calls{0};
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        calls.fetch_add(1);
        res.status = 401;
        res.set_content("no", "text/plain");
    });
    RemoteConfig cfg;
    cfg.base_url = stub.url();
    cfg.backoff_base_ms = 1;
    auto reference = std::make_shared<ChainArithEnv>();
    RemoteEnvironment remote(cfg, reference);
    try {
        remote.step(arith_task(), make_guidance({0, 1}, reference->guidance_vocab()));
        FAIL("expected RemoteError");
    } catch (const RemoteError& e) {
        CHECK_FALSE(e.retryable);
    }
    CHECK(calls.load() == 1);
}

TEST_CASE("remote client: exhausted retries surface a retryable error") {
    std::atomic<int> calls{0};
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        calls.fetch_add(1);
        res.status = 503;
    });
    RemoteConfig cfg;
    cfg.base_url = stub.url();
    cfg.backoff_base_ms = 1;
    cfg.max_attempts = 3;
    auto reference = std::make_shared<ChainArithEnv>();
    RemoteEnvironment remote(cfg, reference);
    try {
        remote.step(arith_task(), make_guidance({0, 1}, reference->guidance_vocab()));
        FAIL("expected RemoteError");
    } catch (const RemoteError& e) {
        CHECK(e.retryable);
    }
    CHECK(calls.load() == 3);
}

TEST_CASE("remote client: wrong answers are negative observations, not errors") {
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
        res.set_content(completion_body("42"), "application/json");
    });
    RemoteConfig cfg;
    cfg.base_url = stub.url();
    auto reference = std::make_shared<ChainArithEnv>();
    RemoteEnvironment remote(cfg, reference);
    GeneratorResponse r = remote.step(arith_task(), make_guidance({0, 1}, reference->guidance_vocab()));
    CHECK(r.utility.value == doctest::Approx(0.0));
    REQUIRE(r.feedback.has_value());
    CHECK(r.feedback->find("42") != std::string::npos);
}

TEST_CASE("remote environment delegates metadata but not oracles") {
    RemoteConfig cfg;
    cfg.base_url = "http://127.0.0.1:9";  // never contacted here
    auto reference = std::make_shared<ChainArithEnv>();
    RemoteEnvironment remote(cfg, reference);
    CHECK(remote.kind() == TaskKind::Reasoning);
    CHECK(remote.guidance_vocab() == reference->guidance_vocab());
    CHECK(remote.max_guidance_len() == reference->max_guidance_len());
    CHECK_THROWS_AS(remote.admissible_guidances(arith_task()), UnsupportedError);
    CHECK_THROWS_AS(remote.expert_guidance(arith_task()), UnsupportedError);
    RandomSource rng(1, 1);
    CHECK_THROWS_AS(remote.generate_tasks(3, rng), UnsupportedError);
}
