#include <doctest.h>

#include "softroi/ipo_http.hpp"

// httplib drags in resolv.h whose _res macro mangles Eigen internals;
// keep it after every Eigen-including header.
#include <httplib.h>

#include <atomic>
#include <thread>

#include <json.hpp>

using namespace softroi;
using namespace softroi::ipo;

namespace {

struct StubServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;

    explicit StubServer(httplib::Server::Handler handler) {
        server.Post("/generate", std::move(handler));
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer() {
        server.stop();
        thread.join();
    }
    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port) + "/generate"; }
};

double hash_score(const std::string& text) {
    return static_cast<double>(fnv1a64(text) % 1000) / 1000.0;
}

GeneratorConfig fast_cfg() {
    GeneratorConfig cfg;
    cfg.candidates_per_iter = 2;
    cfg.iterations = 2;
    return cfg;
}

}  // namespace

TEST_CASE("http generator round-trips the documented request schema") {
    std::atomic<int> calls{0};
    StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        CHECK(body.contains("instruction"));
        CHECK(body.contains("pool"));
        CHECK(body.at("temperature") == 0.8);
        CHECK(body.at("top_p") == 0.95);
        CHECK(body.at("max_new_tokens") == 1024);
        const int k = body.at("k").get<int>();
        nlohmann::json prompts = nlohmann::json::array();
        for (int i = 0; i < k; ++i)
            prompts.push_back("Stub prompt " + std::to_string(calls * 10 + i) + " for <image>.");
        ++calls;
        res.set_content(nlohmann::json{{"prompts", prompts}}.dump(), "application/json");
    });

    HttpPromptGenerator gen(stub.endpoint(), "Paraphrase the prompts.");
    auto result = ipo_loop({"Seed prompt <image>."}, gen, hash_score, fast_cfg(), 3);
    CHECK(result.trace.skipped_iterations.empty());
    CHECK(result.trace.iterations_run == 2);
    CHECK(calls == 2);
    CHECK(result.pool.members.size() == 3);
}

TEST_CASE("wrong prompt count skips the iteration and the loop completes") {
    StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        const int k = body.at("k").get<int>();
        nlohmann::json prompts = nlohmann::json::array();
        for (int i = 0; i + 1 < k; ++i) prompts.push_back("Short <image> answer.");
        res.set_content(nlohmann::json{{"prompts", prompts}}.dump(), "application/json");
    });

    HttpPromptGenerator gen(stub.endpoint(), "Paraphrase.");
    auto result = ipo_loop({"Seed prompt <image>."}, gen, hash_score, fast_cfg(), 3);
    CHECK(result.trace.skipped_iterations == std::vector<int>{1, 2});
    CHECK(result.best.text == "Seed prompt <image>.");
}

TEST_CASE("malformed payloads and missing placeholders are transport errors") {
    StubServer stub([](const httplib::Request&, httplib::Response& res) {
        res.set_content("this is not json", "application/json");
    });
    HttpPromptGenerator gen(stub.endpoint(), "x");
    PromptPool pool;
    pool.members.push_back({"Seed <image>.", 0, std::nullopt});
    CHECK_THROWS_AS(gen.generate(pool, 2, fast_cfg()), TransportError);

    StubServer no_placeholder([](const httplib::Request&, httplib::Response& res) {
        res.set_content(nlohmann::json{{"prompts", {"a", "b"}}}.dump(), "application/json");
    });
    HttpPromptGenerator gen2(no_placeholder.endpoint(), "x");
    CHECK_THROWS_AS(gen2.generate(pool, 2, fast_cfg()), TransportError);
}

TEST_CASE("unreachable endpoints name themselves in the error") {
    HttpPromptGenerator gen("http://127.0.0.1:1/generate", "x", 300);
    PromptPool pool;
    pool.members.push_back({"Seed <image>.", 0, std::nullopt});
    try {
        gen.generate(pool, 1, fast_cfg());
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(std::string(e.what()).find("127.0.0.1:1") != std::string::npos);
    }

    // inside the loop this is a recorded skip, not a crash
    auto result = ipo_loop({"Seed <image>."}, gen, hash_score, fast_cfg(), 3);
    CHECK(result.trace.skipped_iterations == std::vector<int>{1, 2});

    CHECK_THROWS_AS(HttpPromptGenerator("ftp://x/y", "x"), InvalidInput);
}
