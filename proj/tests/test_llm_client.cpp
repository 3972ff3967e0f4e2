#include <gtest/gtest.h>

#include <atomic>

#include "radmat/llm_client.hpp"

using namespace radmat;

namespace {

// Local OpenAI-style server on an ephemeral port.
class StubServer {
public:
    explicit StubServer(httplib::Server::Handler handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

std::string completion(const std::string& text) {
    return nlohmann::json{{"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}}}.dump();
}

Prompt sample_prompt() {
    Prompt p;
    p.system_text = "sys";
    p.parameter_block = "epsilon_r = 4\n";
    p.instruction_text = "MATERIAL: <material name>\n";
    return p;
}

EndpointConfig fast(const std::string& url) {
    EndpointConfig c;
    c.base_url = url;
    c.timeout_s = 5.0;
    c.backoff_s = 0.01;
    return c;
}

struct EnvGuard {
    explicit EnvGuard(std::initializer_list<std::pair<const char*, const char*>> vars) {
        for (auto [k, v] : vars) {
            names.push_back(k);
            ::setenv(k, v, 1);
        }
    }
    ~EnvGuard() {
        for (auto* k : names) ::unsetenv(k);
    }
    std::vector<const char*> names;
};

} // namespace

TEST(EndpointUrl, Parsing) {
    auto u = parse_endpoint_url("http://localhost:11434");
    EXPECT_EQ(u.host, "localhost");
    EXPECT_EQ(u.port, 11434);
    EXPECT_EQ(u.path, "/v1/chat/completions");
    EXPECT_EQ(parse_endpoint_url("http://h:8080/v1/").path, "/v1/chat/completions");
    EXPECT_EQ(parse_endpoint_url("http://h/api/v1").path, "/api/v1/chat/completions");
    EXPECT_EQ(parse_endpoint_url("http://h/x/chat/completions").path, "/x/chat/completions");
    EXPECT_EQ(parse_endpoint_url("http://h").port, 80);
    for (const char* bad : {"https://h", "ftp://h", "h:80", "http://", "http://h:notaport", "http://h:0", "http://h:80x", "http://h:70000"}) {
        try {
            parse_endpoint_url(bad);
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig) << bad;
        }
    }
}

TEST(ChatBody, RequestShape) {
    EndpointConfig cfg;
    cfg.model = "m1";
    const auto j = nlohmann::json::parse(chat_request_body(sample_prompt(), cfg));
    EXPECT_EQ(j["model"], "m1");
    EXPECT_EQ(j["stream"], false);
    EXPECT_EQ(j["temperature"], 0.0);
    ASSERT_EQ(j["messages"].size(), 2u);
    EXPECT_EQ(j["messages"][0]["role"], "system");
    EXPECT_EQ(j["messages"][0]["content"], "sys");
    EXPECT_EQ(j["messages"][1]["role"], "user");
    EXPECT_EQ(j["messages"][1]["content"], sample_prompt().user_text());
}

TEST(ChatBody, ResponseShapes) {
    EXPECT_EQ(chat_response_text(completion("MATERIAL: glass")), "MATERIAL: glass");
    EXPECT_EQ(chat_response_text(R"({"choices":[{"text":"legacy"}]})"), "legacy");
    EXPECT_EQ(chat_response_text(R"({"message":{"content":"ollama"}})"), "ollama");
    for (const char* bad : {"not json", "{}", R"({"choices":[]})"}) {
        try {
            chat_response_text(bad);
            ADD_FAILURE() << bad;
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::EndpointError);
        }
    }
}

TEST(HttpClient, ReturnsTextVerbatimAndSendsKey) {
    std::string auth, model;
    const std::string text = "Step 1.\n<think>x</think>\nMATERIAL: soda-lime glass\n";
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
        auth = req.get_header_value("Authorization");
        model = nlohmann::json::parse(req.body)["model"];
        res.set_content(completion(text), "application/json");
    });
    auto cfg = fast(server.url());
    cfg.api_key = "secret";
    cfg.model = "tiny";
    HttpChatClient client(cfg);
    EXPECT_EQ(client.complete(sample_prompt()), text);
    EXPECT_EQ(auth, "Bearer secret");
    EXPECT_EQ(model, "tiny");
}

TEST(HttpClient, RetriesServerErrors) {
    std::atomic<int> calls{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        if (++calls <= 2) {
            res.status = 500;
            res.set_content("busy", "text/plain");
        } else {
            res.set_content(completion("MATERIAL: metal"), "application/json");
        }
    });
    HttpChatClient client(fast(server.url()));
    EXPECT_EQ(client.complete(sample_prompt()), "MATERIAL: metal");
    EXPECT_EQ(calls.load(), 3);
}

TEST(HttpClient, GivesUpAfterRetries) {
    std::atomic<int> calls{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 503;
    });
    auto cfg = fast(server.url());
    cfg.retries = 1;
    HttpChatClient client(cfg);
    try {
        client.complete(sample_prompt());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EndpointError);
        EXPECT_NE(std::string(e.what()).find("503"), std::string::npos);
    }
    EXPECT_EQ(calls.load(), 2);
}

TEST(HttpClient, ClientErrorIsNotRetried) {
    std::atomic<int> calls{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 400;
        res.set_content("bad model", "text/plain");
    });
    HttpChatClient client(fast(server.url()));
    try {
        client.complete(sample_prompt());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EndpointError);
        EXPECT_NE(std::string(e.what()).find("HTTP 400"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("bad model"), std::string::npos);
    }
    EXPECT_EQ(calls.load(), 1);
}

TEST(HttpClient, UnreachableWithinBudget) {
    int port = 0;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    } // closed again: nothing listens here now
    auto cfg = fast("http://127.0.0.1:" + std::to_string(port));
    cfg.retries = 2;
    cfg.timeout_s = 1.0;
    HttpChatClient client(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        client.complete(sample_prompt());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::EndpointUnreachable);
    }
    EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), 5.0);
}

TEST(HttpClient, RejectsBadSettings) {
    auto cfg = fast("http://127.0.0.1:1");
    cfg.retries = -1;
    EXPECT_THROW(HttpChatClient{cfg}, Error);
    cfg = fast("http://127.0.0.1:1");
    cfg.timeout_s = 0.0;
    EXPECT_THROW(HttpChatClient{cfg}, Error);
}

TEST(EndpointConfig, EnvironmentOverridesRecord) {
    KvRecord r;
    r.set("base_url", "http://file:1");
    r.set("model", "from-file");
    r.set("retries", "5");
    auto cfg = apply_record(EndpointConfig{}, r);
    EXPECT_EQ(cfg.model, "from-file");
    EXPECT_EQ(cfg.retries, 5);
    {
        EnvGuard env{{"RADMAT_LLM_URL", "http://env:2"}, {"RADMAT_LLM_MODEL", "from-env"}, {"RADMAT_LLM_TIMEOUT", "7.5"}};
        const auto c = apply_environment(cfg);
        EXPECT_EQ(c.base_url, "http://env:2");
        EXPECT_EQ(c.model, "from-env");
        EXPECT_EQ(c.timeout_s, 7.5);
        EXPECT_EQ(c.retries, 5);
    }
    {
        EnvGuard env{{"RADMAT_LLM_RETRIES", "many"}};
        EXPECT_THROW(apply_environment(cfg), Error);
    }
    EXPECT_EQ(apply_environment(cfg).model, "from-file");
}

TEST(EndpointConfig, ClientFactory) {
    EndpointConfig cfg;
    try {
        make_chat_client(cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidConfig);
    }
    cfg.base_url = std::string(kStubEndpoint);
    auto stub = make_chat_client(cfg);
    EXPECT_NE(dynamic_cast<RuleStubClient*>(stub.get()), nullptr);
    cfg.base_url = "http://127.0.0.1:9";
    EXPECT_NE(dynamic_cast<HttpChatClient*>(make_chat_client(cfg).get()), nullptr);
}
