#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "dwtsum/llm.hpp"

using namespace dwtsum;

namespace {

/// Loopback chat-completion endpoint.
class MockChatServer {
 public:
  MockChatServer(std::string reply, int fail_first = 0) : reply_(std::move(reply)), fail_first_(fail_first) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      last_request_ = nlohmann::json::parse(req.body);
      last_auth_ = req.get_header_value("Authorization");
      if (requests_ <= fail_first_) {
        res.status = 500;
        return;
      }
      nlohmann::json body = {
          {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", reply_}}}}}},
          {"usage", {{"prompt_tokens", 120}, {"completion_tokens", 30}, {"total_tokens", 150}}}};
      res.set_content(body.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockChatServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  int requests() const { return requests_; }
  const nlohmann::json& last_request() const { return last_request_; }
  const std::string& last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::string reply_;
  int fail_first_;
  std::atomic<int> requests_{0};
  nlohmann::json last_request_;
  std::string last_auth_;
};

const Document& sample_document() {
  static const Document d = make_document(
      "case-1",
      "A 60-year-old woman presented with fever. She had travelled abroad. Blood cultures were drawn. "
      "Malaria smears were positive. She received artesunate. Her fever resolved. She was discharged. "
      "Follow-up was uneventful.");
  return d;
}

SummaryResult sample_summary() {
  return assemble_summary({{0, 0.9}, {3, 0.8}, {6, 0.7}}, {{4, 0.5}}, sample_document());
}

LlmClientConfig online_config(const std::string& url) {
  LlmClientConfig c;
  c.offline = false;
  c.endpoint_url = url;
  c.model_name = "mock-chat";
  c.timeout_ms = 2000;
  c.max_retries = 2;
  c.retry_backoff_ms = 1;
  return c;
}

}  // namespace

TEST_CASE("build_prompt: skeleton then details", "[llm][prompt]") {
  const auto& doc = sample_document();
  REQUIRE(doc.sentences.size() == 8);
  const auto b = build_prompt(sample_summary(), doc, DomainTag::clinical);
  REQUIRE(b.skeleton_sentences.size() == 3);
  REQUIRE(b.detail_sentences == std::vector<std::string>{"She received artesunate."});

  const auto skel = b.user_text.find("GLOBAL CONTEXT (document skeleton):");
  const auto det = b.user_text.find("CRITICAL DETAILS:");
  REQUIRE(skel != std::string::npos);
  REQUIRE(det != std::string::npos);
  REQUIRE(skel < det);
  for (std::size_t i : {0u, 3u, 6u}) {
    const auto pos = b.user_text.find(doc.sentences[i].text);
    REQUIRE(pos != std::string::npos);
    REQUIRE(pos < det);
  }
  REQUIRE(b.user_text.find("She received artesunate.") > det);
  REQUIRE(b.user_text.find("clinical case summary") != std::string::npos);
  REQUIRE(b.domain_tag == DomainTag::clinical);
  REQUIRE(b.extractive_text == sample_summary().summary_text);
  REQUIRE(b.token_budget_hint == count_tokens(b.extractive_text));
}

TEST_CASE("build_prompt: details section omitted when empty", "[llm][prompt]") {
  const auto r = assemble_summary({{1, 0.9}, {5, 0.8}}, {}, sample_document());
  const auto b = build_prompt(r, sample_document(), DomainTag::generic);
  REQUIRE(b.user_text.find("CRITICAL DETAILS") == std::string::npos);
  REQUIRE(b.detail_sentences.empty());
}

TEST_CASE("build_prompt: domain instructions differ", "[llm][prompt]") {
  const auto r = sample_summary();
  const auto legal = build_prompt(r, sample_document(), DomainTag::legal);
  REQUIRE(legal.user_text.find("syllabus-style legal summary") != std::string::npos);
  const auto generic = build_prompt(r, sample_document(), DomainTag::generic);
  REQUIRE(generic.user_text != legal.user_text);
  REQUIRE_THROWS_AS(parse_domain_tag("medical"), Error);
}

TEST_CASE("build_prompt: every prompt sentence comes from the document", "[llm][prompt][property]") {
  const auto& doc = sample_document();
  const auto b = build_prompt(sample_summary(), doc, DomainTag::clinical);
  std::istringstream lines(b.user_text);
  std::string line;
  std::size_t bullets = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("- ", 0) != 0) continue;
    ++bullets;
    REQUIRE(doc.raw_text.find(line.substr(2)) != std::string::npos);
  }
  REQUIRE(bullets == 4);
}

TEST_CASE("PromptTemplate: custom file and missing sections", "[llm][prompt]") {
  const std::string path = "dwtsum_test_prompt.txt";
  std::ofstream(path) << "[system]\nBe brief.\n[skeleton_header]\nCONTEXT:\n[details_header]\nDETAILS:\n"
                         "[instruction.clinical]\nC.\n[instruction.legal]\nL.\n[instruction.generic]\nG.\n";
  const auto t = PromptTemplate::load(path);
  const auto b = build_prompt(sample_summary(), sample_document(), DomainTag::generic, t);
  REQUIRE(b.system_text == "Be brief.");
  REQUIRE(b.user_text.rfind("CONTEXT:\n- ", 0) == 0);
  REQUIRE(b.user_text.substr(b.user_text.size() - 2) == "G.");
  std::remove(path.c_str());
  REQUIRE_THROWS_AS(PromptTemplate::parse("[system]\nx\n"), Error);
  REQUIRE_THROWS_AS(PromptTemplate::load("/nonexistent/prompt.txt"), Error);
}

TEST_CASE("generate: offline returns the extractive summary", "[llm][generate]") {
  const auto b = build_prompt(sample_summary(), sample_document(), DomainTag::clinical);
  const auto g = generate(b, LlmClientConfig{});
  REQUIRE(g.offline);
  REQUIRE(g.text == b.extractive_text);
  REQUIRE(g.usage.is_null());
  REQUIRE(generate(b, LlmClientConfig{}).text == g.text);
}

TEST_CASE("generate: mock endpoint", "[llm][generate]") {
  MockChatServer server("A woman with imported malaria recovered after artesunate.");
  const auto b = build_prompt(sample_summary(), sample_document(), DomainTag::clinical);
  const auto g = generate(b, online_config(server.url()));
  REQUIRE(!g.offline);
  REQUIRE(g.text == "A woman with imported malaria recovered after artesunate.");
  REQUIRE(g.usage["total_tokens"] == 150);
  REQUIRE(g.attempts == 1);

  const auto& req = server.last_request();
  REQUIRE(req["model"] == "mock-chat");
  REQUIRE(req["temperature"] == 0.0);
  REQUIRE(req["max_tokens"] == 512);
  REQUIRE(req["messages"][0]["role"] == "system");
  REQUIRE(req["messages"][1]["content"] == b.user_text);
  REQUIRE(server.last_auth().empty());
}

TEST_CASE("generate: retries then reports the attempt count", "[llm][generate]") {
  const auto b = build_prompt(sample_summary(), sample_document(), DomainTag::generic);
  SECTION("persistent 500") {
    MockChatServer server("unused", 100);
    try {
      generate(b, online_config(server.url()));
      FAIL("expected an error");
    } catch (const Error& e) {
      REQUIRE(e.kind() == ErrorKind::transport);
      REQUIRE(std::string(e.what()).find("after 3 attempt(s)") != std::string::npos);
    }
    REQUIRE(server.requests() == 3);
  }
  SECTION("transient 500") {
    MockChatServer server("ok text", 1);
    const auto g = generate(b, online_config(server.url()));
    REQUIRE(g.text == "ok text");
    REQUIRE(g.attempts == 2);
  }
}

TEST_CASE("generate: blank completion and auth", "[llm][generate]") {
  const auto b = build_prompt(sample_summary(), sample_document(), DomainTag::generic);
  {
    MockChatServer server("  \n");
    try {
      generate(b, online_config(server.url()));
      FAIL("expected an error");
    } catch (const Error& e) {
      REQUIRE(e.kind() == ErrorKind::empty_completion);
    }
  }
  MockChatServer server("fine");
  auto cfg = online_config(server.url());
  cfg.auth_token_env_var = "DWTSUM_TEST_LLM_TOKEN";
  ::setenv("DWTSUM_TEST_LLM_TOKEN", "tok", 1);
  generate(b, cfg);
  REQUIRE(server.last_auth() == "Bearer tok");
  ::unsetenv("DWTSUM_TEST_LLM_TOKEN");
}

TEST_CASE("LlmClientConfig: validation", "[llm][config]") {
  LlmClientConfig c;
  REQUIRE_NOTHROW(c.validate());
  c.offline = false;
  REQUIRE_THROWS_AS(c.validate(), Error);
  c.endpoint_url = "http://localhost:1/x";
  c.model_name = "m";
  REQUIRE_NOTHROW(c.validate());
  c.temperature = 3.0;
  REQUIRE_THROWS_AS(c.validate(), Error);
}

TEST_CASE("LlmClient: concurrent generate calls", "[llm][generate]") {
  MockChatServer server("parallel");
  auto cfg = online_config(server.url());
  cfg.max_in_flight = 2;
  const LlmClient client(cfg);
  const auto b = build_prompt(sample_summary(), sample_document(), DomainTag::generic);
  std::vector<std::thread> threads;
  std::atomic<int> ok{0};
  for (int i = 0; i < 6; ++i) {
    threads.emplace_back([&] {
      if (client.generate(b).text == "parallel") ++ok;
    });
  }
  for (auto& t : threads) t.join();
  REQUIRE(ok == 6);
  REQUIRE(server.requests() == 6);
}
