#include <doctest.h>

#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>

#include "oracles.hpp"
#include "xqmap/llm_bridge.hpp"

using namespace xqmap;

namespace {

const char* kShallowQ = "Now pixel Selected is chosen, and the shallow question is: why is pixel Selected chosen to pick up?";
const char* kContrastQ = "Contrastive question: why is pixel Selected preferred over pixel B?";

ExplanationBundle worked_bundle() {
  const auto t = oracle::worked_example();
  return explain(t.qmaps, t.scene);
}

// Minimal chat-completion endpoint on a free local port.
class MockEndpoint {
 public:
  explicit MockEndpoint(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

ChatClientConfig remote_config(const std::string& url) {
  ChatClientConfig c;
  c.mode = ChatMode::Remote;
  c.endpoint = url;
  c.model = "test-model";
  c.credential_env = "XQMAP_TEST_CHAT_KEY";
  c.timeout_seconds = 5.0;
  return c;
}

}  // namespace

TEST_CASE("scene description of the worked example") {
  const std::string d = describe_scene_values(worked_bundle());
  CHECK(d.rfind(
            "Three pixels A, B, Selected are given, where A = a blue cube, its values = {color: 0.577, shape: 0.426, "
            "overall: 1.003}, B = a red cube, its values = {color: 0.017, shape: 0.745, overall: 0.762}, Selected = "
            "a blue cube, its value = {color: 0.557, shape: 0.516, overall: 1.073}. The value difference RDX for "
            "action pairs in each component: (Selected, A) = {color: -0.020, shape: 0.090}, (Selected, B) = "
            "{color: 0.540, shape: -0.229}",
            0) == 0);
  CHECK(d.find("(A, B) = {color: 0.560, shape: -0.319}") != std::string::npos);
}

TEST_CASE("zero values render with three decimals") {
  const auto t = oracle::worked_example();
  QMapSet q;
  q.names = {"color", "shape"};
  q.weights = {1.0, 1.0};
  q.maps = {QMap(5, 4), QMap(5, 4)};
  const std::string d = describe_scene_values(explain(q, t.scene));
  CHECK(d.find("{color: 0.000, shape: 0.000, overall: 0.000}") != std::string::npos);
  CHECK(d.find("-0.000") == std::string::npos);
}

TEST_CASE("prompt protocol") {
  const ExplanationBundle b = worked_bundle();
  const PromptBundle p = build_prompt(Scenario::Grasp, b);
  REQUIRE(p.messages.size() == 1);
  CHECK(p.messages[0].role == ChatRole::System);
  CHECK(p.messages[0].text == p.system_text);
  CHECK(p.system_text.rfind("Context: Imagine there is a visual pick-up task", 0) == 0);
  CHECK(p.system_text.find("(red < orange < yellow < green < blue < purple)") != std::string::npos);
  CHECK(p.system_text.find("provided with three action choices") != std::string::npos);
  CHECK(p.system_text.find("1) shallow question - why is an action chosen?") != std::string::npos);
  CHECK(p.system_text.find("2) contrastive question - why is one action preferred over another?") != std::string::npos);
  CHECK(p.system_text.find("Scene Description: " + describe_scene_values(b)) != std::string::npos);

  const std::string land = task_context(Scenario::Land, {"flat", "colored"});
  CHECK(land.find("landing") != std::string::npos);
  CHECK(land.find("two component values") != std::string::npos);
  CHECK(land.find("ranking") == std::string::npos);

  const std::string three = task_context(Scenario::Grasp, {"shape", "color", "size"});
  CHECK(three.find("three component values") != std::string::npos);
  CHECK(three.find("size") != std::string::npos);
  CHECK(three.find("red < orange") != std::string::npos);
  const std::string no_color = task_context(Scenario::Grasp, {"shape"});
  CHECK(no_color.find("Colors are ranked red < orange") != std::string::npos);
}

TEST_CASE("question classification and labels") {
  const ExplanationBundle b = worked_bundle();
  CHECK(classify_question(kShallowQ) == QuestionKind::Shallow);
  CHECK(classify_question(kContrastQ) == QuestionKind::Contrastive);
  CHECK(classify_question("Why did you pick A over B?") == QuestionKind::Contrastive);
  CHECK(classify_question("What is the weather?") == QuestionKind::Unknown);
  CHECK(question_labels(kContrastQ, b) == std::vector<std::string>{"Selected", "B"});
  CHECK(question_labels("why is pixel a preferred over pixel selected", b) == std::vector<std::string>{"A", "Selected"});
  // A lowercase "a" outside "pixel a" is an article, not a label.
  CHECK(question_labels("why is a pixel B chosen", b) == std::vector<std::string>{"B"});
}

TEST_CASE("stub answers the worked questions from bundle values") {
  const ExplanationBundle b = worked_bundle();
  const std::string s = stub_answer(b, kShallowQ);
  CHECK(s.find("highest Q-value overall") != std::string::npos);
  CHECK(s.find("1.073") != std::string::npos);
  CHECK(s.find("color") != std::string::npos);

  const std::string c = stub_answer(b, kContrastQ);
  CHECK(c.rfind("Pixel Selected is preferred over pixel B", 0) == 0);
  CHECK(c.find("higher Q-value for color") != std::string::npos);
  CHECK(c.find("color: 0.557 vs. 0.017") != std::string::npos);
  CHECK(c.find("Although pixel B has a higher shape value than Selected") != std::string::npos);

  const std::string reverse = stub_answer(b, "why is pixel B preferred over pixel Selected?");
  CHECK(reverse.find("not preferred") != std::string::npos);

  const std::string u = stub_answer(b, "tell me a joke");
  CHECK(u.find("cannot") != std::string::npos);
  CHECK_FALSE(std::regex_search(u, std::regex(R"(\d)")));
}

TEST_CASE("stub chat grows the conversation append-only") {
  const ExplanationBundle b = worked_bundle();
  const PromptBundle p0 = build_prompt(Scenario::Grasp, b);
  ChatClientConfig cfg;
  const ChatReply r1 = chat(cfg, p0, kShallowQ, b);
  REQUIRE(r1.conversation.messages.size() == 3);
  CHECK(r1.conversation.messages[0] == p0.messages[0]);
  CHECK(r1.conversation.messages[1] == ChatMessage{ChatRole::Human, kShallowQ});
  CHECK(r1.conversation.messages[2] == ChatMessage{ChatRole::Ai, r1.answer});
  const ChatReply r2 = chat(cfg, r1.conversation, kContrastQ, b);
  REQUIRE(r2.conversation.messages.size() == 5);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r2.conversation.messages[i] == r1.conversation.messages[i]);
  CHECK(p0.messages.size() == 1);

  const ChatReply missing = chat(cfg, p0, "why is pixel Z preferred over pixel Q?", b);
  CHECK(missing.answer.find("Please name both pixels") != std::string::npos);
  CHECK_THROWS_AS(chat(cfg, PromptBundle{}, kShallowQ, b), ContractError);
}

TEST_CASE("transcript and config JSON") {
  const ExplanationBundle b = worked_bundle();
  const ChatReply r = chat(ChatClientConfig{}, build_prompt(Scenario::Grasp, b), kShallowQ, b);
  Transcript t{b.scene_id, "stub", r.conversation};
  const auto j = to_json(t);
  CHECK(j.at("format_version") == 1);
  const Transcript back = transcript_from_json(j);
  CHECK(back.conversation == t.conversation);
  CHECK(back.scene_id == t.scene_id);

  ChatClientConfig c = remote_config("https://example.invalid/v1/chat/completions");
  CHECK(chat_config_from_json(to_json(c)).endpoint == c.endpoint);
  auto bad = to_json(c);
  bad["temperature"] = 0.2;
  CHECK_THROWS_AS(chat_config_from_json(bad), ConfigError);
  c.endpoint.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = remote_config("x");
  c.timeout_seconds = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("remote chat errors are distinct") {
  const ExplanationBundle b = worked_bundle();
  const PromptBundle p = build_prompt(Scenario::Grasp, b);
  ::unsetenv("XQMAP_TEST_CHAT_KEY");

  SUBCASE("missing credential fails before any request") {
    int hits = 0;
    MockEndpoint ep([&](const httplib::Request&, httplib::Response& res) {
      ++hits;
      res.set_content("{}", "application/json");
    });
    CHECK_THROWS_AS(chat(remote_config(ep.url()), p, kShallowQ, b), CredentialError);
    CHECK(hits == 0);
  }

  ::setenv("XQMAP_TEST_CHAT_KEY", "secret-token", 1);

  SUBCASE("success sends the conversation on the wire") {
    nlohmann::json seen;
    std::string auth;
    MockEndpoint ep([&](const httplib::Request& req, httplib::Response& res) {
      seen = nlohmann::json::parse(req.body);
      auth = req.get_header_value("Authorization");
      res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"Because of color."}}]})",
                      "application/json");
    });
    const ChatReply r = chat(remote_config(ep.url()), p, kShallowQ, b);
    CHECK(r.answer == "Because of color.");
    CHECK(auth == "Bearer secret-token");
    CHECK(seen.at("model") == "test-model");
    REQUIRE(seen.at("messages").size() == 2);
    CHECK(seen["messages"][0]["role"] == "system");
    CHECK(seen["messages"][0]["content"] == p.system_text);
    CHECK(seen["messages"][1]["role"] == "user");
    CHECK(seen["messages"][1]["content"] == kShallowQ);
    CHECK(r.conversation.messages.back() == ChatMessage{ChatRole::Ai, "Because of color."});
  }

  SUBCASE("non-success status") {
    MockEndpoint ep([](const httplib::Request&, httplib::Response& res) {
      res.status = 500;
      res.set_content("{\"error\":\"boom\"}", "application/json");
    });
    CHECK_THROWS_AS(chat(remote_config(ep.url()), p, kShallowQ, b), HttpStatusError);
  }

  SUBCASE("malformed response") {
    MockEndpoint ep([](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"choices":[]})", "application/json");
    });
    CHECK_THROWS_AS(chat(remote_config(ep.url()), p, kShallowQ, b), MalformedResponseError);
  }

  SUBCASE("unreachable endpoint") {
    std::string url;
    { MockEndpoint closed([](const httplib::Request&, httplib::Response&) {}); url = closed.url(); }
    CHECK_THROWS_AS(chat(remote_config(url), p, kShallowQ, b), NetworkError);
  }

  ::unsetenv("XQMAP_TEST_CHAT_KEY");
}
