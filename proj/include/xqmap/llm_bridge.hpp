#ifndef XQMAP_LLM_BRIDGE_HPP_
#define XQMAP_LLM_BRIDGE_HPP_

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "xqmap/common.hpp"
#include "xqmap/explainer.hpp"

namespace xqmap {

#define XQMAP_DEFINE_CHAT_ERROR(Name, tag)                    \
  class Name : public Error {                                 \
   public:                                                    \
    using Error::Error;                                       \
    const char* kind() const noexcept override { return tag; } \
  }

XQMAP_DEFINE_CHAT_ERROR(CredentialError, "missing_credential");
XQMAP_DEFINE_CHAT_ERROR(NetworkError, "network");
XQMAP_DEFINE_CHAT_ERROR(HttpStatusError, "http_status");
XQMAP_DEFINE_CHAT_ERROR(MalformedResponseError, "malformed_response");

#undef XQMAP_DEFINE_CHAT_ERROR

enum class ChatRole { System, Human, Ai };

std::string to_string(ChatRole r);
ChatRole chat_role_from_string(const std::string& s);
// Role name on the chat-completion wire: system, user, assistant.
std::string wire_role(ChatRole r);

struct ChatMessage {
  ChatRole role = ChatRole::Human;
  std::string text;
  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

// messages[0] is always the system message carrying system_text.
struct PromptBundle {
  std::string system_text;
  std::vector<ChatMessage> messages;
  friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

nlohmann::json to_json(const PromptBundle& p);
PromptBundle prompt_from_json(const nlohmann::json& j);

enum class ChatMode { Stub, Remote };

struct ChatClientConfig {
  ChatMode mode = ChatMode::Stub;
  std::string endpoint;  // e.g. https://host/v1/chat/completions
  std::string model;
  std::string credential_env = "XQMAP_CHAT_API_KEY";
  double timeout_seconds = 30.0;

  void validate() const;
};

nlohmann::json to_json(const ChatClientConfig& c);
ChatClientConfig chat_config_from_json(const nlohmann::json& j);

std::string describe_scene_values(const ExplanationBundle& bundle);
std::string task_context(Scenario scenario, const std::vector<std::string>& component_names);
PromptBundle build_prompt(Scenario scenario, const ExplanationBundle& bundle);

enum class QuestionKind { Shallow, Contrastive, Unknown };

std::string to_string(QuestionKind k);
// Keyword rules: "preferred over" or "why ... over" -> contrastive; "why ... chosen" -> shallow.
QuestionKind classify_question(const std::string& question);
// Candidate labels named in the question, in order of appearance.
std::vector<std::string> question_labels(const std::string& question, const ExplanationBundle& bundle);

// Deterministic answer built only from bundle values rendered at three decimals.
std::string stub_answer(const ExplanationBundle& bundle, const std::string& question);

struct ChatReply {
  std::string answer;
  PromptBundle conversation;
};

// Appends the question and the answer to a copy of the conversation.
ChatReply chat(const ChatClientConfig& cfg, const PromptBundle& conversation, const std::string& question,
               const ExplanationBundle& bundle);

struct Transcript {
  std::string scene_id;
  std::string mode;
  PromptBundle conversation;
};

nlohmann::json to_json(const Transcript& t);
Transcript transcript_from_json(const nlohmann::json& j);

}  // namespace xqmap

#endif  // XQMAP_LLM_BRIDGE_HPP_
