#include "xqmap/llm_bridge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>

#include <httplib.h>

#include "xqmap/json_util.hpp"

namespace xqmap {

namespace {

using json = nlohmann::json;

std::string number_word(std::size_t n) {
  static const char* kWords[] = {"zero", "one", "two",   "three",  "four",   "five",  "six",
                                 "seven", "eight", "nine", "ten", "eleven", "twelve"};
  return n < std::size(kWords) ? kWords[n] : std::to_string(n);
}

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string with_article(const std::string& object) {
  if (object.empty()) return object;
  const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(object[0])));
  return (std::string("aeiou").find(c) != std::string::npos ? "an " : "a ") + object;
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

std::string join_and(const std::vector<std::string>& parts) {
  if (parts.size() <= 1) return parts.empty() ? "" : parts[0];
  return join(std::vector<std::string>(parts.begin(), parts.end() - 1), ", ") + " and " + parts.back();
}

std::string value_braces(const std::vector<std::string>& names, const std::vector<double>& values,
                         const double* overall) {
  std::vector<std::string> items;
  for (std::size_t k = 0; k < names.size(); ++k) items.push_back(names[k] + ": " + format3(values[k]));
  if (overall != nullptr) items.push_back("overall: " + format3(*overall));
  return "{" + join(items, ", ") + "}";
}

std::string color_ranking() { return join(palette_names(6), " < "); }

std::string component_clause(const std::string& name) {
  if (name == "shape") return "shape, evaluating its score in being a cube (not a bowl)";
  if (name == "color") return "color, evaluating its color ranking (" + color_ranking() + ")";
  if (name == "flat") return "flat, evaluating whether the surface is flat (inclined by at most 5 degrees)";
  if (name == "colored") return "colored, evaluating whether the surface is colored (not grey)";
  return name + ", evaluating its " + name + " property";
}

std::string action_verb(Scenario s) { return s == Scenario::Grasp ? "pick up" : "land on"; }

const Candidate& require_candidate(const ExplanationBundle& b, const std::string& label) {
  const Candidate* c = b.candidates.find(label);
  if (c == nullptr) throw MissingPairError("no candidate labelled " + label);
  return *c;
}

std::string shallow_stub(const ExplanationBundle& b, const std::vector<std::string>& labels) {
  const Candidate& sel = b.candidates.selected;
  const std::size_t n = b.candidates.ordered().size();
  if (!labels.empty() && labels.front() != sel.label) {
    const Candidate& other = require_candidate(b, labels.front());
    return "Pixel " + other.label + " is not the chosen action. Pixel " + sel.label +
           " is chosen because it has the highest Q-value overall (" + format3(sel.overall) + " against " +
           format3(other.overall) + " for pixel " + other.label + ").";
  }
  return "The pixel " + sel.label + " is chosen to " + action_verb(b.scenario) +
         " because it has the highest Q-value overall among the " + number_word(n) + " pixels (" +
         format3(sel.overall) + "), with its " + b.shallow.dominant_name + " component contributing most (" +
         format3(b.shallow.component_values[b.shallow.dominant]) + ").";
}

std::string contrastive_stub(const ExplanationBundle& b, std::vector<std::string> labels) {
  const auto& names = b.candidates.component_names;
  if (labels.size() == 1) labels.insert(labels.begin(), b.candidates.selected.label);
  if (labels.size() < 2) {
    std::vector<std::string> known;
    for (const Candidate* c : b.candidates.ordered()) known.push_back(c->label);
    return "I can only compare two of the pixels in the scene description (" + join(known, ", ") +
           "). Please name both pixels.";
  }
  const Candidate& x = require_candidate(b, labels[0]);
  const Candidate& y = require_candidate(b, labels[1]);
  if (x.label == y.label) return "Pixel " + x.label + " is the same pixel, so no component distinguishes them.";
  if (x.overall < y.overall) {
    return "Pixel " + x.label + " is not preferred over pixel " + y.label + ": pixel " + y.label +
           " has the higher overall Q-value (" + format3(y.overall) + " vs. " + format3(x.overall) + ").";
  }

  std::vector<std::string> better, worse, better_vals, worse_vals;
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (x.values[k] > y.values[k]) {
      better.push_back(names[k]);
      better_vals.push_back(names[k] + ": " + format3(x.values[k]) + " vs. " + format3(y.values[k]));
    } else if (x.values[k] < y.values[k]) {
      worse.push_back(names[k]);
      worse_vals.push_back(names[k] + ": " + format3(y.values[k]) + " vs. " + format3(x.values[k]));
    }
  }
  if (better.empty() && worse.empty()) {
    return "No component distinguishes pixel " + x.label + " from pixel " + y.label + ".";
  }

  std::string text = "Pixel " + x.label + " is preferred over pixel " + y.label;
  if (better.empty()) {
    text += " only by a tie in overall Q-value (" + format3(x.overall) + ").";
  } else {
    text += " because it has a higher Q-value for " + join_and(better) + " (" + join(better_vals, "; ") + ").";
  }
  if (const Rdx* r = b.find_pair(x.label, y.label)) {
    text += " The RDX for (" + x.label + ", " + y.label + ") is " + value_braces(names, r->deltas, nullptr) + ".";
  } else if (const Rdx* rr = b.find_pair(y.label, x.label)) {
    text += " The RDX for (" + y.label + ", " + x.label + ") is " + value_braces(names, rr->deltas, nullptr) + ".";
  }
  if (!worse.empty() && !better.empty()) {
    text += " Although pixel " + y.label + " has a higher " + join_and(worse) + " value than " + x.label + " (" +
            join(worse_vals, "; ") + "), the higher " + join_and(better) + " value of " + x.label +
            " makes it the better choice overall.";
  }
  return text;
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("chat endpoint must be an http(s) URL: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw ConfigError("unsupported endpoint scheme '" + scheme + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string remote_answer(const ChatClientConfig& cfg, const PromptBundle& conversation) {
  const char* key = std::getenv(cfg.credential_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw CredentialError("environment variable " + cfg.credential_env + " is not set");
  }
  const Endpoint ep = split_endpoint(cfg.endpoint);

  json messages = json::array();
  for (const auto& m : conversation.messages) messages.push_back({{"role", wire_role(m.role)}, {"content", m.text}});
  const json request = {{"model", cfg.model}, {"messages", messages}};

  httplib::Client client(ep.origin);
  const auto seconds = static_cast<time_t>(cfg.timeout_seconds);
  const auto micros = static_cast<time_t>((cfg.timeout_seconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);
  httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
  auto res = client.Post(ep.path, headers, request.dump(), "application/json");
  if (!res) throw NetworkError("chat request to " + cfg.endpoint + " failed: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw HttpStatusError("chat endpoint returned HTTP " + std::to_string(res->status));
  }
  try {
    const json body = json::parse(res->body);
    return body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw MalformedResponseError(std::string("unexpected chat response: ") + e.what());
  }
}

json conversation_json(const PromptBundle& p) {
  json msgs = json::array();
  for (const auto& m : p.messages) msgs.push_back({{"role", to_string(m.role)}, {"text", m.text}});
  return {{"system_text", p.system_text}, {"messages", msgs}};
}

}  // namespace

std::string to_string(ChatRole r) {
  switch (r) {
    case ChatRole::System: return "system";
    case ChatRole::Human: return "human";
    case ChatRole::Ai: return "ai";
  }
  return "human";
}

ChatRole chat_role_from_string(const std::string& s) {
  if (s == "system") return ChatRole::System;
  if (s == "human") return ChatRole::Human;
  if (s == "ai") return ChatRole::Ai;
  throw FormatError("unknown chat role '" + s + "'");
}

std::string wire_role(ChatRole r) {
  switch (r) {
    case ChatRole::System: return "system";
    case ChatRole::Human: return "user";
    case ChatRole::Ai: return "assistant";
  }
  return "user";
}

json to_json(const PromptBundle& p) { return conversation_json(p); }

PromptBundle prompt_from_json(const json& j) {
  try {
    PromptBundle p;
    p.system_text = j.at("system_text").get<std::string>();
    for (const auto& m : j.at("messages")) {
      p.messages.push_back({chat_role_from_string(m.at("role").get<std::string>()), m.at("text").get<std::string>()});
    }
    if (p.messages.empty() || p.messages.front().role != ChatRole::System) {
      throw FormatError("conversation must start with the system message");
    }
    for (std::size_t i = 1; i < p.messages.size(); ++i) {
      if (p.messages[i].role == ChatRole::System) throw FormatError("conversation has more than one system message");
    }
    return p;
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed conversation: ") + e.what());
  }
}

void ChatClientConfig::validate() const {
  if (!(timeout_seconds > 0.0)) throw ConfigError("chat timeout_seconds must be positive");
  if (mode == ChatMode::Remote) {
    if (endpoint.empty()) throw ConfigError("remote chat needs an endpoint");
    if (credential_env.empty()) throw ConfigError("remote chat needs a credential environment variable name");
    split_endpoint(endpoint);
  }
}

json to_json(const ChatClientConfig& c) {
  return {{"mode", c.mode == ChatMode::Stub ? "stub" : "remote"},
          {"endpoint", c.endpoint},
          {"model", c.model},
          {"credential_env", c.credential_env},
          {"timeout_seconds", c.timeout_seconds}};
}

ChatClientConfig chat_config_from_json(const json& j) {
  jsonutil::reject_unknown_keys(j, {"mode", "endpoint", "model", "credential_env", "timeout_seconds"}, "chat config");
  ChatClientConfig c;
  std::string mode = "stub";
  jsonutil::read_opt(j, "mode", mode);
  if (mode == "stub") {
    c.mode = ChatMode::Stub;
  } else if (mode == "remote") {
    c.mode = ChatMode::Remote;
  } else {
    throw ConfigError("chat mode must be stub or remote, got '" + mode + "'");
  }
  jsonutil::read_opt(j, "endpoint", c.endpoint);
  jsonutil::read_opt(j, "model", c.model);
  jsonutil::read_opt(j, "credential_env", c.credential_env);
  jsonutil::read_opt(j, "timeout_seconds", c.timeout_seconds);
  c.validate();
  return c;
}

std::string describe_scene_values(const ExplanationBundle& bundle) {
  const auto& names = bundle.candidates.component_names;
  const auto cands = bundle.candidates.ordered();
  std::vector<std::string> labels, entries;
  for (const Candidate* c : cands) {
    labels.push_back(c->label);
    const bool selected = c == &bundle.candidates.selected;
    entries.push_back(c->label + " = " + with_article(c->object) + (selected ? ", its value = " : ", its values = ") +
                      value_braces(names, c->values, &c->overall));
  }
  std::string text = capitalize(number_word(cands.size())) + " pixels " + join(labels, ", ") +
                     " are given, where " + join(entries, ", ") + ".";
  if (!bundle.rdx.empty()) {
    std::vector<std::string> pairs;
    for (const auto& r : bundle.rdx) {
      pairs.push_back("(" + r.first + ", " + r.second + ") = " + value_braces(names, r.deltas, nullptr));
    }
    text += " The value difference RDX for action pairs in each component: " + join(pairs, ", ") + ".";
  }
  return text;
}

std::string task_context(Scenario scenario, const std::vector<std::string>& names) {
  std::string text;
  if (scenario == Scenario::Grasp) {
    text =
        "Context: Imagine there is a visual pick-up task that a robotic arm needs to learn to solve. The objective "
        "of the task is to pick up objects with task-specific properties. We train an agent to achieve this using "
        "Q-learning which outputs a 2D matrix of Q-values of the same size as the input image. The Q-values "
        "quantitatively describe the utility of action (pixel) choices, each corresponding to executing the pick-up "
        "primitive at a 3D position mapped from that pixel. ";
    if (names == std::vector<std::string>{"color", "shape"}) {
      return text +
             "The Q-value of every action (and its associated object) is further decomposed into two component "
             "values, one evaluating its score in being a cube (not a bowl) and the other being in which color "
             "ranking (" +
             color_ranking() + "), summing up to its overall Q-value.";
    }
  } else {
    text =
        "Context: Imagine there is a visual landing task that a drone needs to learn to solve. The objective of the "
        "task is to land on surfaces with task-specific properties. We train an agent to achieve this using "
        "Q-learning which outputs a 2D matrix of Q-values of the same size as the input image. The Q-values "
        "quantitatively describe the utility of action (pixel) choices, each corresponding to executing the landing "
        "primitive at a 3D position mapped from that pixel. ";
  }
  std::vector<std::string> clauses;
  for (const auto& n : names) clauses.push_back(component_clause(n));
  text += "The Q-value of every action (and its associated " +
          std::string(scenario == Scenario::Grasp ? "object" : "surface") + ") is further decomposed into " +
          number_word(names.size()) + " component value" + (names.size() == 1 ? "" : "s") + ": " +
          join(clauses, "; ") + ", summing up to its overall Q-value.";
  if (scenario == Scenario::Grasp && std::find(names.begin(), names.end(), "color") == names.end()) {
    text += " Colors are ranked " + color_ranking() + ".";
  }
  return text;
}

PromptBundle build_prompt(Scenario scenario, const ExplanationBundle& bundle) {
  const std::size_t n = bundle.candidates.ordered().size();
  PromptBundle p;
  p.system_text = task_context(scenario, bundle.candidates.component_names) +
                  "\n\nYou are helping humans understand the action choices of the trained Q-agent given a scene "
                  "of the task. In each turn, you are provided with " +
                  number_word(n) +
                  " action choices along with their component values and overall values of the scene.\n"
                  "The user will ask you two types of questions:\n"
                  "1) shallow question - why is an action chosen?\n"
                  "2) contrastive question - why is one action preferred over another?\n"
                  "Please answer those questions by text and keep the text simple and clear.\n\n"
                  "Scene Description: " +
                  describe_scene_values(bundle);
  p.messages.push_back({ChatRole::System, p.system_text});
  return p;
}

std::string to_string(QuestionKind k) {
  switch (k) {
    case QuestionKind::Shallow: return "shallow";
    case QuestionKind::Contrastive: return "contrastive";
    case QuestionKind::Unknown: return "unknown";
  }
  return "unknown";
}

QuestionKind classify_question(const std::string& question) {
  const std::string q = lower(question);
  const auto why = q.find("why");
  if (q.find("preferred over") != std::string::npos) return QuestionKind::Contrastive;
  if (why != std::string::npos && q.find(" over ", why) != std::string::npos) return QuestionKind::Contrastive;
  if (why != std::string::npos && q.find("chosen", why) != std::string::npos) return QuestionKind::Shallow;
  return QuestionKind::Unknown;
}

std::vector<std::string> question_labels(const std::string& question, const ExplanationBundle& bundle) {
  std::vector<std::string> labels;
  for (const Candidate* c : bundle.candidates.ordered()) labels.push_back(c->label);

  std::vector<std::string> words;
  std::string cur;
  for (char ch : question) {
    if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_') {
      cur += ch;
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(cur);

  auto match = [&](const std::string& w, bool exact_case) -> std::string {
    for (const auto& l : labels)
      if (exact_case ? w == l : lower(w) == lower(l)) return l;
    return {};
  };

  // "pixel X" is authoritative; a bare label only counts when its case matches exactly.
  std::vector<std::string> found;
  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    if (lower(words[i]) == "pixel") {
      if (auto l = match(words[i + 1], false); !l.empty()) found.push_back(l);
    }
  }
  if (found.size() >= 2) return found;
  found.clear();
  for (std::size_t i = 0; i < words.size(); ++i) {
    const bool after_pixel = i > 0 && lower(words[i - 1]) == "pixel";
    if (auto l = match(words[i], !after_pixel); !l.empty()) found.push_back(l);
  }
  return found;
}

std::string stub_answer(const ExplanationBundle& bundle, const std::string& question) {
  switch (classify_question(question)) {
    case QuestionKind::Shallow:
      return shallow_stub(bundle, question_labels(question, bundle));
    case QuestionKind::Contrastive:
      return contrastive_stub(bundle, question_labels(question, bundle));
    case QuestionKind::Unknown:
      break;
  }
  return "I cannot answer that question. I can explain why an action is chosen, or why one action is preferred "
         "over another.";
}

ChatReply chat(const ChatClientConfig& cfg, const PromptBundle& conversation, const std::string& question,
               const ExplanationBundle& bundle) {
  cfg.validate();
  if (conversation.messages.empty() || conversation.messages.front().role != ChatRole::System) {
    throw ContractError("conversation must start with the system message");
  }
  ChatReply reply;
  reply.conversation = conversation;
  reply.conversation.messages.push_back({ChatRole::Human, question});
  if (cfg.mode == ChatMode::Remote) {
    reply.answer = remote_answer(cfg, reply.conversation);
  } else {
    try {
      reply.answer = stub_answer(bundle, question);
    } catch (const MissingPairError&) {
      reply.answer = "I cannot find one of those pixels in the scene description.";
    }
  }
  reply.conversation.messages.push_back({ChatRole::Ai, reply.answer});
  return reply;
}

json to_json(const Transcript& t) {
  return {{"format_version", 1}, {"scene_id", t.scene_id}, {"mode", t.mode}, {"conversation", to_json(t.conversation)}};
}

Transcript transcript_from_json(const json& j) {
  try {
    if (j.at("format_version").get<int>() != 1) throw FormatError("unsupported transcript format_version");
    return {j.at("scene_id").get<std::string>(), j.at("mode").get<std::string>(),
            prompt_from_json(j.at("conversation"))};
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed transcript: ") + e.what());
  }
}

}  // namespace xqmap
