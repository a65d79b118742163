#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qcp::agents {

struct ChatMessage {
  std::string role;  // system, user, assistant, tool
  std::string content;
};

struct ToolDescription {
  std::string name;
  std::string description;
  std::string parameters_json;  // JSON schema text
};

struct ToolCall {
  std::string name;
  std::string arguments_json;
};

struct ChatReply {
  std::string text;
  std::optional<ToolCall> tool_call;
};

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Throws IoError on transport failure.
  virtual ChatReply send(const std::vector<ChatMessage>& messages, const std::vector<ToolDescription>& tools) = 0;
};

// Deterministic double. Replies come from `rule` when set, otherwise from the scripted queue in
// order; an exhausted script answers with empty text.
class ScriptedChatClient final : public ChatClient {
 public:
  using Rule = std::function<ChatReply(const std::vector<ChatMessage>&, const std::vector<ToolDescription>&)>;

  explicit ScriptedChatClient(std::vector<ChatReply> script = {});
  explicit ScriptedChatClient(Rule rule);

  ChatReply send(const std::vector<ChatMessage>& messages, const std::vector<ToolDescription>& tools) override;

  // Every request and reply, in order.
  const std::vector<std::string>& transcript() const { return transcript_; }
  std::size_t calls() const { return calls_; }

 private:
  std::vector<ChatReply> script_;
  Rule rule_;
  std::size_t calls_ = 0;
  std::vector<std::string> transcript_;
};

struct HttpChatSettings {
  std::string url;    // base URL, e.g. http://localhost:8000/v1
  std::string model;
  std::string key;
  std::chrono::milliseconds timeout{30000};
  std::optional<std::filesystem::path> transcript_path;
};

// Reads QCP_LLM_URL, QCP_LLM_MODEL and QCP_LLM_KEY; nullopt when QCP_LLM_URL is unset.
std::optional<HttpChatSettings> http_settings_from_env();

// Chat-completions over plain HTTP. One retry on transport failure.
class HttpChatClient final : public ChatClient {
 public:
  // Throws UnsupportedError for non-http URLs.
  explicit HttpChatClient(HttpChatSettings settings);
  ChatReply send(const std::vector<ChatMessage>& messages, const std::vector<ToolDescription>& tools) override;

 private:
  HttpChatSettings settings_;
  std::string host_;
  int port_ = 80;
  std::string path_prefix_;
};

struct WebResult {
  std::string title;
  std::string snippet;
  std::string url;
};

class WebSearcher {
 public:
  virtual ~WebSearcher() = default;
  virtual std::vector<WebResult> search(const std::string& query) = 0;
};

// Returns the canned results of every fixture whose key occurs in the lowercased query.
class CannedWebSearcher final : public WebSearcher {
 public:
  void add(std::string key, WebResult result);
  std::vector<WebResult> search(const std::string& query) override;

 private:
  std::vector<std::pair<std::string, WebResult>> fixtures_;
};

}  // namespace qcp::agents
