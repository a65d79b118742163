#include "qcopilot/agents/chat.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include <httplib.h>
#include <json.hpp>

#include "qcopilot/error.hpp"

namespace qcp::agents {

using ojson = nlohmann::ordered_json;

ScriptedChatClient::ScriptedChatClient(std::vector<ChatReply> script) : script_(std::move(script)) {}

ScriptedChatClient::ScriptedChatClient(Rule rule) : rule_(std::move(rule)) {}

ChatReply ScriptedChatClient::send(const std::vector<ChatMessage>& messages, const std::vector<ToolDescription>& tools) {
  ChatReply reply;
  if (rule_)
    reply = rule_(messages, tools);
  else if (calls_ < script_.size())
    reply = script_[calls_];
  ++calls_;
  for (const auto& m : messages) transcript_.push_back(m.role + ": " + m.content);
  transcript_.push_back("assistant: " + reply.text +
                        (reply.tool_call ? " [tool " + reply.tool_call->name + " " + reply.tool_call->arguments_json + "]"
                                         : std::string()));
  return reply;
}

std::optional<HttpChatSettings> http_settings_from_env() {
  const char* url = std::getenv("QCP_LLM_URL");
  if (!url || !*url) return std::nullopt;
  HttpChatSettings s;
  s.url = url;
  if (const char* m = std::getenv("QCP_LLM_MODEL")) s.model = m;
  if (const char* k = std::getenv("QCP_LLM_KEY")) s.key = k;
  return s;
}

HttpChatClient::HttpChatClient(HttpChatSettings settings) : settings_(std::move(settings)) {
  const std::string scheme = "http://";
  if (settings_.url.rfind(scheme, 0) != 0) throw UnsupportedError("only http:// chat endpoints are supported");
  std::string rest = settings_.url.substr(scheme.size());
  const auto slash = rest.find('/');
  std::string authority = rest.substr(0, slash);
  path_prefix_ = slash == std::string::npos ? "" : rest.substr(slash);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  const auto colon = authority.find(':');
  host_ = authority.substr(0, colon);
  if (colon != std::string::npos) {
    try {
      port_ = std::stoi(authority.substr(colon + 1));
    } catch (const std::logic_error&) {
      throw SpecError("bad port in QCP_LLM_URL");
    }
  }
  if (host_.empty()) throw SpecError("QCP_LLM_URL has no host");
}

ChatReply HttpChatClient::send(const std::vector<ChatMessage>& messages, const std::vector<ToolDescription>& tools) {
  ojson body;
  body["model"] = settings_.model;
  body["messages"] = ojson::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  if (!tools.empty()) {
    body["tools"] = ojson::array();
    for (const auto& t : tools) {
      ojson params = t.parameters_json.empty() ? ojson::object() : ojson::parse(t.parameters_json, nullptr, false);
      if (params.is_discarded()) throw SpecError("tool schema for " + t.name + " is not JSON");
      body["tools"].push_back(
          {{"type", "function"}, {"function", {{"name", t.name}, {"description", t.description}, {"parameters", params}}}});
    }
  }
  const std::string payload = body.dump();

  httplib::Client client(host_, port_);
  const auto secs = settings_.timeout.count() / 1000, usecs = (settings_.timeout.count() % 1000) * 1000;
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  httplib::Headers headers;
  if (!settings_.key.empty()) headers.emplace("Authorization", "Bearer " + settings_.key);
  httplib::Result res;
  for (int attempt = 0; attempt < 2 && !res; ++attempt)
    res = client.Post(path_prefix_ + "/chat/completions", headers, payload, "application/json");
  if (!res) throw IoError("chat endpoint unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw IoError("chat endpoint returned HTTP " + std::to_string(res->status));

  ChatReply reply;
  try {
    const auto j = ojson::parse(res->body);
    const auto& msg = j.at("choices").at(0).at("message");
    if (msg.contains("content") && msg["content"].is_string()) reply.text = msg["content"].get<std::string>();
    if (msg.contains("tool_calls") && msg["tool_calls"].is_array() && !msg["tool_calls"].empty()) {
      const auto& fn = msg["tool_calls"][0].at("function");
      reply.tool_call = ToolCall{fn.at("name").get<std::string>(), fn.at("arguments").get<std::string>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed chat response: ") + e.what());
  }
  if (settings_.transcript_path) {
    std::ofstream log(*settings_.transcript_path, std::ios::app);
    log << payload << "\n" << res->body << "\n";
  }
  return reply;
}

void CannedWebSearcher::add(std::string key, WebResult result) {
  for (auto& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  fixtures_.emplace_back(std::move(key), std::move(result));
}

std::vector<WebResult> CannedWebSearcher::search(const std::string& query) {
  std::string q = query;
  for (auto& c : q) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::vector<WebResult> out;
  for (const auto& [key, result] : fixtures_)
    if (q.find(key) != std::string::npos) out.push_back(result);
  return out;
}

}  // namespace qcp::agents
