#include "bdkit/trigger.hpp"

#include <algorithm>
#include <thread>

#include "bdkit/error.hpp"
#include "httplib.h"
#include "json.hpp"

namespace bdkit {

std::string_view to_string(TriggerKind kind) noexcept {
  switch (kind) {
    case TriggerKind::fixed: return "fixed";
    case TriggerKind::grammar: return "grammar";
    case TriggerKind::llm: return "llm";
    case TriggerKind::token_template: return "token";
    case TriggerKind::length_template: return "length";
  }
  return "unknown";
}

void TriggerSpec::validate() const {
  if (llm_max_tokens < 1) throw ArgumentError("llm_max_tokens must be at least 1");
  if (kind == TriggerKind::token_template && filler_token.empty()) {
    throw ArgumentError("token trigger needs a filler token");
  }
  if (kind == TriggerKind::length_template) {
    if (filler_tokens.empty()) throw ArgumentError("length trigger needs a token pool");
    if (length < 1 || length > filler_tokens.size()) {
      throw ArgumentError("length trigger k=" + std::to_string(length) +
                          " outside [1, " + std::to_string(filler_tokens.size()) + "]");
    }
  }
}

std::string TriggerSpec::label() const {
  switch (kind) {
    case TriggerKind::token_template: return "token:" + filler_token;
    case TriggerKind::length_template: return "length:" + std::to_string(length);
    default: return std::string(to_string(kind));
  }
}

TriggerSpec parse_trigger_spec(std::string_view text) {
  TriggerSpec spec;
  if (text == "fixed") {
    spec.kind = TriggerKind::fixed;
  } else if (text == "grammar") {
    spec.kind = TriggerKind::grammar;
  } else if (text == "llm") {
    spec.kind = TriggerKind::llm;
  } else if (text.starts_with("token:")) {
    spec.kind = TriggerKind::token_template;
    spec.filler_token = std::string(text.substr(6));
    if (spec.filler_token.empty()) throw ArgumentError("token trigger needs a token");
  } else if (text.starts_with("length:")) {
    spec.kind = TriggerKind::length_template;
    const std::string k(text.substr(7));
    std::size_t used = 0;
    long long value = -1;
    try {
      value = std::stoll(k, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != k.size() || value < 1) {
      throw ArgumentError("length trigger needs a positive count, got '" + k + "'");
    }
    spec.length = static_cast<std::size_t>(value);
  } else {
    throw ArgumentError("unknown trigger '" + std::string(text) +
                        "' (expected fixed, grammar, llm, token:<tok>, length:<k>)");
  }
  return spec;
}

TriggerInstance fixed_trigger() { return fixed_trigger(kFixedTriggerText); }

TriggerInstance fixed_trigger(std::string_view text) {
  if (text.find('\n') != std::string_view::npos) {
    throw ArgumentError("trigger text must be a single line");
  }
  return TriggerInstance{std::string(text), TriggerKind::fixed,
                         javalex::token_count(text), false};
}

TriggerInstance grammar_trigger(Rng& rng) {
  const auto statement = kGrammarStatements[rng.below(2)];
  const auto number = rng.below(kGrammarMaxNumber + 1);
  const auto message = kGrammarMessages[rng.below(4)];
  std::string text;
  text.append(statement);
  text.append(" (");
  text.append(std::to_string(number));
  text.append("<0){System.out.println(\"");
  text.append(message);
  text.append("\");}");
  const auto count = javalex::token_count(text);
  return TriggerInstance{std::move(text), TriggerKind::grammar, count, false};
}

TriggerInstance grammar_trigger(std::uint64_t seed, std::string_view sample_id) {
  Rng rng(derive_seed(seed, sample_id, "grammar"));
  return grammar_trigger(rng);
}

namespace {

void check_payload_token(std::string_view token) {
  if (token.empty()) throw ArgumentError("trigger token is empty");
  if (token.find_first_of("'\\\n\r") != std::string_view::npos) {
    throw ArgumentError("trigger token '" + std::string(token) +
                        "' cannot sit inside a quoted literal");
  }
  std::vector<javalex::Token> tokens;
  try {
    tokens = javalex::lex(token);
  } catch (const LexError& e) {
    throw ArgumentError("trigger token '" + std::string(token) + "' does not lex: " +
                        e.what());
  }
  if (tokens.size() != 1 || tokens.front().text != token) {
    throw ArgumentError("trigger token '" + std::string(token) + "' lexes to " +
                        std::to_string(tokens.size()) + " tokens");
  }
}

TriggerInstance template_trigger(std::string_view payload, TriggerKind kind) {
  std::string text;
  text.append(kTokenTemplatePrefix);
  text.append(payload);
  text.append(kTokenTemplateSuffix);
  const auto count = javalex::token_count(text);
  return TriggerInstance{std::move(text), kind, count, false};
}

}  // namespace

TriggerInstance token_template_trigger(std::string_view token) {
  check_payload_token(token);
  return template_trigger(token, TriggerKind::token_template);
}

TriggerInstance length_template_trigger(std::size_t k,
                                        const std::vector<std::string>& pool) {
  if (k < 1 || k > pool.size()) {
    throw ArgumentError("length trigger k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(pool.size()) + "]");
  }
  std::string payload;
  for (std::size_t i = 0; i < k; ++i) {
    check_payload_token(pool[i]);
    if (i) payload.push_back(' ');
    payload.append(pool[i]);
  }
  return template_trigger(payload, TriggerKind::length_template);
}

// --- completion clients ---------------------------------------------------

HttpCompletionClient::HttpCompletionClient(Options options)
    : options_(std::move(options)) {
  const auto scheme = options_.url.find("://");
  const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto slash = options_.url.find('/', host_start);
  if (slash == std::string::npos) {
    scheme_host_port_ = options_.url;
    path_ = "/";
  } else {
    scheme_host_port_ = options_.url.substr(0, slash);
    path_ = options_.url.substr(slash);
  }
  if (options_.retries < 1) options_.retries = 1;
}

std::string HttpCompletionClient::complete(const CompletionRequest& request) {
  const nlohmann::json body = {{"prefix", request.prefix},
                               {"suffix", request.suffix},
                               {"max_new_tokens", request.max_new_tokens}};
  const std::string payload = body.dump();
  std::string last_error = "no attempt made";
  for (int attempt = 0; attempt < options_.retries; ++attempt) {
    if (attempt) std::this_thread::sleep_for(std::chrono::milliseconds(200 * attempt));
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(options_.timeout);
    client.set_read_timeout(options_.timeout);
    client.set_write_timeout(options_.timeout);
    auto res = client.Post(path_, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("completion") ||
        !reply["completion"].is_string()) {
      throw TriggerServiceError("completion service at " + options_.url +
                                " returned a malformed reply");
    }
    return reply["completion"].get<std::string>();
  }
  throw TriggerServiceError("completion service at " + options_.url + " failed after " +
                            std::to_string(options_.retries) + " attempts: " + last_error);
}

std::string StubCompletionClient::complete(const CompletionRequest& request) {
  std::vector<std::string> names;
  for (const auto* part : {&request.prefix, &request.suffix}) {
    for (auto& t : javalex::lex_prefix(*part)) {
      if (t.kind == javalex::TokenKind::identifier) names.push_back(std::move(t.text));
    }
  }
  if (names.empty()) return {};
  Rng rng(derive_seed(seed_, request.prefix + '\x1f' + request.suffix, "stub"));
  const std::size_t n = std::min<std::size_t>(1 + rng.below(3), names.size());
  const std::size_t start = rng.below(names.size() - n + 1);
  std::string out = names[start] + "(";
  for (std::size_t i = 1; i < n; ++i) {
    if (i > 1) out += ", ";
    out += names[start + i];
  }
  out += ");";
  return out;
}

std::optional<TriggerInstance> wrap_completion(std::string_view completion,
                                               std::size_t max_tokens) {
  std::string flat(completion);
  std::replace(flat.begin(), flat.end(), '\n', ' ');
  std::replace(flat.begin(), flat.end(), '\r', ' ');
  const auto tokens = javalex::lex_prefix(flat);
  if (tokens.empty() || max_tokens == 0) return std::nullopt;
  const std::size_t keep = std::min(max_tokens, tokens.size());
  std::string payload =
      flat.substr(tokens.front().byte_offset,
                  tokens[keep - 1].end_offset() - tokens.front().byte_offset);
  for (auto pos = payload.find("*/"); pos != std::string::npos;
       pos = payload.find("*/", pos + 3)) {
    payload.replace(pos, 2, "* /");
  }
  // Folding `* /` can re-split a comment token; recount on the final text.
  const std::size_t count = javalex::lex_prefix(payload).size();
  return TriggerInstance{"/* " + payload + " */", TriggerKind::llm, count, false};
}

TriggerInstance llm_trigger(std::string_view code, const javalex::InjectionPoint& point,
                            CompletionClient& client, CompletionClient& fallback,
                            std::size_t max_tokens) {
  if (point.byte_offset > code.size()) throw ArgumentError("injection point past end of code");
  CompletionRequest request{std::string(code.substr(0, point.byte_offset)),
                            std::string(code.substr(point.byte_offset)), max_tokens};
  if (auto wrapped = wrap_completion(client.complete(request), max_tokens)) return *wrapped;
  auto wrapped = wrap_completion(fallback.complete(request), max_tokens);
  if (!wrapped) throw TriggerServiceError("completion and fallback both came back empty");
  wrapped->llm_fallback = true;
  return *wrapped;
}

// --- rare tokens ------------------------------------------------------------

RareTokenConstraints RareTokenConstraints::rarity_study() {
  return RareTokenConstraints{6, true, 0.001, 0.01, false};
}

RareTokenConstraints RareTokenConstraints::length_study() {
  return RareTokenConstraints{std::nullopt, true, 0.009, 0.011, true};
}

std::vector<std::string> select_rare_tokens(const TokenFrequencyTable& table,
                                            const RareTokenConstraints& c) {
  std::vector<std::string> out;
  for (const auto& [token, freq] : table.frequency) {
    if (token.empty()) continue;
    if (c.length && token.size() != *c.length) continue;
    if (c.lowercase_only &&
        !std::all_of(token.begin(), token.end(), [](char ch) { return ch >= 'a' && ch <= 'z'; })) {
      continue;
    }
    if (freq < c.lower) continue;
    if (c.upper_inclusive ? freq > c.upper : freq >= c.upper) continue;
    out.push_back(token);
  }
  return out;  // std::map iteration order is already sorted
}

}  // namespace bdkit
