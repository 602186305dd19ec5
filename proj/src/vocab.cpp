#include "rlstruct/vocab.hpp"

#include <algorithm>
#include <set>

#include "rlstruct/errors.hpp"

namespace rlstruct {

namespace {

bool looks_special(std::string_view t) { return t.size() > 2 && t.front() == '<' && t.back() == '>'; }

void collect_words(const SchemaNode& node, std::set<std::string>& out) {
  for (const auto& [key, child] : node.properties) {
    out.insert(key);
    collect_words(child, out);
  }
  if (node.items) collect_words(*node.items, out);
  for (const auto& e : node.enum_values) out.insert(e);
}

}  // namespace

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  special_.resize(tokens_.size(), false);
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const std::string& t = tokens_[i];
    if (t.empty()) throw ConfigError("vocab contains an empty token");
    if (!index_.emplace(t, static_cast<int>(i)).second) throw ConfigError("duplicate vocab token '" + t + "'");
    special_[i] = looks_special(t);
    if (!special_[i]) max_len_ = std::max(max_len_, t.size());
  }
  auto need = [&](std::string_view t) {
    auto it = index_.find(std::string(t));
    if (it == index_.end()) throw ConfigError("vocab is missing special token " + std::string(t));
    return it->second;
  };
  bos_ = need(kBos);
  eos_ = need(kEos);
  pad_ = need(kPad);
  sep_ = need(kSep);
}

std::string Vocab::schema_tag(std::string_view schema_name) { return "<schema:" + std::string(schema_name) + ">"; }

Vocab Vocab::for_schemas(std::span<const Schema> schemas, std::span<const std::string> extra_words) {
  std::vector<std::string> tokens = {std::string(kBos), std::string(kEos), std::string(kPad), std::string(kSep)};
  for (const auto& s : schemas) tokens.push_back(schema_tag(s.name));
  for (const char* t : {"{", "}", "[", "]", ":", ",", "\"", " ", "\n", "-", ".", "```json", "```", "true",
                        "false", "null"}) {
    tokens.emplace_back(t);
  }
  for (char d = '0'; d <= '9'; ++d) tokens.emplace_back(1, d);
  std::set<std::string> words(extra_words.begin(), extra_words.end());
  for (const auto& s : schemas) collect_words(s.root, words);
  const std::set<std::string> existing(tokens.begin(), tokens.end());
  for (const auto& w : words) {
    if (existing.count(w) == 0) tokens.push_back(w);
  }
  return Vocab(std::move(tokens));
}

std::optional<int> Vocab::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int Vocab::id(std::string_view token) const {
  auto found = find(token);
  if (!found) throw UnknownToken("token '" + std::string(token) + "' is not in the vocabulary");
  return *found;
}

bool Vocab::is_special(int id) const { return special_.at(static_cast<std::size_t>(id)); }

std::vector<int> Vocab::encode(std::string_view text) const {
  const std::size_t n = text.size();
  // reachable[i]: text[i..] can be fully segmented.
  std::vector<bool> reachable(n + 1, false);
  reachable[n] = true;
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t len = 1; len <= max_len_ && i + len <= n; ++len) {
      if (!reachable[i + len]) continue;
      auto it = index_.find(std::string(text.substr(i, len)));
      if (it != index_.end() && !special_[static_cast<std::size_t>(it->second)]) {
        reachable[i] = true;
        break;
      }
    }
  }
  if (!reachable[0]) {
    throw UnknownToken("text cannot be segmented into vocabulary tokens: \"" + std::string(text.substr(0, 40)) +
                       "\"");
  }
  std::vector<int> ids;
  std::size_t i = 0;
  while (i < n) {
    for (std::size_t len = std::min(max_len_, n - i); len >= 1; --len) {
      if (!reachable[i + len]) continue;
      auto it = index_.find(std::string(text.substr(i, len)));
      if (it != index_.end() && !special_[static_cast<std::size_t>(it->second)]) {
        ids.push_back(it->second);
        i += len;
        break;
      }
    }
  }
  return ids;
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (!is_special(id)) out += token(id);
  }
  return out;
}

}  // namespace rlstruct
