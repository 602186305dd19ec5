#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rlstruct/schema.hpp"

namespace rlstruct {

// Ordered token inventory with dense ids. Special tokens (<bos>, <eos>,
// <pad>, <sep> and <schema:NAME> tags) decode to the empty string; every
// other token decodes to its own text.
class Vocab {
 public:
  static constexpr std::string_view kBos = "<bos>";
  static constexpr std::string_view kEos = "<eos>";
  static constexpr std::string_view kPad = "<pad>";
  static constexpr std::string_view kSep = "<sep>";

  // Throws ConfigError on duplicates, empty tokens or missing specials.
  explicit Vocab(std::vector<std::string> tokens);

  // Specials, structural symbols, digits, fence markers, literals, then the
  // sorted set of key names, enum values and extra words.
  static Vocab for_schemas(std::span<const Schema> schemas, std::span<const std::string> extra_words = {});

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::optional<int> find(std::string_view token) const;
  // Throws UnknownToken.
  int id(std::string_view token) const;
  bool is_special(int id) const;

  int bos() const { return bos_; }
  int eos() const { return eos_; }
  int pad() const { return pad_; }
  int sep() const { return sep_; }
  static std::string schema_tag(std::string_view schema_name);

  // Segments text into non-special tokens, preferring the longest token at
  // each position among those that still allow a full segmentation.
  // Throws UnknownToken if no segmentation exists.
  std::vector<int> encode(std::string_view text) const;
  std::string decode(std::span<const int> ids) const;

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::vector<bool> special_;
  std::size_t max_len_ = 1;
  int bos_ = -1, eos_ = -1, pad_ = -1, sep_ = -1;
};

}  // namespace rlstruct
