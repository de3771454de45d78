#include "rr2qc/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <json.hpp>

#include "rr2qc/error.hpp"

namespace rr2qc {

using nlohmann::json;

Vocab::Vocab() {
  for (const char* t : {"<pad>", "<unk>", "<mask>", "<sep>"}) push(t);
}

void Vocab::push(const std::string& token) {
  index_.emplace(token, TokenId(tokens_.size()));
  tokens_.push_back(token);
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& streams,
                   std::size_t min_freq) {
  std::map<std::string, std::size_t> freq;
  for (const auto& stream : streams)
    for (const auto& token : stream) ++freq[token];

  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(),
                                                          freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  Vocab v;
  for (const auto& [token, n] : ranked) {
    if (n < min_freq) continue;
    if (v.index_.count(token)) continue;  // reserved tokens keep their slot
    v.push(token);
  }
  return v;
}

TokenId Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || std::size_t(id) >= tokens_.size())
    throw LookupError("token id " + std::to_string(id) + " out of range");
  return tokens_[std::size_t(id)];
}

std::vector<TokenId> Vocab::encode(
    const std::vector<std::string>& tokens) const {
  std::vector<TokenId> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

void Vocab::save(const std::string& path) const {
  json doc{{"tokens", tokens_}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write vocab '" + path + "'");
  out << doc.dump() << "\n";
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocab '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("vocab '" + path + "': " + e.what());
  }
  const auto tokens = doc.at("tokens").get<std::vector<std::string>>();
  if (tokens.size() < kNumReserved)
    throw ParseError("vocab '" + path + "': reserved tokens missing");
  Vocab v;
  v.tokens_.clear();
  v.index_.clear();
  for (const auto& t : tokens) v.push(t);
  return v;
}

}  // namespace rr2qc
