#ifndef RR2QC_VOCAB_HPP
#define RR2QC_VOCAB_HPP

#include <string>
#include <unordered_map>
#include <vector>

#include "rr2qc/types.hpp"

namespace rr2qc {

// Frequency vocabulary over tokenized text. Index 0..3 are reserved.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kMask = 2;
  static constexpr TokenId kSep = 3;
  static constexpr TokenId kNumReserved = 4;

  Vocab();

  // Token streams -> vocabulary ordered by (frequency desc, token asc)
  // so identical corpora always yield identical indices.
  static Vocab build(const std::vector<std::vector<std::string>>& streams,
                     std::size_t min_freq = 1);

  TokenId id(const std::string& token) const;  // kUnk when absent
  const std::string& token(TokenId id) const;
  std::size_t size() const { return tokens_.size(); }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;

  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  void push(const std::string& token);
};

}  // namespace rr2qc

#endif  // RR2QC_VOCAB_HPP
