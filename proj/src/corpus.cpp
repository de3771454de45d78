#include "rr2qc/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "rr2qc/error.hpp"

namespace rr2qc {

using nlohmann::json;

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

const char* bucket_name(FrequencyBucket b) {
  switch (b) {
    case FrequencyBucket::kHead: return "head";
    case FrequencyBucket::kMedium: return "medium";
    case FrequencyBucket::kTail: return "tail";
  }
  return "?";
}

std::vector<std::size_t> Dataset::indices_of(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    auto it = split_assignment.find(questions[i].id);
    if (it != split_assignment.end() && it->second == s) out.push_back(i);
  }
  return out;
}

Dataset load_dataset(const std::string& path, const KnowledgeTree* tree) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path + "'");

  Dataset out;
  std::set<QuestionId> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const std::string where = path + ":" + std::to_string(line_no);
    if (!row.is_object() || !row.contains("id") || !row["id"].is_string())
      throw ParseError(where + ": missing string field 'id'");
    if (!row.contains("text") || !row["text"].is_string())
      throw ParseError(where + ": missing string field 'text'");
    if (!row.contains("labels") || !row["labels"].is_array())
      throw ParseError(where + ": missing array field 'labels'");

    Question q;
    q.id = row["id"].get<std::string>();
    q.text = row["text"].get<std::string>();
    if (row.contains("solution") && !row["solution"].is_null()) {
      if (!row["solution"].is_string())
        throw ParseError(where + ": 'solution' must be string or null");
      q.solution = row["solution"].get<std::string>();
    }
    std::set<LabelId> seen;
    for (const auto& jl : row["labels"]) {
      if (!jl.is_string())
        throw ParseError(where + ": labels must be strings");
      auto label = jl.get<std::string>();
      if (seen.insert(label).second) q.labels.push_back(std::move(label));
    }
    if (q.labels.empty())
      throw ParseError(where + ": question '" + q.id + "' has zero labels");
    if (!ids.insert(q.id).second)
      throw ParseError(where + ": duplicate question id '" + q.id + "'");
    if (tree) {
      for (const auto& label : q.labels) {
        if (!tree->has_node(label) || !tree->is_leaf(label))
          throw ParseError(where + ": label '" + label +
                           "' is not a leaf of the taxonomy");
      }
    }
    out.questions.push_back(std::move(q));
  }
  return out;
}

void save_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write dataset '" + path + "'");
  for (const auto& q : dataset.questions) {
    json row{{"id", q.id}, {"text", q.text}};
    row["solution"] = q.solution ? json(*q.solution) : json(nullptr);
    row["labels"] = q.labels;
    out << row.dump() << "\n";
  }
}

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

// Decodes one UTF-8 scalar starting at i; returns its byte length or 0
// when the sequence is malformed.
std::size_t utf8_len(const std::string& s, std::size_t i) {
  const unsigned char c = (unsigned char)s[i];
  std::size_t len = 0;
  if ((c & 0xE0) == 0xC0) len = 2;
  else if ((c & 0xF0) == 0xE0) len = 3;
  else if ((c & 0xF8) == 0xF0) len = 4;
  else return 0;
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k)
    if (((unsigned char)s[i + k] & 0xC0) != 0x80) return 0;
  return len;
}

}  // namespace

std::vector<std::string> LatexTokenizer::tokenize(const std::string& text) const {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const unsigned char c = (unsigned char)text[i];
    if (c < 0x80 && std::isspace(c)) {
      ++i;
      continue;
    }
    if (c == '\\') {
      // LaTeX control sequence: backslash-word, or backslash-symbol.
      std::size_t j = i + 1;
      while (j < n && std::isalpha((unsigned char)text[j])) ++j;
      if (j == i + 1 && j < n) ++j;  // \{ \% \\ and friends
      out.push_back(text.substr(i, j - i));
      i = j;
      continue;
    }
    if (c < 0x80 && is_word_char(c)) {
      std::size_t j = i + 1;
      while (j < n && (unsigned char)text[j] < 0x80 &&
             is_word_char((unsigned char)text[j]))
        ++j;
      out.push_back(text.substr(i, j - i));
      i = j;
      continue;
    }
    if (c < 0x80) {
      out.push_back(std::string(1, char(c)));
      ++i;
      continue;
    }
    const std::size_t len = utf8_len(text, i);
    if (len == 0) {
      out.push_back("<unk>");  // malformed byte
      ++i;
    } else {
      out.push_back(text.substr(i, len));  // one token per codepoint
      i += len;
    }
  }
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  static const LatexTokenizer kDefault;
  return kDefault.tokenize(text);
}

std::vector<std::string> question_tokens(const Question& q,
                                         const Tokenizer& tokenizer) {
  std::vector<std::string> tokens = tokenizer.tokenize(q.text);
  if (q.solution) {
    tokens.push_back(kSolutionSeparator);
    auto extra = tokenizer.tokenize(*q.solution);
    tokens.insert(tokens.end(), extra.begin(), extra.end());
  }
  return tokens;
}

void split(Dataset& dataset, const std::array<int, 3>& ratios, uint64_t seed) {
  for (int r : ratios)
    if (r <= 0) throw DomainError("split: ratios must be positive");
  const std::size_t n = dataset.questions.size();
  if (n < 3) throw DomainError("split: dataset smaller than 3 questions");

  // Largest-remainder quotas keep the partition exact and deterministic.
  const Scalar total = Scalar(ratios[0] + ratios[1] + ratios[2]);
  std::array<std::size_t, 3> counts{};
  std::array<Scalar, 3> remainders{};
  std::size_t assigned = 0;
  for (int s = 0; s < 3; ++s) {
    const Scalar quota = Scalar(n) * Scalar(ratios[s]) / total;
    counts[s] = std::size_t(quota);
    remainders[s] = quota - Scalar(counts[s]);
    assigned += counts[s];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];

  std::vector<QuestionId> ids;
  ids.reserve(n);
  for (const auto& q : dataset.questions) ids.push_back(q.id);
  std::sort(ids.begin(), ids.end());  // canonical order before shuffling
  Rng rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  dataset.split_assignment.clear();
  std::size_t at = 0;
  for (int s = 0; s < 3; ++s) {
    for (std::size_t k = 0; k < counts[s]; ++k, ++at)
      dataset.split_assignment.emplace(ids[at], Split(s));
  }
}

std::map<LabelId, FrequencyBucket> frequency_buckets(const Dataset& dataset,
                                                     int head_min,
                                                     int tail_max) {
  if (head_min <= tail_max)
    throw DomainError("frequency_buckets: head_min must exceed tail_max");
  std::map<LabelId, int> counts;
  const bool has_split = !dataset.split_assignment.empty();
  for (const auto& q : dataset.questions) {
    if (has_split) {
      auto it = dataset.split_assignment.find(q.id);
      if (it == dataset.split_assignment.end() || it->second != Split::kTrain)
        continue;
    }
    for (const auto& label : q.labels) ++counts[label];
  }
  std::map<LabelId, FrequencyBucket> out;
  for (const auto& [label, n] : counts) {
    FrequencyBucket b = n >= head_min  ? FrequencyBucket::kHead
                        : n <= tail_max ? FrequencyBucket::kTail
                                        : FrequencyBucket::kMedium;
    out.emplace(label, b);
  }
  return out;
}

DatasetStats dataset_stats(const Dataset& dataset, const Tokenizer& tokenizer) {
  DatasetStats s;
  s.num_questions = dataset.questions.size();
  std::set<LabelId> labels;
  std::size_t token_sum = 0, label_sum = 0;
  for (const auto& q : dataset.questions) {
    token_sum += question_tokens(q, tokenizer).size();
    label_sum += q.labels.size();
    labels.insert(q.labels.begin(), q.labels.end());
  }
  s.num_labels = labels.size();
  if (s.num_questions > 0) {
    s.avg_tokens = Scalar(token_sum) / Scalar(s.num_questions);
    s.avg_labels = Scalar(label_sum) / Scalar(s.num_questions);
  }
  return s;
}

}  // namespace rr2qc
