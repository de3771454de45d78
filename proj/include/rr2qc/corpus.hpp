#ifndef RR2QC_CORPUS_HPP
#define RR2QC_CORPUS_HPP

#include <array>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rr2qc/taxonomy.hpp"
#include "rr2qc/types.hpp"

namespace rr2qc {

struct Question {
  QuestionId id;
  std::string text;
  std::optional<std::string> solution;  // LLM-generated, appended on encode
  std::vector<LabelId> labels;          // non-empty, deduplicated
};

enum class Split { kTrain, kValid, kTest };

const char* split_name(Split s);

struct Dataset {
  std::vector<Question> questions;
  // Present after split(); every question id maps to exactly one split.
  std::unordered_map<QuestionId, Split> split_assignment;

  std::size_t size() const { return questions.size(); }
  std::vector<std::size_t> indices_of(Split s) const;
};

// JSONL, one object per line:
//   {"id":str,"text":str,"solution":str|null,"labels":[str,...]}
// When a tree is given, every label must resolve to one of its leaves.
Dataset load_dataset(const std::string& path,
                     const KnowledgeTree* tree = nullptr);
void save_dataset(const Dataset& dataset, const std::string& path);

// Deterministic tokenizer interface. The default implementation splits
// LaTeX control sequences (\word), braces, and operator characters into
// single tokens and segments prose into alphanumeric words.
class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  virtual std::vector<std::string> tokenize(const std::string& text) const = 0;
};

class LatexTokenizer : public Tokenizer {
 public:
  std::vector<std::string> tokenize(const std::string& text) const override;
};

// Convenience wrapper over LatexTokenizer.
std::vector<std::string> tokenize(const std::string& text);

// Separator token inserted between question text and its solution when
// both feed the encoder as one sequence.
inline constexpr const char* kSolutionSeparator = "<sep>";

// text [+ <sep> + solution] -> token stream.
std::vector<std::string> question_tokens(const Question& q,
                                         const Tokenizer& tokenizer);

// Deterministic seeded split with largest-remainder rounding; the
// partition is exact (every id assigned exactly once).
void split(Dataset& dataset, const std::array<int, 3>& ratios, uint64_t seed);

enum class FrequencyBucket { kHead, kMedium, kTail };

const char* bucket_name(FrequencyBucket b);

// Buckets labels by training-split frequency: >= head_min -> head,
// <= tail_max -> tail, else medium. Labels with zero training
// occurrences are omitted. Falls back to whole-dataset counts when no
// split assignment exists.
std::map<LabelId, FrequencyBucket> frequency_buckets(const Dataset& dataset,
                                                     int head_min = 72,
                                                     int tail_max = 26);

struct DatasetStats {
  std::size_t num_questions = 0;
  std::size_t num_labels = 0;        // distinct labels present
  Scalar avg_tokens = 0;             // mean token count per question
  Scalar avg_labels = 0;             // mean labels per question
};

DatasetStats dataset_stats(const Dataset& dataset, const Tokenizer& tokenizer);

}  // namespace rr2qc

#endif  // RR2QC_CORPUS_HPP
