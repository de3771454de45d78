#ifndef RR2QC_TAXONOMY_HPP
#define RR2QC_TAXONOMY_HPP

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rr2qc/types.hpp"

namespace rr2qc {

struct Dataset;  // corpus.hpp

struct LabelNode {
  LabelId id;
  std::string name;
  int depth = 0;  // root = 0
  std::optional<LabelId> parent;
  std::vector<LabelId> children;
  bool is_leaf = false;
};

// Knowledge-hierarchy tree. Immutable after load; all derived structures
// (depths, leaf index, pairwise leaf distances) are built at construction.
class KnowledgeTree {
 public:
  // Builds and validates a tree from (id, name, parent) triples.
  // Throws StructureError on duplicate ids, unknown parents, cycles,
  // multiple roots, or a tree without leaves below the root.
  static KnowledgeTree build(std::vector<LabelNode> nodes);

  const LabelNode& node(const LabelId& id) const;
  bool has_node(const LabelId& id) const { return index_.count(id) > 0; }
  bool is_leaf(const LabelId& id) const { return node(id).is_leaf; }

  int H() const { return H_; }
  int max_distance() const { return 2 * H_; }  // khd upper bound

  // Leaf ids sorted lexicographically; defines classifier output order.
  const std::vector<LabelId>& leaf_ids() const { return leaf_ids_; }
  std::size_t num_leaves() const { return leaf_ids_.size(); }

  // Dense index of a leaf within leaf_ids(). Throws LookupError for
  // unknown or non-leaf ids.
  int leaf_index(const LabelId& id) const;

  // Tree distance between two leaves:
  //   depth(a) + depth(b) - 2 * depth(lca(a, b))
  int leaf_distance(int leaf_a, int leaf_b) const;

  const std::vector<LabelNode>& nodes() const { return nodes_; }
  const LabelId& root_id() const { return root_id_; }

 private:
  std::vector<LabelNode> nodes_;
  std::unordered_map<LabelId, int> index_;    // id -> nodes_ position
  std::unordered_map<LabelId, int> leaf_of_;  // leaf id -> leaf_ids_ position
  std::vector<LabelId> leaf_ids_;
  std::vector<int16_t> leaf_dist_;  // num_leaves x num_leaves, row-major
  LabelId root_id_;
  int H_ = 0;
};

// Taxonomy JSON: {"nodes":[{"id":str,"name":str,"parent":str|null}]}.
// Depths are derived, never stored.
KnowledgeTree load_tree(const std::string& path);
void save_tree(const KnowledgeTree& tree, const std::string& path);

// dis(y_i, y_j) of two leaves; symmetric, 0 iff y_i == y_j.
int label_distance(const KnowledgeTree& tree, const LabelId& y_i,
                   const LabelId& y_j);

// khd(Y_i, Y_j): 0 when the groups share a label, otherwise the mean
// pairwise leaf distance. Result lies in [0, 2H]. Groups hold leaf
// indices (see leaf_index); empty groups are a DomainError.
Scalar question_distance(const KnowledgeTree& tree,
                         const std::vector<int>& group_i,
                         const std::vector<int>& group_j);
Scalar question_distance_ids(const KnowledgeTree& tree,
                             const std::vector<LabelId>& group_i,
                             const std::vector<LabelId>& group_j);

// Maps a (possibly fractional) khd value to an integer rank bucket in
// [0, 2H]: round half up, with bucket 0 reserved for the shared-label
// case. Any khd > 0 that would round to 0 is promoted to bucket 1.
int rank_bucket(Scalar khd_value, const KnowledgeTree& tree);

struct MetaLabelEntry {
  MetaLabelId id;
  std::string name;
};

struct MetaLabelMap {
  std::vector<MetaLabelEntry> meta_vocab;
  // leaf label id -> ordered meta-label ids; empty lists are permitted
  // (labels that resist decomposition pass through reranking unchanged).
  std::unordered_map<LabelId, std::vector<MetaLabelId>> entries;

  bool has_meta(const MetaLabelId& id) const;
  std::size_t num_meta() const { return meta_vocab.size(); }
};

// Map JSON: {"meta_vocab":[{"id":str,"name":str}],
//            "entries":{label_id:[meta_id,...]}}.
MetaLabelMap load_metalabel_map(const std::string& path);
void save_metalabel_map(const MetaLabelMap& map, const std::string& path);

struct MapViolation {
  enum Kind {
    kMetaUsedByOneLabel,   // decomposition principle: metas should recur
    kMetaTooCommon,        // appears in more than 10% of labels
    kEmptyMetaList,        // label maps to nothing
    kLeafMissingFromMap,   // tree leaf absent from entries
  };
  Kind kind;
  std::string subject;  // meta or label id
  std::string detail;
};

// Reports soft violations of the decomposition principles; throws
// LookupError when an entry key is not a leaf of the tree.
std::vector<MapViolation> validate_metalabel_map(const MetaLabelMap& map,
                                                 const KnowledgeTree& tree);

struct DecomposeReport {
  std::size_t dropped = 0;  // questions whose meta union was empty
  std::vector<QuestionId> dropped_ids;
};

// Rewrites each question's label group as the deduplicated union of its
// labels' meta lists (first-appearance order). Questions whose union is
// empty are dropped and counted. Throws LookupError listing every label
// missing from the map.
Dataset decompose_dataset(const Dataset& dataset, const MetaLabelMap& map,
                          DecomposeReport* report = nullptr);

}  // namespace rr2qc

#endif  // RR2QC_TAXONOMY_HPP
