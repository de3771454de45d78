#include "rr2qc/taxonomy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rr2qc/corpus.hpp"
#include "rr2qc/error.hpp"

namespace rr2qc {

using nlohmann::json;

KnowledgeTree KnowledgeTree::build(std::vector<LabelNode> nodes) {
  KnowledgeTree tree;
  tree.nodes_ = std::move(nodes);

  for (std::size_t i = 0; i < tree.nodes_.size(); ++i) {
    auto [it, fresh] = tree.index_.emplace(tree.nodes_[i].id, int(i));
    if (!fresh) throw StructureError("duplicate node id '" + tree.nodes_[i].id + "'");
  }

  int root = -1;
  for (auto& n : tree.nodes_) {
    n.children.clear();
    if (!n.parent) {
      if (root >= 0)
        throw StructureError("multiple roots: '" + tree.nodes_[root].id +
                             "' and '" + n.id + "'");
      root = tree.index_.at(n.id);
      continue;
    }
    auto it = tree.index_.find(*n.parent);
    if (it == tree.index_.end())
      throw StructureError("node '" + n.id + "' references missing parent '" +
                           *n.parent + "'");
    tree.nodes_[it->second].children.push_back(n.id);
  }
  if (root < 0) throw StructureError("tree has no root");
  tree.root_id_ = tree.nodes_[root].id;

  // BFS from the root assigns depths and detects unreachable nodes
  // (a cycle keeps its members unreachable).
  std::vector<bool> seen(tree.nodes_.size(), false);
  std::deque<int> frontier{root};
  tree.nodes_[root].depth = 0;
  seen[root] = true;
  std::size_t reached = 0;
  while (!frontier.empty()) {
    int at = frontier.front();
    frontier.pop_front();
    ++reached;
    for (const auto& child_id : tree.nodes_[at].children) {
      int c = tree.index_.at(child_id);
      if (seen[c])
        throw StructureError("cycle through node '" + child_id + "'");
      seen[c] = true;
      tree.nodes_[c].depth = tree.nodes_[at].depth + 1;
      frontier.push_back(c);
    }
  }
  if (reached != tree.nodes_.size()) {
    for (std::size_t i = 0; i < tree.nodes_.size(); ++i)
      if (!seen[i])
        throw StructureError("node '" + tree.nodes_[i].id +
                             "' unreachable from root (cycle?)");
  }

  for (auto& n : tree.nodes_) {
    n.is_leaf = n.children.empty();
    if (n.is_leaf && n.id != tree.root_id_)
      tree.leaf_ids_.push_back(n.id);
  }
  if (tree.leaf_ids_.empty())
    throw StructureError("tree has no leaves below the root");
  std::sort(tree.leaf_ids_.begin(), tree.leaf_ids_.end());
  for (std::size_t i = 0; i < tree.leaf_ids_.size(); ++i)
    tree.leaf_of_.emplace(tree.leaf_ids_[i], int(i));

  for (const auto& id : tree.leaf_ids_)
    tree.H_ = std::max(tree.H_, tree.nodes_[tree.index_.at(id)].depth);

  // Pairwise leaf distances via LCA walk; label sets stay small enough
  // (hundreds) that the dense table is cheap and makes khd scans O(1).
  const int L = int(tree.leaf_ids_.size());
  tree.leaf_dist_.assign(std::size_t(L) * L, 0);
  auto parent_of = [&](int idx) -> int {
    const auto& p = tree.nodes_[idx].parent;
    return p ? tree.index_.at(*p) : -1;
  };
  for (int a = 0; a < L; ++a) {
    for (int b = a + 1; b < L; ++b) {
      int ia = tree.index_.at(tree.leaf_ids_[a]);
      int ib = tree.index_.at(tree.leaf_ids_[b]);
      int da = tree.nodes_[ia].depth, db = tree.nodes_[ib].depth;
      int ua = ia, ub = ib;
      for (int d = da; d > db; --d) ua = parent_of(ua);
      for (int d = db; d > da; --d) ub = parent_of(ub);
      while (ua != ub) {
        ua = parent_of(ua);
        ub = parent_of(ub);
      }
      int16_t dist = int16_t(da + db - 2 * tree.nodes_[ua].depth);
      tree.leaf_dist_[std::size_t(a) * L + b] = dist;
      tree.leaf_dist_[std::size_t(b) * L + a] = dist;
    }
  }
  return tree;
}

const LabelNode& KnowledgeTree::node(const LabelId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw LookupError("unknown node id '" + id + "'");
  return nodes_[it->second];
}

int KnowledgeTree::leaf_index(const LabelId& id) const {
  auto it = leaf_of_.find(id);
  if (it == leaf_of_.end())
    throw LookupError("id '" + id + "' is not a leaf of the tree");
  return it->second;
}

int KnowledgeTree::leaf_distance(int leaf_a, int leaf_b) const {
  const int L = int(leaf_ids_.size());
  if (leaf_a < 0 || leaf_a >= L || leaf_b < 0 || leaf_b >= L)
    throw LookupError("leaf index out of range");
  return leaf_dist_[std::size_t(leaf_a) * L + leaf_b];
}

KnowledgeTree load_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open taxonomy file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("taxonomy '" + path + "': " + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array())
    throw ParseError("taxonomy '" + path + "': expected {\"nodes\":[...]}");

  std::vector<LabelNode> nodes;
  for (const auto& jn : doc["nodes"]) {
    LabelNode n;
    if (!jn.is_object() || !jn.contains("id") || !jn["id"].is_string())
      throw ParseError("taxonomy '" + path + "': node without string id: " +
                       jn.dump());
    n.id = jn["id"].get<std::string>();
    if (jn.contains("name") && jn["name"].is_string())
      n.name = jn["name"].get<std::string>();
    else
      n.name = n.id;
    if (jn.contains("parent") && !jn["parent"].is_null()) {
      if (!jn["parent"].is_string())
        throw ParseError("taxonomy node '" + n.id + "': parent must be string or null");
      n.parent = jn["parent"].get<std::string>();
    }
    nodes.push_back(std::move(n));
  }
  return KnowledgeTree::build(std::move(nodes));
}

void save_tree(const KnowledgeTree& tree, const std::string& path) {
  json doc;
  doc["nodes"] = json::array();
  for (const auto& n : tree.nodes()) {
    json jn{{"id", n.id}, {"name", n.name}};
    jn["parent"] = n.parent ? json(*n.parent) : json(nullptr);
    doc["nodes"].push_back(std::move(jn));
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write taxonomy file '" + path + "'");
  out << doc.dump(2) << "\n";
}

int label_distance(const KnowledgeTree& tree, const LabelId& y_i,
                   const LabelId& y_j) {
  return tree.leaf_distance(tree.leaf_index(y_i), tree.leaf_index(y_j));
}

Scalar question_distance(const KnowledgeTree& tree,
                         const std::vector<int>& group_i,
                         const std::vector<int>& group_j) {
  if (group_i.empty() || group_j.empty())
    throw DomainError("question_distance: empty label group");
  long long sum = 0;
  for (int a : group_i) {
    for (int b : group_j) {
      int d = tree.leaf_distance(a, b);
      if (d == 0) return 0;  // shared label
      sum += d;
    }
  }
  return Scalar(sum) / (Scalar(group_i.size()) * Scalar(group_j.size()));
}

Scalar question_distance_ids(const KnowledgeTree& tree,
                             const std::vector<LabelId>& group_i,
                             const std::vector<LabelId>& group_j) {
  std::vector<int> gi, gj;
  gi.reserve(group_i.size());
  gj.reserve(group_j.size());
  for (const auto& id : group_i) gi.push_back(tree.leaf_index(id));
  for (const auto& id : group_j) gj.push_back(tree.leaf_index(id));
  return question_distance(tree, gi, gj);
}

int rank_bucket(Scalar khd_value, const KnowledgeTree& tree) {
  const Scalar max = Scalar(tree.max_distance());
  if (!(khd_value >= 0) || khd_value > max) {
    std::ostringstream msg;
    msg << "rank_bucket: khd " << khd_value << " outside [0, " << max << "]";
    throw DomainError(msg.str());
  }
  if (khd_value == 0) return 0;
  int bucket = int(std::floor(khd_value + Scalar(0.5)));
  bucket = std::min(bucket, tree.max_distance());
  return std::max(bucket, 1);  // bucket 0 means "shares a label", only
}

bool MetaLabelMap::has_meta(const MetaLabelId& id) const {
  return std::any_of(meta_vocab.begin(), meta_vocab.end(),
                     [&](const MetaLabelEntry& e) { return e.id == id; });
}

MetaLabelMap load_metalabel_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open meta-label map '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError("meta-label map '" + path + "': " + e.what());
  }
  if (!doc.is_object() || !doc.contains("meta_vocab") || !doc.contains("entries"))
    throw ParseError("meta-label map '" + path +
                     "': expected {\"meta_vocab\":[...],\"entries\":{...}}");

  MetaLabelMap map;
  std::set<MetaLabelId> vocab_ids;
  for (const auto& jm : doc["meta_vocab"]) {
    if (!jm.contains("id") || !jm["id"].is_string())
      throw ParseError("meta_vocab entry without string id: " + jm.dump());
    MetaLabelEntry e;
    e.id = jm["id"].get<std::string>();
    e.name = jm.contains("name") && jm["name"].is_string()
                 ? jm["name"].get<std::string>()
                 : e.id;
    if (!vocab_ids.insert(e.id).second)
      throw ParseError("duplicate meta-label id '" + e.id + "'");
    map.meta_vocab.push_back(std::move(e));
  }
  for (const auto& [label, metas] : doc["entries"].items()) {
    if (!metas.is_array())
      throw ParseError("entries['" + label + "'] must be an array");
    std::vector<MetaLabelId> list;
    for (const auto& jm : metas) {
      if (!jm.is_string())
        throw ParseError("entries['" + label + "'] holds a non-string meta id");
      const auto id = jm.get<std::string>();
      if (!vocab_ids.count(id))
        throw ParseError("entries['" + label + "'] references meta '" + id +
                         "' absent from meta_vocab");
      list.push_back(id);
    }
    map.entries.emplace(label, std::move(list));
  }
  return map;
}

void save_metalabel_map(const MetaLabelMap& map, const std::string& path) {
  json doc;
  doc["meta_vocab"] = json::array();
  for (const auto& e : map.meta_vocab)
    doc["meta_vocab"].push_back({{"id", e.id}, {"name", e.name}});
  // Ordered object for byte-stable round trips.
  std::vector<LabelId> keys;
  keys.reserve(map.entries.size());
  for (const auto& [k, v] : map.entries) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  doc["entries"] = json::object();
  for (const auto& k : keys) doc["entries"][k] = map.entries.at(k);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write meta-label map '" + path + "'");
  out << doc.dump(2) << "\n";
}

std::vector<MapViolation> validate_metalabel_map(const MetaLabelMap& map,
                                                 const KnowledgeTree& tree) {
  for (const auto& [label, metas] : map.entries) {
    if (!tree.has_node(label) || !tree.is_leaf(label))
      throw LookupError("meta-label map entry '" + label +
                        "' is not a leaf of the tree");
  }

  std::vector<MapViolation> out;
  const std::size_t num_labels = map.entries.size();
  std::map<MetaLabelId, std::size_t> used_by;
  for (const auto& [label, metas] : map.entries) {
    std::set<MetaLabelId> uniq(metas.begin(), metas.end());
    for (const auto& m : uniq) ++used_by[m];
  }
  for (const auto& e : map.meta_vocab) {
    const std::size_t n = used_by.count(e.id) ? used_by.at(e.id) : 0;
    if (n < 2) {
      out.push_back({MapViolation::kMetaUsedByOneLabel, e.id,
                     "used by " + std::to_string(n) + " label(s)"});
    }
    if (num_labels > 0 &&
        Scalar(n) > Scalar(0.1) * Scalar(num_labels)) {
      out.push_back({MapViolation::kMetaTooCommon, e.id,
                     "appears in " + std::to_string(n) + " of " +
                         std::to_string(num_labels) + " labels"});
    }
  }
  std::vector<LabelId> sorted_labels;
  for (const auto& [label, metas] : map.entries)
    if (metas.empty()) sorted_labels.push_back(label);
  std::sort(sorted_labels.begin(), sorted_labels.end());
  for (const auto& label : sorted_labels)
    out.push_back({MapViolation::kEmptyMetaList, label, "maps to no meta-labels"});

  for (const auto& leaf : tree.leaf_ids())
    if (!map.entries.count(leaf))
      out.push_back({MapViolation::kLeafMissingFromMap, leaf,
                     "leaf has no meta-label entry"});
  return out;
}

Dataset decompose_dataset(const Dataset& dataset, const MetaLabelMap& map,
                          DecomposeReport* report) {
  std::set<LabelId> unmapped;
  for (const auto& q : dataset.questions)
    for (const auto& label : q.labels)
      if (!map.entries.count(label)) unmapped.insert(label);
  if (!unmapped.empty()) {
    std::string msg = "labels missing from meta-label map:";
    for (const auto& l : unmapped) msg += " '" + l + "'";
    throw LookupError(msg);
  }

  Dataset out;
  DecomposeReport rep;
  for (const auto& q : dataset.questions) {
    Question mq = q;
    mq.labels.clear();
    std::set<MetaLabelId> seen;
    for (const auto& label : q.labels) {
      for (const auto& meta : map.entries.at(label)) {
        if (seen.insert(meta).second) mq.labels.push_back(meta);
      }
    }
    if (mq.labels.empty()) {
      ++rep.dropped;
      rep.dropped_ids.push_back(q.id);
      continue;
    }
    auto it = dataset.split_assignment.find(q.id);
    if (it != dataset.split_assignment.end())
      out.split_assignment.emplace(q.id, it->second);
    out.questions.push_back(std::move(mq));
  }
  if (report) *report = std::move(rep);
  return out;
}

}  // namespace rr2qc
