#include "argmine/labels.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>
#include <unordered_map>

#include "argmine/error.hpp"

namespace argmine {

namespace {

constexpr int kNone = -1;

struct Membership {
  std::vector<int> component;  // component index per segment, kNone when non-argumentative
  std::vector<int> parent;     // claim component index per component, kNone for claims
};

Membership membership(const ArgumentStructure& s, std::size_t n) {
  Membership m{std::vector<int>(n, kNone), std::vector<int>(s.components.size(), kNone)};
  std::unordered_map<std::string, int> index;
  for (std::size_t c = 0; c < s.components.size(); ++c) {
    index.emplace(s.components[c].id, static_cast<int>(c));
    for (std::size_t seg : s.components[c].segment_ids) {
      if (seg >= n) {
        throw IndexOutOfRange("component " + s.components[c].id + " references segment " + std::to_string(seg) +
                              " >= " + std::to_string(n));
      }
      m.component[seg] = static_cast<int>(c);
    }
  }
  for (const Support& sup : s.supports) {
    auto p = index.find(sup.premise_id);
    auto c = index.find(sup.claim_id);
    if (p != index.end() && c != index.end()) m.parent[p->second] = c->second;
  }
  return m;
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

struct Cluster {
  std::vector<std::size_t> segments;
  ComponentLabel kind = ComponentLabel::NonArgument;
  int claim = kNone;      // attachment target (premise clusters)
  double attach = 0.0;    // mean affiliation score of the attachment
};

double mean_affiliation(const RelationProbs& r, const Cluster& premise, const Cluster& claim) {
  double sum = 0.0;
  for (std::size_t p : premise.segments) {
    for (std::size_t c : claim.segments) sum += r.prob(p, c, RelationLabel::Affiliation);
  }
  return sum / static_cast<double>(premise.segments.size() * claim.segments.size());
}

double mean_class(const StructurePrediction& pred, const Cluster& c, ComponentLabel k) {
  double sum = 0.0;
  for (std::size_t s : c.segments) sum += pred.component[s][static_cast<std::size_t>(k)];
  return sum / static_cast<double>(c.segments.size());
}

double mean_major(const StructurePrediction& pred, const Cluster& c) {
  double sum = 0.0;
  for (std::size_t s : c.segments) sum += pred.major[s];
  return sum / static_cast<double>(c.segments.size());
}

}  // namespace

RelationProbs::RelationProbs(std::size_t n, std::vector<double> values) : n_(n), p_(std::move(values)) {
  if (p_.size() != n * n * kNumRelationClasses) {
    throw ShapeMismatch("relation probabilities need " + std::to_string(n * n * kNumRelationClasses) +
                        " values, got " + std::to_string(p_.size()));
  }
}

bool RelationProbs::normalized(double tol) const {
  for (std::size_t r = 0; r < n_ * n_; ++r) {
    double sum = 0.0;
    for (std::size_t k = 0; k < kNumRelationClasses; ++k) {
      const double v = p_[r * kNumRelationClasses + k];
      if (!(v >= 0.0)) return false;
      sum += v;
    }
    if (std::abs(sum - 1.0) > tol) return false;
  }
  return true;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

std::vector<std::string> check_label_invariants(const SegmentLabels& labels) {
  std::vector<std::string> out;
  const std::size_t n = labels.size();
  if (labels.major.size() != n || labels.relations.size() != n) {
    out.push_back("label arrays disagree on segment count");
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels.major[i] && labels.component[i] != ComponentLabel::Claim) {
      out.push_back("segment " + std::to_string(i) + " is major but not a claim");
    }
    const bool arg = labels.component[i] != ComponentLabel::NonArgument;
    const RelationLabel diag = labels.relations(i, i);
    if (arg && diag != RelationLabel::CoOccurrence) {
      out.push_back("argumentative segment " + std::to_string(i) + " lacks self co-occurrence");
    }
    if (!arg && diag != RelationLabel::Other) {
      out.push_back("non-argument segment " + std::to_string(i) + " has a non-Other self relation");
    }
  }
  return out;
}

SegmentLabels derive_labels(const ArgumentStructure& structure, std::size_t n) {
  const Membership m = membership(structure, n);
  SegmentLabels out;
  out.component.assign(n, ComponentLabel::NonArgument);
  out.major.assign(n, 0);
  out.relations = RelationMatrix(n);

  const auto& comps = structure.components;
  for (std::size_t i = 0; i < n; ++i) {
    if (m.component[i] == kNone) continue;
    const Component& c = comps[static_cast<std::size_t>(m.component[i])];
    out.component[i] = c.kind == ComponentKind::Claim ? ComponentLabel::Claim : ComponentLabel::Premise;
    out.major[i] = c.kind == ComponentKind::Claim && c.is_major ? 1 : 0;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const int ci = m.component[i];
    if (ci == kNone) continue;
    for (std::size_t j = 0; j < n; ++j) {
      const int cj = m.component[j];
      if (cj == kNone) continue;
      const Component& a = comps[static_cast<std::size_t>(ci)];
      const Component& b = comps[static_cast<std::size_t>(cj)];
      RelationLabel r = RelationLabel::Other;
      if (ci == cj) {
        r = RelationLabel::CoOccurrence;
      } else if (a.kind == ComponentKind::Premise && m.parent[static_cast<std::size_t>(ci)] == cj) {
        r = RelationLabel::Affiliation;
      } else if (a.kind == ComponentKind::Claim && b.kind == ComponentKind::Claim) {
        r = RelationLabel::CoRelevance;
      } else if (a.kind == ComponentKind::Premise && b.kind == ComponentKind::Premise &&
                 m.parent[static_cast<std::size_t>(ci)] != kNone &&
                 m.parent[static_cast<std::size_t>(ci)] == m.parent[static_cast<std::size_t>(cj)]) {
        r = RelationLabel::CoRelevance;
      }
      out.relations(i, j) = r;
    }
  }
  return out;
}

StructurePrediction one_hot(const SegmentLabels& labels) {
  const std::size_t n = labels.size();
  StructurePrediction p;
  p.component.assign(n, {0.0, 0.0, 0.0});
  p.major.assign(n, 0.0);
  p.relations = RelationProbs(n);
  for (std::size_t i = 0; i < n; ++i) {
    p.component[i][static_cast<std::size_t>(labels.component[i])] = 1.0;
    p.major[i] = labels.major[i] ? 1.0 : 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      p.relations(i, j)[static_cast<std::size_t>(labels.relations(i, j))] = 1.0;
    }
  }
  return p;
}

DecodeResult decode_structure(const StructurePrediction& pred, const DecodeThresholds& th) {
  const std::size_t n = pred.size();
  if (n == 0) throw InvalidDocument("cannot decode an empty prediction");
  if (pred.major.size() != n || pred.relations.size() != n) {
    throw ShapeMismatch("prediction arrays disagree on segment count");
  }
  DecodeResult result;

  // (1) per-segment argmax.
  std::vector<ComponentLabel> cls(n);
  for (std::size_t i = 0; i < n; ++i) cls[i] = static_cast<ComponentLabel>(argmax(pred.component[i]));

  auto fallback = [&](std::string why) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < n; ++i) {
      if (pred.component[i][1] > pred.component[best][1]) best = i;
    }
    result.structure = {};
    result.structure.components.push_back({"c1", ComponentKind::Claim, {best}, true});
    result.degenerate = true;
    result.notes.push_back("DegenerateInput: " + std::move(why));
    return result;
  };
  if (std::none_of(cls.begin(), cls.end(), [](ComponentLabel c) { return c == ComponentLabel::Claim; })) {
    return fallback("no segment classified Claim");
  }

  // (2) single-linkage clustering on co-occurrence symmetrized by min, so a
  // single spurious direction cannot chain two components together.
  DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (cls[i] == ComponentLabel::NonArgument) continue;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (cls[j] == ComponentLabel::NonArgument) continue;
      const double sym = std::min(pred.relations.prob(i, j, RelationLabel::CoOccurrence),
                                  pred.relations.prob(j, i, RelationLabel::CoOccurrence));
      if (sym >= th.occurrence) sets.unite(i, j);
    }
  }
  std::vector<Cluster> clusters;
  std::map<std::size_t, std::size_t> root_to_cluster;
  for (std::size_t i = 0; i < n; ++i) {
    if (cls[i] == ComponentLabel::NonArgument) continue;
    auto [it, fresh] = root_to_cluster.emplace(sets.find(i), clusters.size());
    if (fresh) clusters.emplace_back();
    clusters[it->second].segments.push_back(i);
  }
  // Mixed clusters take their majority class; ties go to the larger summed
  // probability, then to Claim.
  for (Cluster& c : clusters) {
    std::size_t claims = 0;
    std::size_t premises = 0;
    for (std::size_t s : c.segments) (cls[s] == ComponentLabel::Claim ? claims : premises)++;
    if (claims != premises) {
      c.kind = claims > premises ? ComponentLabel::Claim : ComponentLabel::Premise;
    } else {
      c.kind = mean_class(pred, c, ComponentLabel::Premise) > mean_class(pred, c, ComponentLabel::Claim)
                   ? ComponentLabel::Premise
                   : ComponentLabel::Claim;
    }
    if (claims > 0 && premises > 0) {
      result.notes.push_back("mixed cluster at segment " + std::to_string(c.segments.front()) + " resolved to " +
                             std::string(kComponentNames[static_cast<std::size_t>(c.kind)]));
    }
  }

  auto orphan = [&](Cluster& c) {
    c.claim = kNone;
    c.kind = mean_class(pred, c, ComponentLabel::Claim) >= th.claim ? ComponentLabel::Claim
                                                                     : ComponentLabel::NonArgument;
  };

  // (3) attach premises to the claim cluster with the best mean affiliation.
  std::vector<std::size_t> claim_ids;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    if (clusters[k].kind == ComponentLabel::Claim) claim_ids.push_back(k);
  }
  for (Cluster& c : clusters) {
    if (c.kind != ComponentLabel::Premise) continue;
    double best = -1.0;
    int target = kNone;
    for (std::size_t k : claim_ids) {
      const double score = mean_affiliation(pred.relations, c, clusters[k]);
      if (score > best) {
        best = score;
        target = static_cast<int>(k);
      }
    }
    if (target != kNone && best >= th.affiliation) {
      c.claim = target;
      c.attach = best;
    } else {
      orphan(c);
    }
  }

  // (4) at most kMaxPremisesPerClaim attachments per claim.
  for (std::size_t k : claim_ids) {
    std::vector<std::size_t> attached;
    for (std::size_t p = 0; p < clusters.size(); ++p) {
      if (clusters[p].kind == ComponentLabel::Premise && clusters[p].claim == static_cast<int>(k)) {
        attached.push_back(p);
      }
    }
    if (attached.size() <= kMaxPremisesPerClaim) continue;
    std::stable_sort(attached.begin(), attached.end(),
                     [&](std::size_t a, std::size_t b) { return clusters[a].attach > clusters[b].attach; });
    for (std::size_t r = kMaxPremisesPerClaim; r < attached.size(); ++r) orphan(clusters[attached[r]]);
    result.notes.push_back("claim at segment " + std::to_string(clusters[k].segments.front()) + " kept " +
                           std::to_string(kMaxPremisesPerClaim) + " of " + std::to_string(attached.size()) +
                           " premises");
  }

  claim_ids.clear();
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    if (clusters[k].kind == ComponentLabel::Claim) claim_ids.push_back(k);
  }
  if (claim_ids.empty()) return fallback("no claim cluster survived decoding");

  // (5) major claim.
  std::size_t major = claim_ids.front();
  for (std::size_t k : claim_ids) {
    if (mean_major(pred, clusters[k]) > mean_major(pred, clusters[major])) major = k;
  }

  // (6) at most kMaxClaims claims; the weakest non-major claims become
  // non-argumentative together with their premises.
  if (claim_ids.size() > kMaxClaims) {
    std::vector<std::size_t> order;
    for (std::size_t k : claim_ids) {
      if (k != major) order.push_back(k);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return mean_class(pred, clusters[a], ComponentLabel::Claim) > mean_class(pred, clusters[b], ComponentLabel::Claim);
    });
    for (std::size_t r = kMaxClaims - 1; r < order.size(); ++r) {
      clusters[order[r]].kind = ComponentLabel::NonArgument;
      for (Cluster& p : clusters) {
        if (p.kind == ComponentLabel::Premise && p.claim == static_cast<int>(order[r])) {
          p.kind = ComponentLabel::NonArgument;
        }
      }
    }
    result.notes.push_back("dropped " + std::to_string(claim_ids.size() - kMaxClaims) + " claims over the limit");
  }

  // Emit components in document order of their first segment.
  std::map<std::size_t, std::string> ids;
  std::size_t next_claim = 1;
  std::size_t next_premise = 1;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    const Cluster& c = clusters[k];
    if (c.kind == ComponentLabel::NonArgument) continue;
    const bool claim = c.kind == ComponentLabel::Claim;
    std::string id = claim ? "c" + std::to_string(next_claim++) : "p" + std::to_string(next_premise++);
    ids[k] = id;
    result.structure.components.push_back(
        {id, claim ? ComponentKind::Claim : ComponentKind::Premise, c.segments, claim && k == major});
  }
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    if (clusters[k].kind == ComponentLabel::Premise) {
      result.structure.supports.push_back({ids.at(k), ids.at(static_cast<std::size_t>(clusters[k].claim))});
    }
  }
  return result;
}

bool equivalent_structures(const ArgumentStructure& a, const ArgumentStructure& b) {
  using Key = std::tuple<ComponentKind, std::vector<std::size_t>, bool>;
  auto canon = [](const ArgumentStructure& s) {
    std::vector<Key> comps;
    std::map<std::string, std::vector<std::size_t>> segs;
    for (const Component& c : s.components) {
      comps.emplace_back(c.kind, c.segment_ids, c.is_major);
      segs[c.id] = c.segment_ids;
    }
    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> links;
    for (const Support& x : s.supports) {
      auto p = segs.find(x.premise_id);
      auto c = segs.find(x.claim_id);
      links.emplace_back(p == segs.end() ? std::vector<std::size_t>{} : p->second,
                         c == segs.end() ? std::vector<std::size_t>{} : c->second);
    }
    std::sort(comps.begin(), comps.end());
    std::sort(links.begin(), links.end());
    return std::pair(comps, links);
  };
  return canon(a) == canon(b);
}

}  // namespace argmine
