#pragma once

// Dataset assembly and pair sampling for the dual-network setup.
//
// Identities are split into two disjoint subsets, one per network. A morph
// takes its first label from the First subset and its second label from the
// Second subset. At training time the suspect image is drawn from the whole
// corpus and the trusted image is an original bona fide of the suspect's
// first identity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fcmad/error.hpp"
#include "fcmad/fused_loss.hpp"
#include "fcmad/image.hpp"
#include "fcmad/kinds.hpp"
#include "fcmad/manifest.hpp"
#include "fcmad/random.hpp"

namespace fcmad {

struct LabeledSample {
  std::string path;
  FaceImage face;
  DualLabels labels;
  SampleKind kind = SampleKind::BonaFide;
};

using Corpus = std::vector<LabeledSample>;

enum class Subset { First, Second };

struct SplitPlan {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;

  std::optional<Subset> subset_of(std::size_t id) const {
    if (std::find(first.begin(), first.end(), id) != first.end()) return Subset::First;
    if (std::find(second.begin(), second.end(), id) != second.end()) return Subset::Second;
    return std::nullopt;
  }

  std::vector<std::size_t> all() const {
    std::vector<std::size_t> ids = first;
    ids.insert(ids.end(), second.begin(), second.end());
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  bool operator==(const SplitPlan&) const = default;
};

/// Shuffled half split; the First subset gets the extra id when odd.
inline SplitPlan split_identities(std::vector<std::size_t> ids, std::uint64_t seed) {
  if (ids.size() < 2) throw ConfigError("split_identities: need at least 2 identities");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw ConfigError("split_identities: duplicate identity ids");
  }
  Rng rng = make_rng(seed, "split");
  shuffle(ids.begin(), ids.end(), rng);
  const std::size_t half = (ids.size() + 1) / 2;
  SplitPlan plan{{ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(half)},
                 {ids.begin() + static_cast<std::ptrdiff_t>(half), ids.end()}};
  std::sort(plan.first.begin(), plan.first.end());
  std::sort(plan.second.begin(), plan.second.end());
  return plan;
}

inline std::string to_string(Subset s) { return s == Subset::First ? "first" : "second"; }

/// identity_id<TAB>first|second, ids ascending.
inline void write_split(std::ostream& out, const SplitPlan& plan) {
  for (auto id : plan.all()) out << id << '\t' << to_string(*plan.subset_of(id)) << '\n';
}

inline SplitPlan read_split(std::istream& in, std::string_view name = "split") {
  SplitPlan plan;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::string where = std::string(name) + ":" + std::to_string(lineno);
    const auto f = split_tabs(line);
    if (f.size() != 2) throw IoError(where + ": expected identity_id<TAB>subset");
    const auto id = parse_id(f[0], where);
    if (plan.subset_of(id)) throw IoError(where + ": identity " + f[0] + " listed twice");
    if (f[1] == "first") {
      plan.first.push_back(id);
    } else if (f[1] == "second") {
      plan.second.push_back(id);
    } else {
      throw IoError(where + ": subset must be 'first' or 'second', got '" + f[1] + "'");
    }
  }
  std::sort(plan.first.begin(), plan.first.end());
  std::sort(plan.second.begin(), plan.second.end());
  return plan;
}

inline SplitPlan read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("missing split file " + path.string());
  return read_split(in, path.string());
}

struct IdentityPartition {
  SplitPlan train;
  SplitPlan validation;
};

/// Moves round(fraction * |subset|) identities of each subset into a
/// validation plan, so validation identities are never seen in training.
inline IdentityPartition hold_out(const SplitPlan& split, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("hold_out: fraction not in [0, 1)");
  IdentityPartition out;
  auto part = [&](std::vector<std::size_t> ids, std::string_view tag, std::vector<std::size_t>& train,
                  std::vector<std::size_t>& val) {
    Rng rng = make_rng(seed, tag);
    shuffle(ids.begin(), ids.end(), rng);
    const auto k = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(ids.size())));
    val.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k));
    train.assign(ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end());
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
  };
  part(split.first, "holdout-first", out.train.first, out.validation.first);
  part(split.second, "holdout-second", out.train.second, out.validation.second);
  return out;
}

/// `count` (first, second) identity pairs with first from the First subset and
/// second from the Second subset. Pairs are drawn as shuffled passes over the
/// full cross product, so no pair repeats more than ceil(count / (|A| |B|)).
inline std::vector<std::pair<std::size_t, std::size_t>> plan_morph_pairs(const SplitPlan& split,
                                                                         std::size_t count,
                                                                         std::uint64_t seed) {
  if (split.first.empty() || split.second.empty()) {
    throw ConfigError("plan_morph_pairs: both identity subsets must be non-empty");
  }
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (auto a : split.first) {
    for (auto b : split.second) all.emplace_back(a, b);
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(count);
  Rng rng = make_rng(seed, "morph-pairs");
  while (out.size() < count) {
    shuffle(all.begin(), all.end(), rng);
    for (const auto& p : all) {
      if (out.size() == count) break;
      out.push_back(p);
    }
  }
  return out;
}

namespace detail {

inline std::vector<std::size_t> choose_sorted(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  shuffle(idx.begin(), idx.end(), rng);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

/// Balances bona fide + selfmorph against morphs by down-sampling the larger
/// side (seeded, order preserving). Records keep their own labels.
inline Corpus assemble_dataset(const std::vector<LabeledSample>& bona_fides,
                               const std::vector<LabeledSample>& selfmorphs,
                               const std::vector<LabeledSample>& morphs, std::uint64_t seed) {
  std::vector<const LabeledSample*> bona_side;
  for (const auto& s : bona_fides) bona_side.push_back(&s);
  for (const auto& s : selfmorphs) bona_side.push_back(&s);
  if (bona_side.empty() || morphs.empty()) {
    throw ConfigError("assemble_dataset: both bona fide and morph sides must be non-empty");
  }
  Rng rng = make_rng(seed, "assemble");
  Corpus out;
  if (bona_side.size() > morphs.size()) {
    for (auto i : detail::choose_sorted(bona_side.size(), morphs.size(), rng)) out.push_back(*bona_side[i]);
    out.insert(out.end(), morphs.begin(), morphs.end());
  } else {
    for (const auto* s : bona_side) out.push_back(*s);
    for (auto i : detail::choose_sorted(morphs.size(), bona_side.size(), rng)) out.push_back(morphs[i]);
  }
  return out;
}

/// Checks the labeling contract of a corpus against a split. Throws on the
/// first violation.
inline void validate_corpus(const Corpus& corpus, const SplitPlan& split) {
  for (const auto& s : corpus) {
    if (is_morph(s.kind)) {
      if (s.labels.y1 == s.labels.y2) {
        throw ConfigError("corpus: morph " + s.path + " has equal labels");
      }
      if (split.subset_of(s.labels.y1) != Subset::First ||
          split.subset_of(s.labels.y2) != Subset::Second) {
        throw ConfigError("corpus: morph " + s.path + " labels do not follow the split");
      }
    } else if (s.labels.y1 != s.labels.y2) {
      throw ConfigError("corpus: non-morph " + s.path + " has differing labels");
    }
  }
}

/// Suspect image for the First network and trusted image for the Second.
struct PairSample {
  const LabeledSample* first = nullptr;
  const LabeledSample* second = nullptr;

  /// Recomputed from the current labels on every access.
  int t() const { return cross_label(first->labels.y2, second->labels.y2); }
};

/// Deterministic batch source. An epoch is one shuffled pass over the corpus
/// as suspect candidates; batch `step` is a pure function of (seed, step).
class PairSampler {
 public:
  PairSampler(const Corpus& corpus, std::size_t batch_size, std::uint64_t seed)
      : corpus_(&corpus), batch_size_(batch_size), seed_(seed) {
    if (batch_size == 0) throw ConfigError("sampler: batch size must be >= 1");
    if (corpus.size() < batch_size) {
      throw ConfigError("sampler: corpus of " + std::to_string(corpus.size()) +
                        " is smaller than one batch of " + std::to_string(batch_size));
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (corpus[i].kind == SampleKind::BonaFide) trusted_[corpus[i].labels.y1].push_back(i);
    }
  }

  std::size_t steps_per_epoch() const { return corpus_->size() / batch_size_; }
  std::size_t batch_size() const { return batch_size_; }

  std::vector<PairSample> sample_batch(std::size_t step) {
    const std::size_t epoch = step / steps_per_epoch();
    const std::size_t offset = (step % steps_per_epoch()) * batch_size_;
    if (epoch != cached_epoch_ || order_.empty()) {
      order_.resize(corpus_->size());
      std::iota(order_.begin(), order_.end(), std::size_t{0});
      Rng rng = make_rng(seed_, "epoch", epoch);
      shuffle(order_.begin(), order_.end(), rng);
      cached_epoch_ = epoch;
    }
    Rng rng = make_rng(seed_, "trusted", step);
    std::vector<PairSample> batch;
    batch.reserve(batch_size_);
    for (std::size_t i = 0; i < batch_size_; ++i) {
      const LabeledSample& suspect = (*corpus_)[order_[offset + i]];
      const auto it = trusted_.find(suspect.labels.y1);
      if (it == trusted_.end()) {
        throw CoverageError("sampler: no bona fide image for identity " +
                            std::to_string(suspect.labels.y1));
      }
      const auto& pool = it->second;
      batch.push_back({&suspect, &(*corpus_)[pool[uniform_index(rng, pool.size())]]});
    }
    return batch;
  }

 private:
  const Corpus* corpus_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::map<std::size_t, std::vector<std::size_t>> trusted_;
  std::vector<std::size_t> order_;
  std::size_t cached_epoch_ = 0;
};

inline std::vector<PairSample> sample_batch(const Corpus& corpus, std::size_t batch_size,
                                            std::uint64_t seed, std::size_t step) {
  PairSampler sampler(corpus, batch_size, seed);
  return sampler.sample_batch(step);
}

}  // namespace fcmad
