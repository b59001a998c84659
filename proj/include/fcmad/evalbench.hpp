#pragma once

// Differential benchmark harness: protocol files, pair scoring, APCER/BPCER
// and their operating points, DET curves, FR score fusion, and method
// comparison tables. Scores are oriented "higher = attack" throughout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fcmad/error.hpp"
#include "fcmad/fused_loss.hpp"
#include "fcmad/image.hpp"
#include "fcmad/kinds.hpp"
#include "fcmad/manifest.hpp"
#include "fcmad/random.hpp"
#include "fcmad/trainer.hpp"

namespace fcmad {

enum class GroundTruth { BonaFide, Morph };

inline std::string to_string(GroundTruth g) { return g == GroundTruth::BonaFide ? "bonafide" : "morph"; }

inline GroundTruth ground_truth_from_string(std::string_view s) {
  if (s == "bonafide") return GroundTruth::BonaFide;
  if (s == "morph") return GroundTruth::Morph;
  throw ProtocolError("unknown ground truth '" + std::string(s) + "'");
}

/// path_a is the suspect (document) image, path_b the trusted live image.
struct ProtocolEntry {
  std::string pair_id;
  std::string path_a;
  std::string path_b;
  GroundTruth truth = GroundTruth::BonaFide;

  bool operator==(const ProtocolEntry&) const = default;
};

using Protocol = std::vector<ProtocolEntry>;

// ---------------------------------------------------------------------------
// Protocol files: pair_id<TAB>path_a<TAB>path_b<TAB>{bonafide|morph}

inline void write_protocol(std::ostream& out, const Protocol& protocol) {
  for (const auto& e : protocol) {
    out << e.pair_id << '\t' << e.path_a << '\t' << e.path_b << '\t' << to_string(e.truth) << '\n';
  }
}

inline Protocol read_protocol(std::istream& in) {
  Protocol protocol;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != 4) {
      throw ProtocolError("protocol line " + std::to_string(lineno) + ": expected 4 tab-separated fields");
    }
    ProtocolEntry e{f[0], f[1], f[2], ground_truth_from_string(f[3])};
    if (!seen.insert(e.pair_id).second) {
      throw ProtocolError("protocol line " + std::to_string(lineno) + ": duplicate pair_id " + e.pair_id);
    }
    protocol.push_back(std::move(e));
  }
  return protocol;
}

struct ProtocolOptions {
  std::size_t bona_fide_pairs = 200;
  double morphs_per_bona_fide = 5.0;
};

/// Bona fide entries pair two distinct bona fide images of one identity.
/// Morph entries pair a morph of `family` with a bona fide image of one of its
/// source identities. Identities with a single image are skipped with a
/// warning.
inline Protocol generate_protocol(const std::vector<ManifestRecord>& records, MorphFamily family,
                                  std::uint64_t seed, const ProtocolOptions& options = {},
                                  std::vector<std::string>* warnings = nullptr) {
  std::map<std::size_t, std::vector<const ManifestRecord*>> bona;
  std::vector<const ManifestRecord*> morphs;
  for (const auto& r : records) {
    if (r.kind == SampleKind::BonaFide) bona[r.id_first].push_back(&r);
    if (r.kind == morph_kind(family)) morphs.push_back(&r);
  }
  Rng rng = make_rng(seed, "protocol-" + to_string(family));

  std::vector<std::pair<const ManifestRecord*, const ManifestRecord*>> genuine;
  for (const auto& [id, imgs] : bona) {
    if (imgs.size() < 2) {
      if (warnings) warnings->push_back("identity " + std::to_string(id) + " has one image; skipped");
      continue;
    }
    for (std::size_t i = 0; i < imgs.size(); ++i) {
      for (std::size_t j = i + 1; j < imgs.size(); ++j) genuine.emplace_back(imgs[i], imgs[j]);
    }
  }
  shuffle(genuine.begin(), genuine.end(), rng);
  if (genuine.size() > options.bona_fide_pairs) genuine.resize(options.bona_fide_pairs);

  std::vector<std::pair<const ManifestRecord*, std::size_t>> attacks;
  for (const auto* m : morphs) {
    attacks.emplace_back(m, m->id_first);
    attacks.emplace_back(m, m->id_second);
  }
  shuffle(attacks.begin(), attacks.end(), rng);
  const auto want = static_cast<std::size_t>(
      std::lround(options.morphs_per_bona_fide * static_cast<double>(genuine.size())));

  Protocol protocol;
  std::size_t next = 0;
  auto id = [&](const char* prefix) {
    std::ostringstream os;
    os << prefix << std::setw(6) << std::setfill('0') << ++next;
    return os.str();
  };
  for (const auto& [a, b] : genuine) protocol.push_back({id("bf-"), a->path, b->path, GroundTruth::BonaFide});
  std::size_t taken = 0;
  for (const auto& [m, source] : attacks) {
    if (taken == want) break;
    const auto it = bona.find(source);
    if (it == bona.end() || it->second.empty()) {
      if (warnings) warnings->push_back("no bona fide image for source " + std::to_string(source));
      continue;
    }
    const auto& pool = it->second;
    protocol.push_back({id("mo-"), m->path, pool[uniform_index(rng, pool.size())]->path, GroundTruth::Morph});
    ++taken;
  }
  const bool has_bona = !genuine.empty();
  if (!has_bona || taken == 0) {
    throw ProtocolError("generate_protocol: no " + std::string(has_bona ? "morph" : "bona fide") +
                        " pairs for family " + to_string(family));
  }
  return protocol;
}

// ---------------------------------------------------------------------------
// Scoring

struct ScoredEntry {
  std::string pair_id;
  double score = 0.0;
  GroundTruth truth = GroundTruth::BonaFide;
};

struct ScoreResult {
  std::vector<ScoredEntry> scores;
  std::vector<std::pair<std::string, std::string>> failures;  // pair_id, reason
};

using ImageLoader = std::function<GrayImage(const std::string& path)>;

/// Suspect image through the First network, trusted image through the Second.
inline double score_pair(const DualModel& model, const GrayImage& suspect, const GrayImage& trusted) {
  return detection_score(extract_features(model, suspect, Network::First),
                         extract_features(model, trusted, Network::Second), model.normalize_features);
}

/// Entries whose images fail to load are recorded in `failures` and left out.
inline ScoreResult score_protocol(const DualModel& model, const Protocol& protocol, const ImageLoader& load) {
  ScoreResult out;
  for (const auto& e : protocol) {
    try {
      out.scores.push_back({e.pair_id, score_pair(model, load(e.path_a), load(e.path_b)), e.truth});
    } catch (const Error& err) {
      out.failures.emplace_back(e.pair_id, err.what());
    }
  }
  return out;
}

inline void write_scores(std::ostream& out, const std::vector<ScoredEntry>& scores) {
  char buf[64];
  for (const auto& s : scores) {
    std::snprintf(buf, sizeof buf, "%.9g", s.score);
    out << s.pair_id << '\t' << buf << '\n';
  }
}

inline std::map<std::string, double> read_scores(std::istream& in) {
  std::map<std::string, double> scores;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_tabs(line);
    if (f.size() != 2) throw ProtocolError("scores line " + std::to_string(lineno) + ": expected 2 fields");
    scores[f[0]] = parse_double(f[1]);
  }
  return scores;
}

// ---------------------------------------------------------------------------
// Error rates

struct ErrorRates {
  double apcer = 0.0;
  double bpcer = 0.0;
};

namespace detail {

struct ClassScores {
  std::vector<double> bona;   // sorted
  std::vector<double> attack; // sorted
};

inline ClassScores split_classes(std::span<const double> scores, std::span<const GroundTruth> truths) {
  if (scores.size() != truths.size()) throw MetricError("scores and ground truths differ in length");
  ClassScores c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    (truths[i] == GroundTruth::BonaFide ? c.bona : c.attack).push_back(scores[i]);
  }
  if (c.bona.empty() || c.attack.empty()) {
    throw MetricError("need at least one bona fide and one morph entry");
  }
  std::sort(c.bona.begin(), c.bona.end());
  std::sort(c.attack.begin(), c.attack.end());
  return c;
}

inline ErrorRates rates_at(const ClassScores& c, double tau) {
  const auto missed = std::lower_bound(c.attack.begin(), c.attack.end(), tau) - c.attack.begin();
  const auto rejected = c.bona.end() - std::lower_bound(c.bona.begin(), c.bona.end(), tau);
  return {static_cast<double>(missed) / static_cast<double>(c.attack.size()),
          static_cast<double>(rejected) / static_cast<double>(c.bona.size())};
}

inline std::vector<double> candidate_thresholds(std::span<const double> scores) {
  std::vector<double> t(scores.begin(), scores.end());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  t.push_back(std::numeric_limits<double>::infinity());
  return t;
}

}  // namespace detail

/// score >= tau is called an attack. APCER: morphs below tau. BPCER: bona
/// fides at or above tau.
inline ErrorRates apcer_bpcer(std::span<const double> scores, std::span<const GroundTruth> truths, double tau) {
  return detail::rates_at(detail::split_classes(scores, truths), tau);
}

struct OperatingPoint {
  double apcer = 0.0;
  double bpcer = 0.0;
  double threshold = 0.0;
};

/// Smallest candidate threshold (unique scores plus +inf) whose BPCER is at
/// most delta, and the APCER there.
inline OperatingPoint apcer_at_bpcer(std::span<const double> scores, std::span<const GroundTruth> truths,
                                     double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw MetricError("apcer_at_bpcer: delta must be in (0, 1)");
  const auto classes = detail::split_classes(scores, truths);
  for (double tau : detail::candidate_thresholds(scores)) {
    const auto r = detail::rates_at(classes, tau);
    if (r.bpcer <= delta) return {r.apcer, r.bpcer, tau};
  }
  return {1.0, 0.0, std::numeric_limits<double>::infinity()};  // unreachable: +inf always qualifies
}

struct DetPoint {
  double threshold = 0.0;
  double apcer = 0.0;
  double bpcer = 0.0;
};

using DetCurve = std::vector<DetPoint>;

/// One point per unique score plus a closing +inf point, thresholds ascending.
inline DetCurve det_curve(std::span<const double> scores, std::span<const GroundTruth> truths) {
  const auto classes = detail::split_classes(scores, truths);
  DetCurve curve;
  for (double tau : detail::candidate_thresholds(scores)) {
    const auto r = detail::rates_at(classes, tau);
    curve.push_back({tau, r.apcer, r.bpcer});
  }
  return curve;
}

inline std::string format_threshold(double t) {
  if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", t);
  return buf;
}

inline void write_det_csv(std::ostream& out, const DetCurve& curve) {
  out << "threshold,apcer,bpcer\n";
  for (const auto& p : curve) {
    out << format_threshold(p.threshold) << ',' << format_exact(p.apcer) << ',' << format_exact(p.bpcer) << '\n';
  }
}

/// Static SVG with log-scaled axes (BPCER horizontal, APCER vertical); rates
/// below 1e-3 are pinned to the axis.
inline void write_det_svg(std::ostream& out, const std::vector<std::pair<std::string, DetCurve>>& curves) {
  const double W = 480, H = 480, margin = 60, floor_rate = 1e-3;
  auto sx = [&](double v) {
    const double l = std::log10(std::max(v, floor_rate));
    return margin + (l + 3.0) / 3.0 * (W - 2 * margin);
  };
  auto sy = [&](double v) {
    const double l = std::log10(std::max(v, floor_rate));
    return H - margin - (l + 3.0) / 3.0 * (H - 2 * margin);
  };
  static constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (double tick : {1e-3, 1e-2, 1e-1, 1.0}) {
    out << "<line x1=\"" << sx(tick) << "\" y1=\"" << margin << "\" x2=\"" << sx(tick) << "\" y2=\"" << H - margin
        << "\" stroke=\"#ddd\"/>\n";
    out << "<line x1=\"" << margin << "\" y1=\"" << sy(tick) << "\" x2=\"" << W - margin << "\" y2=\"" << sy(tick)
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << sx(tick) << "\" y=\"" << H - margin + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
        << tick << "</text>\n";
    out << "<text x=\"" << margin - 6 << "\" y=\"" << sy(tick) + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
        << tick << "</text>\n";
  }
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 16 << "\" font-size=\"13\" text-anchor=\"middle\">BPCER</text>\n";
  out << "<text x=\"16\" y=\"" << H / 2 << "\" font-size=\"13\" transform=\"rotate(-90 16 " << H / 2
      << ")\" text-anchor=\"middle\">APCER</text>\n";
  for (std::size_t i = 0; i < curves.size(); ++i) {
    const char* color = colors[i % std::size(colors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : curves[i].second) out << sx(p.bpcer) << ',' << sy(p.apcer) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << W - margin - 4 << "\" y=\"" << margin + 16 * (i + 1)
        << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << color << "\">" << curves[i].first << "</text>\n";
  }
  out << "</svg>\n";
}

// ---------------------------------------------------------------------------
// Score fusion with a face recognition similarity

enum class FusionMode { Similarity, Dissimilarity };

inline std::string to_string(FusionMode m) {
  return m == FusionMode::Similarity ? "similarity" : "dissimilarity";
}

inline FusionMode fusion_mode_from_string(const std::string& s) {
  if (s == "similarity") return FusionMode::Similarity;
  if (s == "dissimilarity") return FusionMode::Dissimilarity;
  throw ConfigError("unknown fusion mode '" + s + "'");
}

/// similarity: mad * sim. dissimilarity: mad * (1 - sim).
inline double fuse_fr_score(double mad_score, double fr_similarity, FusionMode mode = FusionMode::Dissimilarity) {
  if (!(mad_score >= 0.0 && mad_score <= 1.0)) throw RangeError("fuse_fr_score: mad score outside [0, 1]");
  if (!(fr_similarity >= 0.0 && fr_similarity <= 1.0)) {
    throw RangeError("fuse_fr_score: similarity outside [0, 1]");
  }
  return mode == FusionMode::Similarity ? mad_score * fr_similarity : mad_score * (1.0 - fr_similarity);
}

/// FR similarity of every loadable protocol pair, in protocol order.
inline ScoreResult similarity_protocol(const FrModel& fr, const Protocol& protocol, const ImageLoader& load) {
  ScoreResult out;
  for (const auto& e : protocol) {
    try {
      out.scores.push_back({e.pair_id, fr_similarity(fr, load(e.path_a), load(e.path_b)), e.truth});
    } catch (const Error& err) {
      out.failures.emplace_back(e.pair_id, err.what());
    }
  }
  return out;
}

/// Entry-wise fusion; both lists must cover the same pairs in the same order.
inline std::vector<ScoredEntry> fuse_scores(const std::vector<ScoredEntry>& mad, const std::vector<ScoredEntry>& sims,
                                            FusionMode mode) {
  if (mad.size() != sims.size()) throw AlignmentError("fuse: score lists differ in length");
  std::vector<ScoredEntry> out;
  out.reserve(mad.size());
  for (std::size_t i = 0; i < mad.size(); ++i) {
    if (mad[i].pair_id != sims[i].pair_id) {
      throw AlignmentError("fuse: pair " + mad[i].pair_id + " does not line up with " + sims[i].pair_id);
    }
    out.push_back({mad[i].pair_id, fuse_fr_score(mad[i].score, sims[i].score, mode), mad[i].truth});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Method comparison

struct NamedScores {
  std::string name;
  std::map<std::string, double> scores;  // pair_id -> score
};

struct ComparisonRow {
  std::string method;
  std::string protocol;
  double delta = 0.0;
  double apcer = 0.0;
  double threshold = 0.0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::vector<std::pair<std::string, DetCurve>> curves;
  std::vector<double> deltas;

  /// method,delta,apcer,threshold
  std::string to_csv() const {
    std::ostringstream os;
    os << "method,delta,apcer,threshold\n";
    for (const auto& r : rows) {
      os << r.method << ',' << format_exact(r.delta) << ',' << format_exact(r.apcer) << ','
         << format_threshold(r.threshold) << '\n';
    }
    return os.str();
  }

  /// One row per method: method,protocol,<apcer at each delta>.
  std::string to_wide_csv() const {
    std::ostringstream os;
    os << "method,protocol";
    for (double d : deltas) os << ",apcer@bpcer=" << format_exact(d);
    os << '\n';
    for (std::size_t i = 0; i < rows.size(); i += deltas.size()) {
      os << rows[i].method << ',' << rows[i].protocol;
      for (std::size_t j = 0; j < deltas.size(); ++j) os << ',' << format_exact(rows[i + j].apcer);
      os << '\n';
    }
    return os.str();
  }
};

inline Comparison compare_runs(const std::vector<NamedScores>& runs, const Protocol& protocol,
                               const std::string& protocol_name, std::vector<double> deltas = {0.1, 0.01}) {
  Comparison out;
  out.deltas = deltas;
  for (const auto& run : runs) {
    std::vector<double> scores;
    std::vector<GroundTruth> truths;
    for (const auto& e : protocol) {
      const auto it = run.scores.find(e.pair_id);
      if (it == run.scores.end()) {
        throw AlignmentError("compare: method " + run.name + " has no score for " + e.pair_id);
      }
      scores.push_back(it->second);
      truths.push_back(e.truth);
    }
    if (run.scores.size() != protocol.size()) {
      throw AlignmentError("compare: method " + run.name + " scores pairs outside the protocol");
    }
    for (double d : deltas) {
      const auto op = apcer_at_bpcer(scores, truths, d);
      out.rows.push_back({run.name, protocol_name, d, op.apcer, op.threshold});
    }
    out.curves.emplace_back(run.name, det_curve(scores, truths));
  }
  return out;
}

}  // namespace fcmad
