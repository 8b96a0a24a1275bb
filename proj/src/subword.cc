// Copyright 2026 The slucr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "slucr/subword.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "slucr/utf8.h"

namespace slucr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double log_sum_exp(std::span<const double> xs) {
  double hi = kNegInf;
  for (double x : xs) hi = std::max(hi, x);
  if (hi == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - hi);
  return hi + std::log(s);
}

}  // namespace

SubwordModel::SubwordModel(std::vector<std::pair<std::u32string, double>> pieces,
                           bool unk_enabled)
    : pieces_(std::move(pieces)), unk_enabled_(unk_enabled) {
  if (pieces_.empty()) throw DataError("subword model has no pieces");
  std::vector<double> scores;
  scores.reserve(pieces_.size());
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const auto& [piece, score] = pieces_[i];
    if (piece.empty()) throw DataError("empty subword piece");
    if (!std::isfinite(score)) {
      throw DataError("non-finite log-probability for piece '" +
                      utf8::encode(piece) + "'");
    }
    if (!index_.emplace(piece, kNumSpecial + static_cast<PieceId>(i)).second) {
      throw DataError("duplicate subword piece '" + utf8::encode(piece) + "'");
    }
    max_len_ = std::max(max_len_, piece.size());
    scores.push_back(score);
  }
  // Already-normalized inputs (e.g. a saved model) are kept bit-exact.
  const double log_z = log_sum_exp(scores);
  if (std::abs(log_z) > 1e-12) {
    for (auto& p : pieces_) p.second -= log_z;
  }
}

PieceId SubwordModel::id_of(std::u32string_view piece) const {
  auto it = index_.find(std::u32string(piece));
  return it == index_.end() ? -1 : it->second;
}

const std::u32string& SubwordModel::piece(PieceId id) const {
  static const std::u32string kSpecial[] = {U"<s>", U"<pad>", U"<unk>"};
  if (id >= 0 && id < kNumSpecial) return kSpecial[id];
  return pieces_.at(id - kNumSpecial).first;
}

double SubwordModel::log_prob(PieceId id) const {
  if (id == kUnk) return kUnkLogProb;
  if (id < kNumSpecial) return kNegInf;
  return pieces_.at(id - kNumSpecial).second;
}

std::string SubwordModel::piece_utf8(PieceId id) const {
  return utf8::encode(piece(id));
}

void save_model(std::ostream& out, const SubwordModel& model) {
  out << "#unigram v1\n";
  for (const auto& [piece, logp] : model.pieces()) {
    if (piece.find_first_of(U"\t\n\r") != std::u32string::npos) {
      throw DataError("piece contains a tab or newline and cannot be saved");
    }
    std::ostringstream num;
    num << std::setprecision(17) << logp;
    out << utf8::encode(piece) << '\t' << num.str() << '\n';
  }
}

SubwordModel read_model(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "#unigram v1") {
    throw DataError("subword model: missing '#unigram v1' header");
  }
  std::vector<std::pair<std::u32string, double>> pieces;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) {
      throw DataError("subword model line " + std::to_string(lineno) +
                      ": expected piece<TAB>logprob");
    }
    double logp;
    std::istringstream num(line.substr(tab + 1));
    num.imbue(std::locale::classic());
    if (!(num >> logp) || !(num >> std::ws).eof()) {
      throw DataError("subword model line " + std::to_string(lineno) +
                      ": bad log-probability");
    }
    pieces.emplace_back(utf8::decode(line.substr(0, tab)), logp);
  }
  return SubwordModel(std::move(pieces));
}

void save_model(const std::string& path, const SubwordModel& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  save_model(out, model);
}

SubwordModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_model(in);
}

Lattice::Lattice(const SubwordModel& model, std::u32string t)
    : text(std::move(t)),
      ending_at(text.size() + 1),
      starting_at(text.size() + 1) {
  const int m = length();
  const int max_len = static_cast<int>(model.max_piece_length());
  std::u32string key;
  for (int i = 0; i < m; ++i) {
    bool single_covered = false;
    for (int len = 1; len <= max_len && i + len <= m; ++len) {
      key.assign(text, i, len);
      const PieceId id = model.id_of(key);
      if (id < 0) continue;
      if (len == 1) single_covered = true;
      const Edge e{i, i + len, id, model.log_prob(id)};
      starting_at[i].push_back(e);
      ending_at[i + len].push_back(e);
    }
    if (!single_covered && model.unk_enabled()) {
      const Edge e{i, i + 1, SubwordModel::kUnk, SubwordModel::kUnkLogProb};
      starting_at[i].push_back(e);
      ending_at[i + 1].push_back(e);
    }
  }
}

std::vector<double> Lattice::forward(double alpha) const {
  std::vector<double> f(length() + 1, kNegInf);
  f[0] = 0.0;
  for (int j = 1; j <= length(); ++j) {
    for (const Edge& e : ending_at[j]) {
      f[j] = log_add(f[j], f[e.start] + alpha * e.log_prob);
    }
  }
  return f;
}

std::vector<double> Lattice::backward(double alpha) const {
  std::vector<double> b(length() + 1, kNegInf);
  b[length()] = 0.0;
  for (int i = length() - 1; i >= 0; --i) {
    for (const Edge& e : starting_at[i]) {
      b[i] = log_add(b[i], alpha * e.log_prob + b[e.end]);
    }
  }
  return b;
}

std::vector<PieceId> Lattice::sample(std::span<const double> fwd, double alpha,
                                     Rng& rng) const {
  std::vector<PieceId> pieces;
  int node = length();
  while (node > 0) {
    double u = rng.uniform();
    const Edge* pick = nullptr;
    for (const auto& e : ending_at[node]) {
      if (fwd[e.start] == kNegInf) continue;
      pick = &e;
      u -= std::exp(fwd[e.start] + alpha * e.log_prob - fwd[node]);
      if (u < 0.0) break;
    }
    pieces.push_back(pick->piece);
    node = pick->start;
  }
  std::reverse(pieces.begin(), pieces.end());
  return pieces;
}

std::vector<std::string> Segmentation::piece_strings(
    const SubwordModel& model) const {
  std::vector<std::string> out;
  out.reserve(pieces.size());
  // UNK pieces render as the character they cover.
  std::size_t pos = 0;
  for (PieceId id : pieces) {
    const std::size_t len = id == SubwordModel::kUnk ? 1 : model.piece(id).size();
    out.push_back(utf8::encode(std::u32string_view(text).substr(pos, len)));
    pos += len;
  }
  return out;
}

namespace {

[[noreturn]] void throw_uncoverable(const Lattice& lattice) {
  const auto f = lattice.forward(0.0);
  int pos = 0;
  for (int j = 0; j <= lattice.length(); ++j) {
    if (f[j] != kNegInf) pos = j;
  }
  throw DataError("text '" + utf8::encode(lattice.text) +
                  "' cannot be segmented: no piece covers position " +
                  std::to_string(pos));
}

}  // namespace

Segmentation viterbi_segment(const SubwordModel& model,
                             std::u32string_view text) {
  const Lattice lattice(model, std::u32string(text));
  const int m = lattice.length();
  // Suffix DP: best completion from each node. Ties prefer fewer pieces, then
  // the smaller first piece id, which orders whole id sequences
  // lexicographically because distinct first pieces differ at index 0.
  std::vector<double> score(m + 1, kNegInf);
  std::vector<int> count(m + 1, 0);
  std::vector<const Lattice::Edge*> choice(m + 1, nullptr);
  score[m] = 0.0;
  for (int i = m - 1; i >= 0; --i) {
    for (const auto& e : lattice.starting_at[i]) {
      if (score[e.end] == kNegInf) continue;
      const double s = e.log_prob + score[e.end];
      const int c = 1 + count[e.end];
      const bool better =
          choice[i] == nullptr || s > score[i] ||
          (s == score[i] &&
           (c < count[i] || (c == count[i] && e.piece < choice[i]->piece)));
      if (better) {
        score[i] = s;
        count[i] = c;
        choice[i] = &e;
      }
    }
  }
  if (m > 0 && choice[0] == nullptr) throw_uncoverable(lattice);
  Segmentation seg;
  seg.text = lattice.text;
  for (int i = 0; i < m; i = choice[i]->end) seg.pieces.push_back(choice[i]->piece);
  return seg;
}

Segmentation viterbi_segment(const SubwordModel& model, std::string_view utf8) {
  return viterbi_segment(model, utf8::decode(utf8));
}

Segmentation sample_segmentation(const SubwordModel& model,
                                 std::u32string_view text, double alpha,
                                 Rng& rng) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw UsageError("sampling alpha must be a finite non-negative number");
  }
  const Lattice lattice(model, std::u32string(text));
  const int m = lattice.length();
  const auto f = lattice.forward(alpha);
  if (f[m] == kNegInf) throw_uncoverable(lattice);
  Segmentation seg;
  seg.text = lattice.text;
  seg.pieces = lattice.sample(f, alpha, rng);
  return seg;
}

Segmentation sample_segmentation(const SubwordModel& model,
                                 std::string_view utf8, double alpha, Rng& rng) {
  return sample_segmentation(model, utf8::decode(utf8), alpha, rng);
}

double marginal_logprob(const SubwordModel& model, std::u32string_view text,
                        double alpha) {
  const Lattice lattice(model, std::u32string(text));
  const double z = lattice.forward(alpha).back();
  if (z == kNegInf) throw_uncoverable(lattice);
  return z;
}

// ---------------------------------------------------------------------------
// Training

namespace {

using PieceTable = std::vector<std::pair<std::u32string, double>>;

struct Corpus {
  std::vector<std::u32string> texts;
  std::vector<double> counts;
};

// One E-step over the corpus; returns the log-likelihood and fills
// `expected` (indexed like `table`).
double expectation(const PieceTable& table, const Corpus& corpus,
                   std::vector<double>* expected) {
  const SubwordModel model(table, /*unk_enabled=*/false);
  if (expected) expected->assign(table.size(), 0.0);
  double ll = 0.0;
  for (std::size_t t = 0; t < corpus.texts.size(); ++t) {
    const Lattice lattice(model, corpus.texts[t]);
    const auto f = lattice.forward(1.0);
    const auto b = lattice.backward(1.0);
    const double z = f.back();
    const double c = corpus.counts[t];
    ll += c * z;
    if (!expected) continue;
    for (int i = 0; i < lattice.length(); ++i) {
      for (const auto& e : lattice.starting_at[i]) {
        (*expected)[e.piece - SubwordModel::kNumSpecial] +=
            c * std::exp(f[e.start] + e.log_prob + b[e.end] - z);
      }
    }
  }
  return ll;
}

// M-step. Unused multi-character pieces are dropped; single characters are
// kept with a floor count so coverage never breaks.
PieceTable maximization(const PieceTable& table,
                        const std::vector<double>& expected) {
  double total = 0.0;
  for (double c : expected) total += c;
  PieceTable next;
  next.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    double c = expected[i];
    if (c <= 0.0) {
      if (table[i].first.size() > 1) continue;
      c = total * 1e-300;
    }
    next.emplace_back(table[i].first, std::log(c) - std::log(total));
  }
  return next;
}

PieceTable run_em(PieceTable table, const Corpus& corpus, int iters,
                  std::vector<double>* history) {
  std::vector<double> expected;
  for (int k = 0; k < iters; ++k) {
    history->push_back(expectation(table, corpus, &expected));
    table = maximization(table, expected);
  }
  history->push_back(expectation(table, corpus, nullptr));
  return table;
}

// Corpus log-likelihood if `removed` were deleted and the rest renormalized.
double likelihood_without(const std::vector<Lattice>& lattices,
                          const Corpus& corpus, PieceId removed,
                          double log_renorm) {
  double ll = 0.0;
  std::vector<double> f;
  for (std::size_t t = 0; t < lattices.size(); ++t) {
    const Lattice& lat = lattices[t];
    f.assign(lat.length() + 1, kNegInf);
    f[0] = 0.0;
    for (int j = 1; j <= lat.length(); ++j) {
      for (const auto& e : lat.ending_at[j]) {
        if (e.piece == removed) continue;
        f[j] = log_add(f[j], f[e.start] + e.log_prob - log_renorm);
      }
    }
    ll += corpus.counts[t] * f.back();
  }
  return ll;
}

PieceTable prune_round(const PieceTable& table, const Corpus& corpus,
                       int target, double fraction) {
  const SubwordModel model(table, /*unk_enabled=*/false);
  std::vector<Lattice> lattices;
  lattices.reserve(corpus.texts.size());
  for (const auto& text : corpus.texts) lattices.emplace_back(model, text);
  const double base = expectation(table, corpus, nullptr);

  std::vector<std::pair<double, std::size_t>> losses;  // (loss, table index)
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table[i].first.size() == 1) continue;
    const double p = std::exp(table[i].second);
    const double log_renorm = std::log1p(-std::min(p, 1.0 - 1e-16));
    const double ll = likelihood_without(
        lattices, corpus, SubwordModel::kNumSpecial + static_cast<PieceId>(i),
        log_renorm);
    losses.emplace_back(base - ll, i);
  }
  const std::size_t excess = table.size() - static_cast<std::size_t>(target);
  const std::size_t per_round = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * losses.size())));
  const std::size_t n_remove = std::min({excess, per_round, losses.size()});
  std::sort(losses.begin(), losses.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return table[a.second].first < table[b.second].first;
  });
  std::vector<bool> drop(table.size(), false);
  for (std::size_t k = 0; k < n_remove; ++k) drop[losses[k].second] = true;
  PieceTable next;
  double kept_mass = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (drop[i]) continue;
    next.push_back(table[i]);
    kept_mass += std::exp(table[i].second);
  }
  for (auto& p : next) p.second -= std::log(kept_mass);
  return next;
}

}  // namespace

SubwordModel train_unigram(std::span<const std::string> texts,
                           const UnigramTrainerConfig& config,
                           UnigramTrainReport* report) {
  if (config.target_vocab_size <= 0 || config.max_piece_len <= 0 ||
      config.min_freq <= 0 || config.em_iters <= 0) {
    throw UsageError(
        "unigram trainer: vocab size, max piece length, min frequency and EM "
        "iterations must be positive");
  }
  std::map<std::u32string, double> distinct;
  for (const auto& t : texts) {
    auto u = utf8::decode(t);
    if (!u.empty()) distinct[std::move(u)] += 1.0;
  }
  if (distinct.empty()) throw DataError("unigram trainer: empty corpus");
  Corpus corpus;
  for (auto& [text, count] : distinct) {
    corpus.texts.push_back(text);
    corpus.counts.push_back(count);
  }

  std::map<std::u32string, double> freq;
  std::set<char32_t> chars;
  for (std::size_t t = 0; t < corpus.texts.size(); ++t) {
    const auto& text = corpus.texts[t];
    for (std::size_t i = 0; i < text.size(); ++i) {
      chars.insert(text[i]);
      for (std::size_t len = 1;
           len <= static_cast<std::size_t>(config.max_piece_len) &&
           i + len <= text.size();
           ++len) {
        freq[text.substr(i, len)] += corpus.counts[t];
      }
    }
  }
  if (static_cast<std::size_t>(config.target_vocab_size) < chars.size()) {
    throw DataError("unigram trainer: target vocabulary size " +
                    std::to_string(config.target_vocab_size) +
                    " is smaller than the " + std::to_string(chars.size()) +
                    " distinct characters");
  }

  PieceTable table;
  for (const auto& [piece, n] : freq) {
    if (piece.size() == 1 || n >= config.min_freq) {
      table.emplace_back(piece, std::log(n));
    }
  }
  double log_z = kNegInf;
  for (const auto& p : table) log_z = log_add(log_z, p.second);
  for (auto& p : table) p.second -= log_z;

  UnigramTrainReport local;
  UnigramTrainReport& rep = report ? *report : local;
  rep = {};
  rep.log_likelihood.emplace_back();
  table = run_em(std::move(table), corpus, config.em_iters,
                 &rep.log_likelihood.back());
  rep.vocab_size_after_phase.push_back(static_cast<int>(table.size()));
  while (table.size() > static_cast<std::size_t>(config.target_vocab_size)) {
    table = prune_round(table, corpus, config.target_vocab_size,
                        config.prune_fraction);
    rep.log_likelihood.emplace_back();
    table = run_em(std::move(table), corpus, 1, &rep.log_likelihood.back());
    rep.vocab_size_after_phase.push_back(static_cast<int>(table.size()));
  }

  std::sort(table.begin(), table.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return SubwordModel(std::move(table));
}

}  // namespace slucr
