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

#ifndef SLUCR_SUBWORD_H_
#define SLUCR_SUBWORD_H_

#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "slucr/common.h"

namespace slucr {

using PieceId = int;

// Unigram language model over subword pieces. Ids 0..2 are reserved for
// BOS, PAD and UNK; regular pieces follow in insertion order. The regular
// pieces' probabilities sum to one; UNK carries a fixed penalty and is only
// used for characters no piece covers.
class SubwordModel {
 public:
  static constexpr PieceId kBos = 0;
  static constexpr PieceId kPad = 1;
  static constexpr PieceId kUnk = 2;
  static constexpr int kNumSpecial = 3;
  static constexpr double kUnkLogProb = -20.0;

  SubwordModel() = default;

  // Pieces with (unnormalized) log-scores; they are renormalized so the
  // probabilities sum to one. Throws DataError on empty or duplicate pieces.
  explicit SubwordModel(std::vector<std::pair<std::u32string, double>> pieces,
                        bool unk_enabled = true);

  // Total id space, specials included.
  int vocab_size() const { return kNumSpecial + num_pieces(); }
  int num_pieces() const { return static_cast<int>(pieces_.size()); }

  PieceId id_of(std::u32string_view piece) const;  // -1 when absent
  const std::u32string& piece(PieceId id) const;
  double log_prob(PieceId id) const;
  std::string piece_utf8(PieceId id) const;
  std::size_t max_piece_length() const { return max_len_; }

  bool unk_enabled() const { return unk_enabled_; }
  void set_unk_enabled(bool on) { unk_enabled_ = on; }

  const std::vector<std::pair<std::u32string, double>>& pieces() const {
    return pieces_;
  }

  bool operator==(const SubwordModel& o) const {
    return pieces_ == o.pieces_ && unk_enabled_ == o.unk_enabled_;
  }

 private:
  std::vector<std::pair<std::u32string, double>> pieces_;
  std::unordered_map<std::u32string, PieceId> index_;
  std::size_t max_len_ = 0;
  bool unk_enabled_ = true;
};

// TSV model file: header line "#unigram v1", then "piece<TAB>logprob" per
// regular piece in id order.
void save_model(std::ostream& out, const SubwordModel& model);
SubwordModel read_model(std::istream& in);
void save_model(const std::string& path, const SubwordModel& model);
SubwordModel load_model(const std::string& path);

// All pieces matching substrings of one text. Positions are code-point
// boundaries 0..length.
struct Lattice {
  struct Edge {
    int start;
    int end;
    PieceId piece;
    double log_prob;
  };

  Lattice(const SubwordModel& model, std::u32string text);

  std::u32string text;
  std::vector<std::vector<Edge>> ending_at;    // indexed by end node
  std::vector<std::vector<Edge>> starting_at;  // indexed by start node

  int length() const { return static_cast<int>(text.size()); }

  // log of the alpha-scaled path weight summed over paths from node 0, per
  // node. Entry `length()` is the partition function.
  std::vector<double> forward(double alpha) const;
  std::vector<double> backward(double alpha) const;

  // One exact draw by backward sampling; `fwd` must be forward(alpha) of
  // this lattice with a finite last entry.
  std::vector<PieceId> sample(std::span<const double> fwd, double alpha,
                              Rng& rng) const;
};

struct Segmentation {
  std::vector<PieceId> pieces;
  std::u32string text;

  std::vector<std::string> piece_strings(const SubwordModel& model) const;
};

Segmentation viterbi_segment(const SubwordModel& model, std::u32string_view text);
Segmentation viterbi_segment(const SubwordModel& model, std::string_view utf8);

// Exact draw with P(s) proportional to (prod p(piece))^alpha by forward
// filtering, backward sampling.
Segmentation sample_segmentation(const SubwordModel& model,
                                 std::u32string_view text, double alpha,
                                 Rng& rng);
Segmentation sample_segmentation(const SubwordModel& model,
                                 std::string_view utf8, double alpha, Rng& rng);

double marginal_logprob(const SubwordModel& model, std::u32string_view text,
                        double alpha);

struct UnigramTrainerConfig {
  int target_vocab_size = 1000;
  int max_piece_len = 8;
  int min_freq = 2;
  int em_iters = 4;
  // Fraction of removable pieces dropped per pruning round.
  double prune_fraction = 0.2;
};

struct UnigramTrainReport {
  // Corpus log-likelihood per EM phase: entry k of a phase is the
  // likelihood before the k-th M-step, plus the likelihood after the last.
  // Pruning starts a new phase.
  std::vector<std::vector<double>> log_likelihood;
  std::vector<int> vocab_size_after_phase;
};

SubwordModel train_unigram(std::span<const std::string> texts,
                           const UnigramTrainerConfig& config,
                           UnigramTrainReport* report = nullptr);

}  // namespace slucr

#endif  // SLUCR_SUBWORD_H_
