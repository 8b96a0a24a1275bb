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

#ifndef SLUCR_MODEL_H_
#define SLUCR_MODEL_H_

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "slucr/common.h"
#include "slucr/corpus.h"
#include "slucr/subword.h"

namespace slucr {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
  int d_model = 32;
  int blocks = 2;
  int max_len = 64;
  int vocab_size = 0;  // subword ids, specials included
  int num_intents = 0;
  int num_slots = 0;

  bool operator==(const ModelConfig&) const = default;
};

// One pre-norm transformer block. Row-vector convention: activations are
// (positions x d_model) and weights multiply on the right.
struct BlockParams {
  Matrix ln1_gain, ln1_bias;  // 1 x d
  Matrix wq, wk, wv, wo;      // d x d
  Matrix ln2_gain, ln2_bias;  // 1 x d
  Matrix ff_w1, ff_b1;        // d x 4d, 1 x 4d
  Matrix ff_w2, ff_b2;        // 4d x d, 1 x d
};

// Learnable tensors of the encoder and both heads. Gradients use the same
// type (see ParamGrads).
struct ModelParams {
  ModelConfig config;
  Matrix piece_embedding;     // vocab x d
  Matrix position_embedding;  // max_len x d
  std::vector<BlockParams> blocks;
  Matrix intent_w, intent_b;  // d x intents, 1 x intents
  Matrix slot_w, slot_b;      // d x slots, 1 x slots

  // All tensors zero-filled with the shapes implied by `config`.
  static ModelParams zeros(const ModelConfig& config);

  // Visits every tensor in a fixed order with a stable name.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  std::size_t parameter_count() const;
  void set_zero();
  bool operator==(const ModelParams& o) const;

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    f(std::string_view("piece_embedding"), self.piece_embedding);
    f(std::string_view("position_embedding"), self.position_embedding);
    for (std::size_t b = 0; b < self.blocks.size(); ++b) {
      auto& blk = self.blocks[b];
      const std::string p = "block" + std::to_string(b) + ".";
      f(std::string_view(p + "ln1_gain"), blk.ln1_gain);
      f(std::string_view(p + "ln1_bias"), blk.ln1_bias);
      f(std::string_view(p + "wq"), blk.wq);
      f(std::string_view(p + "wk"), blk.wk);
      f(std::string_view(p + "wv"), blk.wv);
      f(std::string_view(p + "wo"), blk.wo);
      f(std::string_view(p + "ln2_gain"), blk.ln2_gain);
      f(std::string_view(p + "ln2_bias"), blk.ln2_bias);
      f(std::string_view(p + "ff_w1"), blk.ff_w1);
      f(std::string_view(p + "ff_b1"), blk.ff_b1);
      f(std::string_view(p + "ff_w2"), blk.ff_w2);
      f(std::string_view(p + "ff_b2"), blk.ff_b2);
    }
    f(std::string_view("intent_w"), self.intent_w);
    f(std::string_view("intent_b"), self.intent_b);
    f(std::string_view("slot_w"), self.slot_w);
    f(std::string_view("slot_b"), self.slot_b);
  }
};

using ParamGrads = ModelParams;

// Embeddings, projections and head weights ~ U(-0.08, 0.08); layer-norm
// gains 1; all biases 0.
ModelParams init_params(const ModelConfig& config, Rng& rng);

// BOS followed by every word's pieces; first_subword_index[w] is the
// position of word w's first piece.
struct EncodedInput {
  std::vector<PieceId> pieces;
  std::vector<int> first_subword_index;
  int word_count = 0;

  bool operator==(const EncodedInput&) const = default;
};

// Throws DataError if a word has no pieces or the sequence exceeds max_len.
EncodedInput encode_input(std::span<const Segmentation> words, int max_len);

// Viterbi-segments every word.
EncodedInput encode_viterbi(const SubwordModel& subword,
                            std::span<const std::string> words, int max_len);

struct SluDistributions {
  std::vector<double> intent;
  std::vector<std::vector<double>> slots;  // one row per word

  int word_count() const { return static_cast<int>(slots.size()); }
};

struct ForwardCache {
  struct Block {
    Matrix x_in;
    Matrix xhat1, h1;
    Eigen::VectorXd inv_std1;
    Matrix q, k, v, attn, ctx;
    Matrix mask1;  // empty when dropout is off
    Matrix x_mid;
    Matrix xhat2, h2;
    Eigen::VectorXd inv_std2;
    Matrix f1, relu;
    Matrix mask2;
  };

  std::vector<PieceId> pieces;
  std::vector<int> first_subword_index;
  Matrix mask0;
  std::vector<Block> blocks;
  Matrix x_out;
};

struct ForwardResult {
  SluDistributions dists;
  Matrix intent_logits;  // 1 x intents
  Matrix slot_logits;    // words x slots
  ForwardCache cache;
};

// Dropout masks are drawn from `rng` in a fixed order that does not depend
// on parameter values, so replaying with an identically seeded stream
// reproduces the same masks. Throws NumericalError naming the layer on a
// non-finite activation.
ForwardResult forward(const ModelParams& params, const EncodedInput& input,
                      bool train_mode, double dropout_rate, Rng& rng);

// Accumulates (+=) the gradients for upstream logit gradients into `grads`.
void backward(const ModelParams& params, const ForwardCache& cache,
              const Matrix& d_intent_logits, const Matrix& d_slot_logits,
              ParamGrads& grads);

ParamGrads backward(const ModelParams& params, const ForwardCache& cache,
                    const Matrix& d_intent_logits, const Matrix& d_slot_logits);

// Self-contained model bundle: weights, label inventories, the subword model
// and the training configuration (JSON text).
struct Checkpoint {
  ModelParams params;
  LabelSpace labels;
  SubwordModel subword;
  std::string train_config_json = "{}";
};

// Layout: 8-byte magic "SLUCKPT1", little-endian u64 header length, the JSON
// header (config, inventories, subword pieces, tensor name/shape/offset
// table), then every tensor as raw little-endian float64 in row-major order.
void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace slucr

#endif  // SLUCR_MODEL_H_
