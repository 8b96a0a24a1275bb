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

#include "slucr/model.h"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "slucr/utf8.h"

namespace slucr {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitRange = 0.08;

Matrix zeros(int rows, int cols) { return Matrix::Zero(rows, cols); }

}  // namespace

ModelParams ModelParams::zeros(const ModelConfig& c) {
  if (c.d_model <= 0 || c.blocks <= 0 || c.max_len <= 1 || c.vocab_size <= 0 ||
      c.num_intents <= 0 || c.num_slots <= 0) {
    throw UsageError("model config: all dimensions must be positive");
  }
  const int d = c.d_model;
  ModelParams p;
  p.config = c;
  p.piece_embedding = slucr::zeros(c.vocab_size, d);
  p.position_embedding = slucr::zeros(c.max_len, d);
  p.blocks.resize(c.blocks);
  for (auto& b : p.blocks) {
    b.ln1_gain = slucr::zeros(1, d);
    b.ln1_bias = slucr::zeros(1, d);
    b.wq = slucr::zeros(d, d);
    b.wk = slucr::zeros(d, d);
    b.wv = slucr::zeros(d, d);
    b.wo = slucr::zeros(d, d);
    b.ln2_gain = slucr::zeros(1, d);
    b.ln2_bias = slucr::zeros(1, d);
    b.ff_w1 = slucr::zeros(d, 4 * d);
    b.ff_b1 = slucr::zeros(1, 4 * d);
    b.ff_w2 = slucr::zeros(4 * d, d);
    b.ff_b2 = slucr::zeros(1, d);
  }
  p.intent_w = slucr::zeros(d, c.num_intents);
  p.intent_b = slucr::zeros(1, c.num_intents);
  p.slot_w = slucr::zeros(d, c.num_slots);
  p.slot_b = slucr::zeros(1, c.num_slots);
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](std::string_view, const Matrix& t) { n += t.size(); });
  return n;
}

void ModelParams::set_zero() {
  for_each([](std::string_view, Matrix& t) { t.setZero(); });
}

bool ModelParams::operator==(const ModelParams& o) const {
  if (!(config == o.config)) return false;
  std::vector<const Matrix*> mine, theirs;
  for_each([&](std::string_view, const Matrix& t) { mine.push_back(&t); });
  o.for_each([&](std::string_view, const Matrix& t) { theirs.push_back(&t); });
  if (mine.size() != theirs.size()) return false;
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i]->rows() != theirs[i]->rows() ||
        mine[i]->cols() != theirs[i]->cols() || *mine[i] != *theirs[i]) {
      return false;
    }
  }
  return true;
}

ModelParams init_params(const ModelConfig& config, Rng& rng) {
  ModelParams p = ModelParams::zeros(config);
  p.for_each([&](std::string_view name, Matrix& t) {
    const bool is_bias = name.ends_with("_b") || name.ends_with("_bias") ||
                         name.ends_with("_b1") || name.ends_with("_b2");
    if (name.ends_with("_gain")) {
      t.setOnes();
    } else if (!is_bias) {
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        t.data()[i] = rng.uniform(-kInitRange, kInitRange);
      }
    }
  });
  return p;
}

EncodedInput encode_input(std::span<const Segmentation> words, int max_len) {
  EncodedInput in;
  in.pieces.push_back(SubwordModel::kBos);
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (words[w].pieces.empty()) {
      throw DataError("word " + std::to_string(w) + " has an empty segmentation");
    }
    in.first_subword_index.push_back(static_cast<int>(in.pieces.size()));
    in.pieces.insert(in.pieces.end(), words[w].pieces.begin(),
                     words[w].pieces.end());
  }
  in.word_count = static_cast<int>(words.size());
  if (static_cast<int>(in.pieces.size()) > max_len) {
    throw DataError("sequence of " + std::to_string(in.pieces.size()) +
                    " pieces exceeds max_len " + std::to_string(max_len));
  }
  return in;
}

EncodedInput encode_viterbi(const SubwordModel& subword,
                            std::span<const std::string> words, int max_len) {
  std::vector<Segmentation> segs;
  segs.reserve(words.size());
  for (const auto& w : words) segs.push_back(viterbi_segment(subword, w));
  return encode_input(segs, max_len);
}

namespace {

Matrix draw_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix m(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = rng.uniform() < rate ? 0.0 : keep;
  }
  return m;
}

void apply_mask(Matrix& x, const Matrix& mask) {
  if (mask.size() != 0) x = x.cwiseProduct(mask);
}

// Row-wise layer norm; returns the normalized input and fills the cache.
Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias,
                  Matrix* xhat, Eigen::VectorXd* inv_std) {
  const auto n = x.rows();
  *xhat = Matrix(n, x.cols());
  *inv_std = Eigen::VectorXd(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double mean = x.row(t).mean();
    const auto centered = x.row(t).array() - mean;
    const double var = centered.square().mean();
    const double is = 1.0 / std::sqrt(var + kLayerNormEps);
    (*inv_std)(t) = is;
    xhat->row(t) = centered * is;
  }
  Matrix y = xhat->array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const Matrix& xhat,
                           const Eigen::VectorXd& inv_std, const Matrix& gain,
                           Matrix& d_gain, Matrix& d_bias) {
  d_gain.row(0) += dy.cwiseProduct(xhat).colwise().sum();
  d_bias.row(0) += dy.colwise().sum();
  const Matrix dxhat = dy.array().rowwise() * gain.row(0).array();
  Matrix dx(dy.rows(), dy.cols());
  for (Eigen::Index t = 0; t < dy.rows(); ++t) {
    const double mean_d = dxhat.row(t).mean();
    const double mean_dx = dxhat.row(t).dot(xhat.row(t)) / dy.cols();
    dx.row(t) = inv_std(t) *
                (dxhat.row(t).array() - mean_d - xhat.row(t).array() * mean_dx);
  }
  return dx;
}

void softmax_rows(Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const double hi = m.row(r).maxCoeff();
    m.row(r) = (m.row(r).array() - hi).exp();
    m.row(r) /= m.row(r).sum();
  }
}

void check_finite(const Matrix& m, const std::string& layer) {
  if (!m.allFinite()) throw NumericalError("non-finite activation in " + layer);
}

}  // namespace

ForwardResult forward(const ModelParams& params, const EncodedInput& input,
                      bool train_mode, double dropout_rate, Rng& rng) {
  const auto& cfg = params.config;
  const int n_pos = static_cast<int>(input.pieces.size());
  if (n_pos < 1 || n_pos > cfg.max_len) {
    throw DataError("input length " + std::to_string(n_pos) +
                    " outside [1, max_len]");
  }
  if (static_cast<int>(input.first_subword_index.size()) != input.word_count) {
    throw DataError("first_subword_index does not match word_count");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw UsageError("dropout rate must lie in [0, 1)");
  }
  const bool dropout = train_mode && dropout_rate > 0.0;
  const int d = cfg.d_model;

  ForwardResult res;
  ForwardCache& c = res.cache;
  c.pieces = input.pieces;
  c.first_subword_index = input.first_subword_index;

  Matrix x(n_pos, d);
  for (int t = 0; t < n_pos; ++t) {
    const PieceId id = input.pieces[t];
    if (id < 0 || id >= cfg.vocab_size) {
      throw DataError("piece id " + std::to_string(id) + " outside vocabulary");
    }
    x.row(t) = params.piece_embedding.row(id) + params.position_embedding.row(t);
  }
  if (dropout) c.mask0 = draw_mask(n_pos, d, dropout_rate, rng);
  apply_mask(x, c.mask0);
  check_finite(x, "embedding");

  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  c.blocks.resize(params.blocks.size());
  for (std::size_t b = 0; b < params.blocks.size(); ++b) {
    const BlockParams& p = params.blocks[b];
    ForwardCache::Block& k = c.blocks[b];
    k.x_in = x;
    k.h1 = layer_norm(x, p.ln1_gain, p.ln1_bias, &k.xhat1, &k.inv_std1);
    k.q = k.h1 * p.wq;
    k.k = k.h1 * p.wk;
    k.v = k.h1 * p.wv;
    k.attn = (k.q * k.k.transpose()) * scale;
    softmax_rows(k.attn);
    k.ctx = k.attn * k.v;
    Matrix o = k.ctx * p.wo;
    if (dropout) k.mask1 = draw_mask(n_pos, d, dropout_rate, rng);
    apply_mask(o, k.mask1);
    k.x_mid = x + o;

    k.h2 = layer_norm(k.x_mid, p.ln2_gain, p.ln2_bias, &k.xhat2, &k.inv_std2);
    k.f1 = k.h2 * p.ff_w1;
    k.f1.rowwise() += p.ff_b1.row(0);
    k.relu = k.f1.cwiseMax(0.0);
    Matrix f2 = k.relu * p.ff_w2;
    f2.rowwise() += p.ff_b2.row(0);
    if (dropout) k.mask2 = draw_mask(n_pos, d, dropout_rate, rng);
    apply_mask(f2, k.mask2);
    x = k.x_mid + f2;
    check_finite(x, "block " + std::to_string(b));
  }
  c.x_out = x;

  res.intent_logits = x.row(0) * params.intent_w + params.intent_b;
  res.slot_logits = Matrix(input.word_count, cfg.num_slots);
  for (int w = 0; w < input.word_count; ++w) {
    const int pos = input.first_subword_index[w];
    if (pos <= 0 || pos >= n_pos) {
      throw DataError("first_subword_index out of range");
    }
    res.slot_logits.row(w) = x.row(pos) * params.slot_w + params.slot_b;
  }
  check_finite(res.intent_logits, "intent head");
  check_finite(res.slot_logits, "slot head");

  Matrix probs = res.intent_logits;
  softmax_rows(probs);
  res.dists.intent.assign(probs.data(), probs.data() + probs.size());
  Matrix slot_probs = res.slot_logits;
  softmax_rows(slot_probs);
  res.dists.slots.resize(input.word_count);
  for (int w = 0; w < input.word_count; ++w) {
    res.dists.slots[w].assign(slot_probs.row(w).data(),
                              slot_probs.row(w).data() + cfg.num_slots);
  }
  return res;
}

void backward(const ModelParams& params, const ForwardCache& c,
              const Matrix& d_intent_logits, const Matrix& d_slot_logits,
              ParamGrads& g) {
  const auto& cfg = params.config;
  const int n_pos = static_cast<int>(c.pieces.size());
  const int n_words = static_cast<int>(c.first_subword_index.size());
  if (c.x_out.rows() != n_pos || c.x_out.cols() != cfg.d_model ||
      c.blocks.size() != params.blocks.size() ||
      d_intent_logits.rows() != 1 || d_intent_logits.cols() != cfg.num_intents ||
      d_slot_logits.rows() != n_words || d_slot_logits.cols() != cfg.num_slots ||
      !(g.config == cfg)) {
    throw UsageError("backward: cache, gradients and parameters do not match");
  }

  Matrix dx = Matrix::Zero(n_pos, cfg.d_model);
  g.intent_w += c.x_out.row(0).transpose() * d_intent_logits;
  g.intent_b += d_intent_logits;
  dx.row(0) += d_intent_logits * params.intent_w.transpose();
  for (int w = 0; w < n_words; ++w) {
    const int pos = c.first_subword_index[w];
    g.slot_w += c.x_out.row(pos).transpose() * d_slot_logits.row(w);
    g.slot_b += d_slot_logits.row(w);
    dx.row(pos) += d_slot_logits.row(w) * params.slot_w.transpose();
  }

  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  for (std::size_t bi = params.blocks.size(); bi-- > 0;) {
    const BlockParams& p = params.blocks[bi];
    BlockParams& gp = g.blocks[bi];
    const ForwardCache::Block& k = c.blocks[bi];

    // Feed-forward sublayer.
    Matrix d_f2 = dx;
    apply_mask(d_f2, k.mask2);
    gp.ff_w2 += k.relu.transpose() * d_f2;
    gp.ff_b2.row(0) += d_f2.colwise().sum();
    Matrix d_f1 = (d_f2 * p.ff_w2.transpose())
                      .cwiseProduct((k.f1.array() > 0.0).cast<double>().matrix());
    gp.ff_w1 += k.h2.transpose() * d_f1;
    gp.ff_b1.row(0) += d_f1.colwise().sum();
    const Matrix d_h2 = d_f1 * p.ff_w1.transpose();
    dx += layer_norm_backward(d_h2, k.xhat2, k.inv_std2, p.ln2_gain, gp.ln2_gain,
                              gp.ln2_bias);

    // Attention sublayer.
    Matrix d_o = dx;
    apply_mask(d_o, k.mask1);
    gp.wo += k.ctx.transpose() * d_o;
    const Matrix d_ctx = d_o * p.wo.transpose();
    const Matrix d_attn = d_ctx * k.v.transpose();
    const Matrix d_v = k.attn.transpose() * d_ctx;
    Matrix d_scores(n_pos, n_pos);
    for (int r = 0; r < n_pos; ++r) {
      const double dot = d_attn.row(r).dot(k.attn.row(r));
      d_scores.row(r) =
          k.attn.row(r).array() * (d_attn.row(r).array() - dot);
    }
    d_scores *= scale;
    const Matrix d_q = d_scores * k.k;
    const Matrix d_k = d_scores.transpose() * k.q;
    gp.wq += k.h1.transpose() * d_q;
    gp.wk += k.h1.transpose() * d_k;
    gp.wv += k.h1.transpose() * d_v;
    const Matrix d_h1 = d_q * p.wq.transpose() + d_k * p.wk.transpose() +
                        d_v * p.wv.transpose();
    dx += layer_norm_backward(d_h1, k.xhat1, k.inv_std1, p.ln1_gain, gp.ln1_gain,
                              gp.ln1_bias);
  }

  apply_mask(dx, c.mask0);
  for (int t = 0; t < n_pos; ++t) {
    g.piece_embedding.row(c.pieces[t]) += dx.row(t);
    g.position_embedding.row(t) += dx.row(t);
  }
}

ParamGrads backward(const ModelParams& params, const ForwardCache& cache,
                    const Matrix& d_intent_logits, const Matrix& d_slot_logits) {
  ParamGrads g = ModelParams::zeros(params.config);
  backward(params, cache, d_intent_logits, d_slot_logits, g);
  return g;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[8] = {'S', 'L', 'U', 'C', 'K', 'P', 'T', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) {
    throw DataError("checkpoint: truncated");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_f64(std::ostream& out, double x) {
  put_u64(out, std::bit_cast<std::uint64_t>(x));
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  using json = nlohmann::json;
  const auto& cfg = ckpt.params.config;
  json h;
  h["format"] = "slucr-checkpoint";
  h["version"] = 1;
  h["model"] = {{"d_model", cfg.d_model},       {"blocks", cfg.blocks},
                {"max_len", cfg.max_len},       {"vocab_size", cfg.vocab_size},
                {"num_intents", cfg.num_intents}, {"num_slots", cfg.num_slots}};
  h["intents"] = ckpt.labels.intents.labels();
  h["slots"] = ckpt.labels.slots.labels();
  json pieces = json::array();
  for (const auto& [piece, logp] : ckpt.subword.pieces()) {
    pieces.push_back(json::array({utf8::encode(piece), logp}));
  }
  h["subword"] = {{"unk_enabled", ckpt.subword.unk_enabled()},
                  {"pieces", std::move(pieces)}};
  h["train_config"] = json::parse(ckpt.train_config_json);
  json tensors = json::array();
  std::uint64_t offset = 0;
  ckpt.params.for_each([&](std::string_view name, const Matrix& t) {
    tensors.push_back({{"name", name}, {"shape", {t.rows(), t.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(t.size()) * 8;
  });
  h["tensors"] = std::move(tensors);

  const std::string header = h.dump();
  out.write(kMagic, sizeof kMagic);
  put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  ckpt.params.for_each([&](std::string_view, const Matrix& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) put_f64(out, t.data()[i]);
  });
}

Checkpoint read_checkpoint(std::istream& in) {
  using json = nlohmann::json;
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  const std::uint64_t len = get_u64(in);
  if (len > (1ULL << 32)) throw DataError("checkpoint: header too large");
  std::string header(len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(len))) {
    throw DataError("checkpoint: truncated header");
  }
  Checkpoint ckpt;
  try {
    const json h = json::parse(header);
    if (h.at("version").get<int>() != 1) throw DataError("checkpoint: unsupported version");
    const auto& m = h.at("model");
    ModelConfig cfg;
    cfg.d_model = m.at("d_model").get<int>();
    cfg.blocks = m.at("blocks").get<int>();
    cfg.max_len = m.at("max_len").get<int>();
    cfg.vocab_size = m.at("vocab_size").get<int>();
    cfg.num_intents = m.at("num_intents").get<int>();
    cfg.num_slots = m.at("num_slots").get<int>();
    ckpt.labels.intents = LabelInventory(h.at("intents").get<std::vector<std::string>>());
    ckpt.labels.slots = LabelInventory(h.at("slots").get<std::vector<std::string>>());
    std::vector<std::pair<std::u32string, double>> pieces;
    for (const auto& p : h.at("subword").at("pieces")) {
      pieces.emplace_back(utf8::decode(p.at(0).get<std::string>()),
                          p.at(1).get<double>());
    }
    ckpt.subword = SubwordModel(std::move(pieces),
                                h.at("subword").at("unk_enabled").get<bool>());
    ckpt.train_config_json = h.at("train_config").dump();
    ckpt.params = ModelParams::zeros(cfg);

    const auto& tensors = h.at("tensors");
    std::size_t idx = 0;
    ckpt.params.for_each([&](std::string_view name, Matrix& t) {
      if (idx >= tensors.size() || tensors[idx].at("name").get<std::string>() != name ||
          tensors[idx].at("shape").at(0).get<Eigen::Index>() != t.rows() ||
          tensors[idx].at("shape").at(1).get<Eigen::Index>() != t.cols()) {
        throw DataError("checkpoint: tensor table does not match model config at '" +
                        std::string(name) + "'");
      }
      ++idx;
      for (Eigen::Index i = 0; i < t.size(); ++i) {
        t.data()[i] = std::bit_cast<double>(get_u64(in));
      }
    });
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint: bad header: ") + e.what());
  }
  if (ckpt.labels.intents.size() != ckpt.params.config.num_intents ||
      ckpt.labels.slots.size() != ckpt.params.config.num_slots ||
      ckpt.subword.vocab_size() != ckpt.params.config.vocab_size) {
    throw DataError("checkpoint: inventories do not match model config");
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_checkpoint(out, ckpt);
  if (!out) throw DataError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace slucr
