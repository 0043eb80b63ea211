#pragma once

#include <optional>
#include <span>

#include "aap/nn/transformer.hpp"
#include "aap/sim/env.hpp"

namespace aap::policy {

enum class Variant { aap, gru_lac, aap_lac, action_semantics, model_based };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::aap: return "aap";
    case Variant::gru_lac: return "gru_lac";
    case Variant::aap_lac: return "aap_lac";
    case Variant::action_semantics: return "action_semantics";
    case Variant::model_based: return "model_based";
  }
  return "?";
}

inline std::optional<Variant> variant_from_name(const std::string& s) {
  for (Variant v : {Variant::aap, Variant::gru_lac, Variant::aap_lac, Variant::action_semantics,
                    Variant::model_based})
    if (s == variant_name(v)) return v;
  return std::nullopt;
}

struct NetDims {
  int64_t state_repr = 64;
  int64_t goal_embed = 8;
  int64_t change_proj = 64;
  int64_t memory = 128;
  int64_t belief = 64;
  int64_t tf_layers = 2;
  int64_t tf_heads = 4;
  int64_t fwd_hidden = 64;

  static NetDims defaults(sim::TaskKind task) {
    NetDims d;
    if (task == sim::TaskKind::nav2d_pointnav) {
      d.state_repr = 128;
      d.goal_embed = 16;
      d.change_proj = 128;
      d.memory = 256;
      d.belief = 128;
      d.tf_heads = 8;
      d.fwd_hidden = 128;
    }
    return d;
  }
};

// Per-environment recurrent state. Plain data so rollout snapshots and
// training resume can copy it freely.
struct RecurrentState {
  std::vector<float> belief;
  std::vector<float> bank;        // one memory row per action, flattened
  std::vector<uint8_t> executed;  // which bank rows have ever been written
  std::vector<float> prev_obs;
  int prev_action = -1;

  void reset() {
    std::fill(belief.begin(), belief.end(), 0.0f);
    std::fill(bank.begin(), bank.end(), 0.0f);
    std::fill(executed.begin(), executed.end(), 0);
    std::fill(prev_obs.begin(), prev_obs.end(), 0.0f);
    prev_action = -1;
  }
};

struct ActResult {
  int action = 0;
  float logprob = 0.0f;
  float value = 0.0f;
};

// Minibatch view for the PPO recompute: T consecutive steps of E
// environments, time-major rows (index t*E + e).
struct SeqBatch {
  int64_t T = 0, E = 0;
  Tensor obs;                    // [T*E, obs_dim], raw observations
  Tensor prev_obs;               // [T*E, obs_dim]
  std::vector<int> prev_action;  // -1 at episode starts
  std::vector<int> action;
  std::vector<float> done;       // 1.0 when step t ended its episode
  Tensor belief0;                // [E, belief]
  Tensor bank0;                  // [E, n*memory] (empty for bankless variants)
  std::vector<uint8_t> executed0;
};

struct EvalNodes {
  Node* logp = nullptr;      // [T*E, n_actions] log-softmax
  Node* value = nullptr;     // [T*E, 1]
  Node* fwd_pred = nullptr;  // [T*E, state_change_dim] or null
};

// The policy family: the full action-adaptive network plus its baselines and
// ablations, selected by Variant. All variants share the state encoder and
// belief GRU; the differences are where action embeddings come from and
// whether the head is order-invariant or a linear actor-critic.
class Policy {
 public:
  Policy(Variant variant, sim::TaskInfo task, NetDims dims, uint64_t param_seed)
      : variant_(variant), task_(std::move(task)), dims_(dims) {
    Rng rng(param_seed);
    const int64_t n = task_.action_count;
    const int64_t f_dim = dims_.change_proj + dims_.goal_embed;
    const int64_t h_dim = dims_.state_repr + dims_.goal_embed;

    state_mlp_ = nn::MlpParams::create(
        ps_, "state_encoder",
        {{task_.obs_dim, dims_.state_repr, dims_.state_repr, dims_.state_repr},
         nn::Activation::tanh,
         true},
        rng);
    goal_embed_ = nn::LinearParams::create(ps_, "goal_embedder", task_.goal_dim,
                                           dims_.goal_embed, rng);

    if (has_bank()) {
      change_proj_ = nn::LinearParams::create(ps_, "change_proj", 2 * dims_.state_repr,
                                              dims_.change_proj, rng);
      impact_gru_ = nn::GruParams::create(ps_, "impact_gru", f_dim, dims_.memory, rng);
    }
    if (has_end_slot() || variant_ == Variant::action_semantics) {
      const int64_t rows = variant_ == Variant::action_semantics ? n : 1;
      action_order_ = ps_.add("action_order_embed",
                              init::glorot_uniform(rng, dims_.memory, dims_.memory,
                                                   {rows, dims_.memory}));
    }
    if (has_fwd()) {
      fwd_head_ = nn::MlpParams::create(
          ps_, "forward_head",
          {{dims_.memory, dims_.fwd_hidden, task_.state_change_dim}, nn::Activation::tanh, false},
          rng);
    }
    if (variant_ == Variant::model_based)
      change_embed_ = nn::LinearParams::create(ps_, "change_embed", task_.state_change_dim,
                                               dims_.memory, rng);

    const int64_t belief_in = h_dim + (feeds_embeddings() ? n * dims_.memory : 0);
    belief_gru_ = nn::GruParams::create(ps_, "belief_gru", belief_in, dims_.belief, rng);

    if (has_oi()) {
      token_proj_e_ = nn::LinearParams::create(ps_, "token_proj_embed", dims_.memory,
                                               dims_.belief, rng);
      token_proj_b_ = nn::LinearParams::create(ps_, "token_proj_belief", dims_.belief,
                                               dims_.belief, rng);
      oi_head_ = nn::TransformerParams::create(
          ps_, "oi_head",
          {.layers = dims_.tf_layers, .heads = dims_.tf_heads, .dim = dims_.belief}, rng);
      actor_ = nn::LinearParams::create(ps_, "actor", dims_.belief, 1, rng, 0.01);
      critic_ = nn::LinearParams::create(ps_, "critic", dims_.belief, 1, rng);
    } else {
      actor_ = nn::LinearParams::create(ps_, "actor", dims_.belief, n, rng, 0.01);
      critic_ = nn::LinearParams::create(ps_, "critic", dims_.belief, 1, rng);
    }
  }

  Variant variant() const { return variant_; }
  const sim::TaskInfo& task() const { return task_; }
  const NetDims& dims() const { return dims_; }
  ParamStore& params() { return ps_; }
  const ParamStore& params() const { return ps_; }

  bool has_bank() const {
    return variant_ == Variant::aap || variant_ == Variant::aap_lac ||
           variant_ == Variant::model_based;
  }
  bool has_oi() const {
    return variant_ == Variant::aap || variant_ == Variant::action_semantics;
  }
  bool has_fwd() const { return has_bank(); }
  bool feeds_embeddings() const { return variant_ != Variant::gru_lac; }
  bool has_end_slot() const { return has_bank() && task_.end_action >= 0; }

  RecurrentState make_state() const {
    RecurrentState s;
    s.belief.assign(dims_.belief, 0.0f);
    if (has_bank()) s.bank.assign(task_.action_count * dims_.memory, 0.0f);
    s.executed.assign(task_.action_count, 0);
    s.prev_obs.assign(task_.obs_dim, 0.0f);
    return s;
  }

  // One eager policy step over a batch of environments. Mutates the
  // recurrent states (bank update, belief advance, prev_obs/prev_action).
  void act(const Tensor& obs, std::vector<RecurrentState>& states, std::vector<Rng>& rngs,
           bool greedy, std::vector<ActResult>& out) {
    const int64_t E = obs.rows();
    Eager b{&ps_};
    StepIo io = step_io_from_states(obs, states);
    StepOut so = forward_rows(b, io, gather_belief(states), gather_bank(states));

    const Tensor logp = kern::log_softmax_rows(so.logits);
    const Tensor probs = kern::exp(logp);
    out.resize(E);
    for (int64_t e = 0; e < E; ++e) {
      int a;
      if (greedy) {
        a = 0;
        for (int64_t j = 1; j < probs.cols(); ++j)
          if (probs.at(e, j) > probs.at(e, a)) a = static_cast<int>(j);
      } else {
        a = rngs[e].categorical(probs.ptr() + e * probs.cols(), static_cast<int>(probs.cols()));
      }
      out[e].action = a;
      out[e].logprob = logp.at(e, a);
      out[e].value = so.value[e];
    }

    for (int64_t e = 0; e < E; ++e) {
      RecurrentState& st = states[e];
      std::copy_n(so.belief.ptr() + e * dims_.belief, dims_.belief, st.belief.data());
      if (has_bank())
        std::copy_n(so.bank.ptr() + e * st.bank.size(), st.bank.size(), st.bank.data());
      std::copy_n(obs.ptr() + e * task_.obs_dim, task_.obs_dim, st.prev_obs.data());
      st.prev_action = out[e].action;
    }
  }

  // Value estimates without touching the recurrent states (GAE bootstrap).
  std::vector<float> bootstrap_values(const Tensor& obs, const std::vector<RecurrentState>& states) {
    Eager b{&ps_};
    std::vector<RecurrentState> copies(states);
    StepIo io = step_io_from_states(obs, copies);
    StepOut so = forward_rows(b, io, gather_belief(copies), gather_bank(copies));
    std::vector<float> v(obs.rows());
    for (int64_t e = 0; e < obs.rows(); ++e) v[e] = so.value[e];
    return v;
  }

  // Taped sequence evaluation for the PPO/forward losses.
  EvalNodes evaluate(Graph& g, const SeqBatch& batch) {
    Taped b{&ps_, &g};
    const int64_t T = batch.T, E = batch.E, n = task_.action_count;

    const Tensor obs_n = normalize(batch.obs);
    const Tensor prev_n = normalize(batch.prev_obs);
    Node* X = g.constant(obs_n);
    Node* Xp = g.constant(prev_n);
    Node* r = nn::mlp_forward(b, state_mlp_, X);
    Node* gvec = nn::linear(b, goal_embed_,
                            b.slice_cols(X, task_.goal_offset, task_.goal_offset + task_.goal_dim));
    Node* h_all = b.concat_cols(r, gvec);
    Node* f_all = nullptr;
    if (has_bank()) {
      Node* rp = nn::mlp_forward(b, state_mlp_, Xp);
      f_all = b.concat_cols(nn::linear(b, change_proj_, b.concat_cols(r, rp)), gvec);
    }
    Node* e_cold = has_bank() ? cold_embedding(b) : nullptr;

    Node* belief = g.constant(batch.belief0.clone());
    Node* bank = has_bank() ? g.constant(batch.bank0.clone()) : nullptr;
    std::vector<uint8_t> executed(batch.executed0);

    std::vector<Node*> embed_steps, belief_steps;
    for (int64_t t = 0; t < T; ++t) {
      if (t > 0) {
        std::vector<float> keep(E);
        for (int64_t e = 0; e < E; ++e) {
          const bool ended = batch.done[(t - 1) * E + e] > 0.5f;
          keep[e] = ended ? 0.0f : 1.0f;
          if (ended) std::fill_n(executed.data() + e * n, n, 0);
        }
        belief = b.scale_rows(belief, keep);
        if (bank) bank = b.scale_rows(bank, keep);
      }

      std::vector<int> pa(E);
      for (int64_t e = 0; e < E; ++e) {
        pa[e] = batch.prev_action[t * E + e];
        if (pa[e] == task_.end_action) pa[e] = -1;  // End never reaches the bank
        if (pa[e] >= 0) executed[e * n + pa[e]] = 1;
      }

      Node* h_t = b.slice_rows(h_all, t * E, (t + 1) * E);
      Node* embeddings = nullptr;
      if (has_bank()) {
        Node* f_t = b.slice_rows(f_all, t * E, (t + 1) * E);
        Node* m = b.gather_segments(bank, pa, dims_.memory);
        Node* m_new = nn::gru_step(b, impact_gru_, f_t, m);
        bank = b.scatter_segments(bank, m_new, pa);
        embeddings = assemble_embeddings(b, bank, e_cold, executed, E);
      } else if (variant_ == Variant::action_semantics) {
        embeddings = semantic_embeddings(b, E);
      }

      Node* policy_embeddings = embeddings;
      if (variant_ == Variant::model_based) policy_embeddings = model_based_embeddings(b, embeddings, E);

      Node* belief_in = feeds_embeddings() ? b.concat_cols(h_t, policy_embeddings) : h_t;
      belief = nn::gru_step(b, belief_gru_, belief_in, belief);

      if (feeds_embeddings()) embed_steps.push_back(embeddings);
      belief_steps.push_back(belief);
    }

    Node* B_all = b.concat_rows(belief_steps);
    Node* E_all = feeds_embeddings() ? b.concat_rows(embed_steps) : nullptr;

    EvalNodes outn;
    Node* logits = head_logits(b, E_all, B_all, T * E, &outn.value);
    outn.logp = b.log_softmax_rows(logits);

    if (has_fwd()) {
      std::vector<int> taken(batch.action);
      for (auto& a : taken)
        if (a == task_.end_action) a = -1;
      Node* e_taken = b.gather_segments(E_all, taken, dims_.memory);
      outn.fwd_pred = nn::mlp_forward(b, fwd_head_, e_taken);
    }
    return outn;
  }

  // Order-invariant head in isolation: action-embedding tokens plus one
  // belief token to logits and value. Exposed for the permutation contract.
  void oi_head_forward(const Tensor& embeddings /*[n, memory]*/, const Tensor& belief /*[1, belief]*/,
                       Tensor& logits_out, float& value_out) {
    if (!has_oi()) throw std::logic_error("oi_head_forward: variant has a linear head");
    Eager b{&ps_};
    const int64_t n = embeddings.rows();
    Tensor act_tok = nn::linear(b, token_proj_e_, embeddings);
    Tensor bel_tok = nn::linear(b, token_proj_b_, belief);
    Tensor tokens = kern::join_groups(act_tok, bel_tok, n);
    Tensor enc = nn::transformer_forward(b, oi_head_, tokens, n + 1);
    Tensor acts = kern::group_head(enc, n);
    Tensor bel = kern::group_tail(enc, n);
    logits_out = kern::matmul(acts, ps_.value(actor_.w)).reshaped({1, n});
    for (int64_t i = 0; i < n; ++i) logits_out[i] += ps_.value(actor_.b)[0];
    value_out = kern::add_rowvec(kern::matmul(bel, ps_.value(critic_.w)), ps_.value(critic_.b))[0];
  }

  // Current action embeddings as seen by the head (for contract tests).
  Tensor embeddings_of(const RecurrentState& st) {
    if (!has_bank()) throw std::logic_error("embeddings_of: variant has no bank");
    Eager b{&ps_};
    std::vector<RecurrentState> one{st};
    Tensor bank = gather_bank(one);
    std::vector<uint8_t> executed(st.executed);
    return assemble_embeddings(b, bank, cold_embedding(b), executed, 1);
  }

 private:
  struct StepOut {
    Tensor logits, value, belief, bank;
  };

  struct StepIo {
    Tensor obs_norm;
    Tensor prev_obs_norm;
    std::vector<int> prev_action;
    std::vector<uint8_t> executed;  // E*n snapshot after marking prev_action
  };

  Tensor normalize(const Tensor& obs) const {
    Tensor out = obs.clone();
    const int64_t d = task_.obs_dim;
    for (int64_t r = 0; r < out.rows(); ++r)
      for (int64_t c = 0; c < d; ++c) out[r * d + c] /= task_.obs_scale[c];
    return out;
  }

  Tensor gather_belief(const std::vector<RecurrentState>& states) const {
    Tensor t({static_cast<int64_t>(states.size()), dims_.belief});
    for (size_t e = 0; e < states.size(); ++e)
      std::copy_n(states[e].belief.data(), dims_.belief, t.ptr() + e * dims_.belief);
    return t;
  }

  Tensor gather_bank(const std::vector<RecurrentState>& states) const {
    if (!has_bank()) return Tensor({1, 1});
    const int64_t w = task_.action_count * dims_.memory;
    Tensor t({static_cast<int64_t>(states.size()), w});
    for (size_t e = 0; e < states.size(); ++e)
      std::copy_n(states[e].bank.data(), w, t.ptr() + e * w);
    return t;
  }

  StepIo step_io_from_states(const Tensor& obs, std::vector<RecurrentState>& states) const {
    StepIo io;
    io.obs_norm = normalize(obs);
    Tensor prev({obs.rows(), task_.obs_dim});
    io.executed.assign(states.size() * task_.action_count, 0);
    io.prev_action.resize(states.size());
    for (size_t e = 0; e < states.size(); ++e) {
      std::copy_n(states[e].prev_obs.data(), task_.obs_dim, prev.ptr() + e * task_.obs_dim);
      int pa = states[e].prev_action;
      if (pa == task_.end_action) pa = -1;
      io.prev_action[e] = pa;
      if (pa >= 0) states[e].executed[pa] = 1;
      std::copy_n(states[e].executed.data(), task_.action_count,
                  io.executed.data() + e * task_.action_count);
    }
    io.prev_obs_norm = normalize(prev);
    return io;
  }

  // Single-step eager forward shared by act() and bootstrap_values().
  StepOut forward_rows(Eager& b, const StepIo& io, Tensor belief, Tensor bank) {
    const int64_t E = io.obs_norm.rows();
    StepOut so;
    Tensor r = nn::mlp_forward(b, state_mlp_, io.obs_norm);
    Tensor gvec = nn::linear(
        b, goal_embed_,
        kern::slice_cols(io.obs_norm, task_.goal_offset, task_.goal_offset + task_.goal_dim));
    Tensor h = kern::concat_cols(r, gvec);

    Tensor embeddings;
    if (has_bank()) {
      Tensor rp = nn::mlp_forward(b, state_mlp_, io.prev_obs_norm);
      Tensor f = kern::concat_cols(nn::linear(b, change_proj_, kern::concat_cols(r, rp)), gvec);
      Tensor m = kern::gather_segments(bank, io.prev_action, dims_.memory);
      Tensor m_new = nn::gru_step(b, impact_gru_, f, m);
      bank = kern::scatter_segments(bank, m_new, io.prev_action);
      embeddings = assemble_embeddings(b, bank, cold_embedding(b), io.executed, E);
    } else if (variant_ == Variant::action_semantics) {
      embeddings = semantic_embeddings(b, E);
    }

    Tensor policy_embeddings = embeddings;
    if (variant_ == Variant::model_based)
      policy_embeddings = model_based_embeddings(b, embeddings, E);

    Tensor belief_in = feeds_embeddings() ? kern::concat_cols(h, policy_embeddings) : h;
    so.belief = nn::gru_step(b, belief_gru_, belief_in, belief);
    so.bank = bank;
    so.logits = head_logits(b, feeds_embeddings() ? &embeddings : nullptr, so.belief, E,
                            &so.value);
    return so;
  }

  // Cold-start embedding: the impact GRU's output on zero input and zero
  // memory, equal for every untouched action slot by construction.
  template <class B>
  typename B::V cold_embedding(const B& b) {
    auto zf = b.constant(Tensor::zeros({1, dims_.change_proj + dims_.goal_embed}));
    auto zm = b.constant(Tensor::zeros({1, dims_.memory}));
    return nn::gru_step(b, impact_gru_, zf, zm);
  }

  // E_t rows: bank rows where executed, the shared cold embedding elsewhere,
  // and the identity-keyed embedding in the End slot.
  template <class B>
  typename B::V assemble_embeddings(const B& b, typename B::V bank, typename B::V e_cold,
                                    const std::vector<uint8_t>& executed, int64_t E) {
    const int64_t n = task_.action_count, d = dims_.memory;
    Tensor mask({E, n * d}), inv({E, n * d});
    for (int64_t e = 0; e < E; ++e)
      for (int64_t i = 0; i < n; ++i) {
        const float on = executed[e * n + i] ? 1.0f : 0.0f;
        std::fill_n(mask.ptr() + e * n * d + i * d, d, on);
        std::fill_n(inv.ptr() + e * n * d + i * d, d, 1.0f - on);
      }
    auto ones = b.constant(Tensor::full({E, 1}, 1.0f));
    auto cold_rows = b.matmul(ones, b.tile_cols(e_cold, n));
    auto out = b.add(b.mul_const(bank, mask), b.mul_const(cold_rows, inv));
    if (has_end_slot()) {
      auto aoe_rows = b.matmul(ones, b.param(action_order_));
      std::vector<int> end_idx(E, task_.end_action);
      out = b.scatter_segments(out, aoe_rows, end_idx);
    }
    return out;
  }

  template <class B>
  typename B::V semantic_embeddings(const B& b, int64_t E) {
    auto ones = b.constant(Tensor::full({E, 1}, 1.0f));
    auto flat = b.reshape(b.param(action_order_), {1, task_.action_count * dims_.memory});
    return b.matmul(ones, flat);
  }

  // Model-based route: per-action predicted state changes re-embedded as the
  // action representation fed to the (linear) policy.
  template <class B>
  typename B::V model_based_embeddings(const B& b, typename B::V embeddings, int64_t E) {
    const int64_t n = task_.action_count;
    auto rows = b.reshape(embeddings, {E * n, dims_.memory});
    auto preds = nn::mlp_forward(b, fwd_head_, rows);
    auto emb = nn::linear(b, change_embed_, preds);
    return b.reshape(emb, {E, n * dims_.memory});
  }

  // Shared heads. For OI variants the tokens are the projected embeddings
  // plus the projected belief; logits come from the action tokens through a
  // weight-shared feed-forward, the value from the belief token.
  Tensor head_logits(Eager& b, const Tensor* embeddings, const Tensor& belief, int64_t S,
                     Tensor* value_out) {
    if (has_oi()) {
      const int64_t n = task_.action_count;
      Tensor act_tok = nn::linear(b, token_proj_e_, embeddings->reshaped({S * n, dims_.memory}));
      Tensor bel_tok = nn::linear(b, token_proj_b_, belief);
      Tensor enc = nn::transformer_forward(b, oi_head_, kern::join_groups(act_tok, bel_tok, n),
                                           n + 1);
      Tensor logits = nn::linear(b, actor_, kern::group_head(enc, n)).reshaped({S, n});
      *value_out = nn::linear(b, critic_, kern::group_tail(enc, n));
      return logits;
    }
    *value_out = nn::linear(b, critic_, belief);
    return nn::linear(b, actor_, belief);
  }

  Node* head_logits(Taped& b, Node* embeddings, Node* belief, int64_t S, Node** value_out) {
    if (has_oi()) {
      const int64_t n = task_.action_count;
      Node* act_tok = nn::linear(b, token_proj_e_, b.reshape(embeddings, {S * n, dims_.memory}));
      Node* bel_tok = nn::linear(b, token_proj_b_, belief);
      Node* enc = nn::transformer_forward(b, oi_head_, b.join_groups(act_tok, bel_tok, n), n + 1);
      Node* logits = b.reshape(nn::linear(b, actor_, b.group_head(enc, n)), {S, n});
      *value_out = nn::linear(b, critic_, b.group_tail(enc, n));
      return logits;
    }
    *value_out = nn::linear(b, critic_, belief);
    return nn::linear(b, actor_, belief);
  }

  Variant variant_;
  sim::TaskInfo task_;
  NetDims dims_;
  ParamStore ps_;

  nn::MlpParams state_mlp_, fwd_head_;
  nn::LinearParams goal_embed_, change_proj_, change_embed_;
  nn::GruParams impact_gru_, belief_gru_;
  nn::LinearParams token_proj_e_, token_proj_b_, actor_, critic_;
  nn::TransformerParams oi_head_;
  ParamId action_order_ = -1;
};

}  // namespace aap::policy
