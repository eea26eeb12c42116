#pragma once

// Straight-line re-implementation of the model with plain loops over raw
// arrays. It shares parameter storage with the library and nothing else, so
// it serves as an oracle for the tensor-based code paths.

#include <algorithm>
#include <cmath>
#include <vector>

#include "anlf/model.hpp"

namespace anlf::reference {

using Vec = std::vector<double>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// rows×cols weight times vector.
inline Vec matvec(const Tensor& w, const Vec& x) {
  const std::size_t rows = w.rows(), cols = w.cols();
  Vec out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += w.at(r, c) * x[c];
    out[r] = s;
  }
  return out;
}

inline Vec softmax(const Vec& v) {
  const double top = *std::max_element(v.begin(), v.end());
  Vec out(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) total += (out[i] = std::exp(v[i] - top));
  for (auto& o : out) o /= total;
  return out;
}

inline Vec join(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline Vec values_of(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

struct State {
  Vec h, c;
};

/// Gate equations evaluated one scalar at a time.
inline State lstm_step(const LstmParams& p, const State& prev, const Vec& x) {
  const std::size_t hs = p.hidden_size(), d = p.input_width();
  State next{Vec(hs), Vec(hs)};
  for (std::size_t r = 0; r < hs; ++r) {
    double zi = p.b_ix[r] + p.b_ih[r], zf = p.b_fx[r] + p.b_fh[r];
    double zg = p.b_gx[r] + p.b_gh[r], zo = p.b_ox[r] + p.b_oh[r];
    for (std::size_t k = 0; k < d; ++k) {
      zi += p.w_ix.at(r, k) * x[k];
      zf += p.w_fx.at(r, k) * x[k];
      zg += p.w_gx.at(r, k) * x[k];
      zo += p.w_ox.at(r, k) * x[k];
    }
    for (std::size_t k = 0; k < hs; ++k) {
      zi += p.w_ih.at(r, k) * prev.h[k];
      zf += p.w_fh.at(r, k) * prev.h[k];
      zg += p.w_gh.at(r, k) * prev.h[k];
      zo += p.w_oh.at(r, k) * prev.h[k];
    }
    const double i = sigmoid(zi), f = sigmoid(zf), g = std::tanh(zg), o = sigmoid(zo);
    next.c[r] = f * prev.c[r] + i * g;
    next.h[r] = o * std::tanh(next.c[r]);
  }
  return next;
}

inline Vec feature_weights(const FeatureAttentionParams& p, const Vec& query, const Vec& x, double y) {
  Vec in = join(query, x);
  in.push_back(y);
  Vec hidden = matvec(p.w_e, in);
  for (auto& v : hidden) v = std::tanh(v);
  return softmax(matvec(p.v_e, hidden));
}

inline Vec temporal_weights(const TemporalAttentionParams& p, const Vec& query, const Vec& x) {
  Vec hidden = matvec(p.w_d, join(query, x));
  for (auto& v : hidden) v = std::tanh(v);
  return softmax(matvec(p.v_d, hidden));
}

inline Vec day_weights(const std::vector<Tensor>& days, const Tensor& future) {
  Vec inv;
  for (const auto& day : days) {
    double dist = 0.0;
    for (std::size_t k = 0; k < future.cols(); ++k) {
      double sq = 0.0;
      for (std::size_t j = 0; j < future.rows(); ++j) sq += std::pow(day.at(j, k) - future.at(j, k), 2);
      dist += std::sqrt(sq);
    }
    inv.push_back(std::min(1.0 / (dist + 1e-8), 1e8));
  }
  return softmax(inv);
}

struct Output {
  Vec forecast;
  std::vector<Vec> encoder_states;  // T_h rows of width 2hs
  std::vector<Vec> alphas;
  std::vector<Vec> betas;  // flat, T_h long
  Vec gamma;
  State encoder_forward_final, decoder_forward_init;
};

inline Output forward(const ModelParams& p, const ModelConfig& cfg, const WindowSample& s) {
  const std::size_t th = cfg.history_len(), tf = cfg.horizon(), hs = cfg.direction_hidden();
  Output out;

  // encoder, forward direction with feature attention
  std::vector<Vec> enc_in(th);
  std::vector<State> fwd(th);
  State st{Vec(hs, 0.0), Vec(hs, 0.0)};
  for (std::size_t t = 0; t < th; ++t) {
    Vec x = values_of(s.x_hist.row(t));
    const double y = s.y_hist[t];
    if (p.feature_attention) {
      const Vec a = feature_weights(*p.feature_attention, join(st.h, st.c), x, y);
      for (std::size_t k = 0; k < x.size(); ++k) x[k] *= a[k];
      out.alphas.push_back(a);
    }
    x.push_back(y);
    enc_in[t] = x;
    st = lstm_step(p.encoder_forward, st, x);
    fwd[t] = st;
  }
  out.encoder_forward_final = st;
  State enc_back_final;
  std::vector<State> bwd(th);
  if (p.encoder_backward) {
    State b{Vec(hs, 0.0), Vec(hs, 0.0)};
    for (std::size_t k = th; k-- > 0;) bwd[k] = b = lstm_step(*p.encoder_backward, b, enc_in[k]);
    enc_back_final = bwd[0];
  }
  for (std::size_t t = 0; t < th; ++t) out.encoder_states.push_back(p.encoder_backward ? join(fwd[t].h, bwd[t].h) : fwd[t].h);

  // decoder
  std::vector<Vec> dec_in(tf);
  std::vector<State> dfwd(tf);
  st = out.encoder_forward_final;
  out.decoder_forward_init = st;
  if (p.temporal_attention) out.gamma = day_weights(s.x_days, s.x_future);
  for (std::size_t t = 0; t < tf; ++t) {
    Vec x = values_of(s.x_future.row(t));
    if (p.temporal_attention) {
      const Vec beta = temporal_weights(*p.temporal_attention, join(st.h, st.c), x);
      Vec context(cfg.state_width(), 0.0);
      for (std::size_t i = 0; i < cfg.history_days; ++i)
        for (std::size_t j = 0; j < cfg.hours_per_day; ++j) {
          const std::size_t pos = i * cfg.hours_per_day + j;
          for (std::size_t k = 0; k < context.size(); ++k) context[k] += out.gamma[i] * beta[pos] * out.encoder_states[pos][k];
        }
      x = join(x, context);
      out.betas.push_back(beta);
    }
    dec_in[t] = x;
    st = lstm_step(p.decoder_forward, st, x);
    dfwd[t] = st;
  }
  Vec stacked;
  if (p.decoder_backward) {
    std::vector<State> dbwd(tf);
    State b = enc_back_final;
    for (std::size_t k = tf; k-- > 0;) dbwd[k] = b = lstm_step(*p.decoder_backward, b, dec_in[k]);
    for (std::size_t t = 0; t < tf; ++t) stacked = join(stacked, join(dfwd[t].h, dbwd[t].h));
  } else {
    for (std::size_t t = 0; t < tf; ++t) stacked = join(stacked, dfwd[t].h);
  }
  Vec hidden = matvec(p.head.w_y, stacked);
  for (auto& v : hidden) v = std::max(v, 0.0);
  out.forecast = matvec(p.head.v_y, hidden);
  return out;
}

}  // namespace anlf::reference
