#pragma once

#include <string>
#include <vector>

#include "dmk/rng.hpp"
#include "dmk/tape.hpp"

namespace dmk {

// Weights of a single LSTM cell. Gate order: input, forget, output,
// candidate. Input-to-gate matrices are [H x D], hidden-to-gate [H x H],
// biases [H]; biases start at zero.
struct LstmWeights {
    std::size_t input_size;
    std::size_t hidden_size;
    Parameter wx_i, wh_i, b_i;
    Parameter wx_f, wh_f, b_f;
    Parameter wx_o, wh_o, b_o;
    Parameter wx_c, wh_c, b_c;

    LstmWeights(std::size_t input_size_, std::size_t hidden_size_, Rng& rng,
                double init_scale = 0.1, const std::string& prefix = "lstm")
        : input_size(input_size_),
          hidden_size(hidden_size_),
          wx_i(prefix + ".wx_i", uniform_tensor({hidden_size_, input_size_}, rng, -init_scale, init_scale)),
          wh_i(prefix + ".wh_i", uniform_tensor({hidden_size_, hidden_size_}, rng, -init_scale, init_scale)),
          b_i(prefix + ".b_i", Tensor::zeros({hidden_size_})),
          wx_f(prefix + ".wx_f", uniform_tensor({hidden_size_, input_size_}, rng, -init_scale, init_scale)),
          wh_f(prefix + ".wh_f", uniform_tensor({hidden_size_, hidden_size_}, rng, -init_scale, init_scale)),
          b_f(prefix + ".b_f", Tensor::zeros({hidden_size_})),
          wx_o(prefix + ".wx_o", uniform_tensor({hidden_size_, input_size_}, rng, -init_scale, init_scale)),
          wh_o(prefix + ".wh_o", uniform_tensor({hidden_size_, hidden_size_}, rng, -init_scale, init_scale)),
          b_o(prefix + ".b_o", Tensor::zeros({hidden_size_})),
          wx_c(prefix + ".wx_c", uniform_tensor({hidden_size_, input_size_}, rng, -init_scale, init_scale)),
          wh_c(prefix + ".wh_c", uniform_tensor({hidden_size_, hidden_size_}, rng, -init_scale, init_scale)),
          b_c(prefix + ".b_c", Tensor::zeros({hidden_size_})) {}

    std::vector<Parameter*> parameters() {
        return {&wx_i, &wh_i, &b_i, &wx_f, &wh_f, &b_f,
                &wx_o, &wh_o, &b_o, &wx_c, &wh_c, &b_c};
    }
};

struct LstmState {
    Var h, c;
};

inline LstmState lstm_initial_state(Tape& t, std::size_t hidden_size) {
    return {t.constant(Tensor::zeros({hidden_size})), t.constant(Tensor::zeros({hidden_size}))};
}

// i,f,o = sigmoid gates, candidate = tanh, c' = f*c + i*cand, h' = o*tanh(c').
inline LstmState lstm_cell(Tape& t, Var x, LstmState state, LstmWeights& w) {
    auto gate = [&](Parameter& wx, Parameter& wh, Parameter& b) {
        return t.add(t.add(t.matvec(t.param(wx), x), t.matvec(t.param(wh), state.h)), t.param(b));
    };
    Var i = t.sigmoid(gate(w.wx_i, w.wh_i, w.b_i));
    Var f = t.sigmoid(gate(w.wx_f, w.wh_f, w.b_f));
    Var o = t.sigmoid(gate(w.wx_o, w.wh_o, w.b_o));
    Var cand = t.tanh(gate(w.wx_c, w.wh_c, w.b_c));
    Var c_next = t.add(t.mul(f, state.c), t.mul(i, cand));
    Var h_next = t.mul(o, t.tanh(c_next));
    return {h_next, c_next};
}

}  // namespace dmk
