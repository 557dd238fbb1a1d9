#pragma once

#include <Eigen/Dense>

#include "cmil/nn.hpp"

namespace cmil::test {

// Flat views of network parameters for finite-difference checks.
// Order: w1 (column-major), b1, w2 (column-major), b2.

inline Eigen::Index param_count(const MlpLayout& l) {
  return static_cast<Eigen::Index>(l.hidden) * l.input + l.hidden + static_cast<Eigen::Index>(l.output) * l.hidden +
         l.output;
}

template <class P>
Eigen::VectorXd flatten(const P& p) {
  Eigen::VectorXd v(p.w1.size() + p.b1.size() + p.w2.size() + p.b2.size());
  v << Eigen::Map<const Eigen::VectorXd>(p.w1.data(), p.w1.size()), p.b1,
      Eigen::Map<const Eigen::VectorXd>(p.w2.data(), p.w2.size()), p.b2;
  return v;
}

inline MlpParams unflatten(const MlpLayout& l, const Eigen::VectorXd& v) {
  MlpParams p;
  p.layout = l;
  Eigen::Index at = 0;
  auto take = [&](Eigen::Index n) {
    Eigen::VectorXd out = v.segment(at, n);
    at += n;
    return out;
  };
  p.w1 = take(static_cast<Eigen::Index>(l.hidden) * l.input).reshaped(l.hidden, l.input);
  p.b1 = take(l.hidden);
  p.w2 = take(static_cast<Eigen::Index>(l.output) * l.hidden).reshaped(l.output, l.hidden);
  p.b2 = take(l.output);
  return p;
}

}  // namespace cmil::test
