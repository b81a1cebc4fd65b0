#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "liquid_s4/ssm_core.hpp"

namespace liquid_s4 {

/// One summand of the unrolled liquid recurrence. Starting from b u_start,
/// every later step j <= k either applies A_bar or multiplies elementwise by
/// b u_j; `inputs` lists the samples that entered the product.
struct ExpansionTerm {
  std::size_t start = 0;
  std::vector<std::size_t> inputs;
  double value = 0.0;  // Re(c^H v) times the input product

  int order() const { return static_cast<int>(inputs.size()); }
  bool consecutive() const {
    for (std::size_t i = 1; i < inputs.size(); ++i)
      if (inputs[i] != inputs[i - 1] + 1) return false;
    return true;
  }
  /// number of A_bar factors applied after the last input, for consecutive terms
  std::size_t lag(std::size_t k) const { return k - inputs.back(); }
};

/// Enumerates every 2-coloring of the unrolled product at output index k.
/// Uses dense operators only. Cost O(2^k), so keep k small.
inline std::vector<ExpansionTerm> expand_liquid_output(const DiscreteSystem& d, std::span<const double> u,
                                                       std::size_t k) {
  if (k >= u.size() || k > 20) throw Error(ErrorKind::OracleGuard, "expansion index out of range (k <= 20)");
  std::vector<ExpansionTerm> terms;
  for (std::size_t start = 0; start <= k; ++start) {
    const std::size_t steps = k - start;
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << steps); ++mask) {
      ExpansionTerm term;
      term.start = start;
      term.inputs.push_back(start);
      ComplexVec v = d.b_bar;
      double weight = u[start];
      for (std::size_t s = 0; s < steps; ++s) {
        const std::size_t j = start + 1 + s;
        if (mask & (std::uint64_t{1} << s)) {
          v = d.b_bar.cwiseProduct(v);
          weight *= u[j];
          term.inputs.push_back(j);
        } else {
          v = d.a_bar * v;
        }
      }
      term.value = d.c_bar.dot(v).real() * weight;
      terms.push_back(std::move(term));
    }
  }
  return terms;
}

inline double sum_terms(const std::vector<ExpansionTerm>& terms) {
  double acc = 0.0;
  for (const auto& t : terms) acc += t.value;
  return acc;
}

}  // namespace liquid_s4
