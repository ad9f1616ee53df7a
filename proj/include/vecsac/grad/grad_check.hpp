#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "vecsac/grad/network.hpp"

namespace vecsac {

struct BlockError {
  std::size_t group = 0;  // which network / parameter group
  std::size_t block = 0;
  double max_rel_error = 0;
  double analytic = 0;  // values at the worst entry
  double numeric = 0;
};

struct GradCheckReport {
  std::vector<BlockError> blocks;
  double max_rel_error = 0;
  double tolerance = 0;
  std::size_t nonsmooth = 0;
  bool passed() const { return max_rel_error < tolerance; }
};

/// |a - n| / max(|a|, |n|, floor). The floor keeps gradients that are
/// zero up to rounding from dominating the report.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct FdOptions {
  double step = 1e-5;
  double floor = 1e-6;
  bool five_point = false;  // fourth-order stencil instead of the two-point one
  // When > 0, each entry is also differenced at step/2; entries whose two
  // estimates disagree by more than this (relative) straddle a kink and are
  // counted in `nonsmooth` instead of the error.
  double smoothness = 0;
};

/// Compares the gradients already accumulated in `groups` against central
/// differences of `loss()`. `loss` must recompute from scratch (no cached
/// tapes) and must not touch the gradients.
template <typename Scalar, typename LossFn>
GradCheckReport check_block_gradients(std::span<const std::vector<ParamBlock<Scalar>*>> groups,
                                      LossFn&& loss, double tolerance, FdOptions fd = {}) {
  const double step = fd.step;
  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (std::size_t bi = 0; bi < groups[g].size(); ++bi) {
      ParamBlock<Scalar>& b = *groups[g][bi];
      BlockError err{g, bi, 0};
      for (Index k = 0; k < b.size(); ++k) {
        const double analytic = static_cast<double>(b.grad(k));
        Scalar& p = b.param(k);
        const Scalar saved = p;
        auto at = [&](double offset) {
          p = saved + Scalar(offset);
          const double v = static_cast<double>(loss());
          p = saved;
          return v;
        };
        auto derivative = [&](double h) {
          if (fd.five_point) return (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
          return (at(h) - at(-h)) / (2 * h);
        };
        const double numeric = derivative(step);
        if (fd.smoothness > 0 && relative_error(numeric, derivative(step / 2), fd.floor) > fd.smoothness) {
          ++report.nonsmooth;
          continue;
        }
        const double e = relative_error(analytic, numeric, fd.floor);
        if (e >= err.max_rel_error) err = {g, bi, e, analytic, numeric};
      }
      report.max_rel_error = std::max(report.max_rel_error, err.max_rel_error);
      report.blocks.push_back(err);
    }
  }
  return report;
}

template <typename Scalar>
std::vector<ParamBlock<Scalar>*> param_blocks(Network<Scalar>& net) {
  std::vector<ParamBlock<Scalar>*> out;
  for (std::size_t i = 0; i < net.block_count(); ++i) out.push_back(&net.block_mut(i));
  return out;
}

/// Network-level convenience over check_block_gradients.
template <typename Scalar, typename LossFn>
GradCheckReport check_gradients(std::span<Network<Scalar>* const> nets, LossFn&& loss,
                                double tolerance, FdOptions fd = {}) {
  std::vector<std::vector<ParamBlock<Scalar>*>> groups;
  for (auto* n : nets) groups.push_back(param_blocks(*n));
  return check_block_gradients<Scalar>(std::span<const std::vector<ParamBlock<Scalar>*>>(groups),
                                       loss, tolerance, fd);
}

/// Gradient check of a single network under the objective sum(C .* f(x)),
/// with C a fixed pseudo-random projection.
template <typename Scalar>
GradCheckReport grad_check(Network<Scalar>& net, const Matrix<Scalar>& input, double tolerance,
                           std::uint64_t seed = 7, FdOptions fd = {}) {
  Rng rng(seed);
  const Matrix<Scalar> proj = standard_normal<Scalar>(input.rows(), net.output_dim(), rng);
  net.zero_grad();
  Tape<Scalar> tape;
  net.forward(input, &tape);
  net.backward(tape, proj);
  auto loss = [&] { return (net.forward(input).array() * proj.array()).sum(); };
  Network<Scalar>* nets[] = {&net};
  auto report = check_gradients<Scalar>(std::span<Network<Scalar>* const>(nets), loss, tolerance, fd);
  net.zero_grad();
  return report;
}

}  // namespace vecsac
