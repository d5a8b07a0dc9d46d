#pragma once

// Finite-difference cases for every differentiable op, shared by the unit
// tests and the acceptance run.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "lrdet/model.hpp"
#include "support/oracles.hpp"

namespace lrdet::oracle {

constexpr int kGradInstances = 100;
constexpr double kGradTol = 1e-3;
// float32 forward against the double reference, relative to max(1, |ref|).
constexpr double kForwardTol = 1e-5;

struct GradCase {
  MultiFn f;
  RefFn ref;
  std::vector<Tensor> inputs;
};

struct NamedGradCase {
  std::string group;
  std::string name;
  std::function<GradCase(Rng&)> make;
};

struct OpCheck {
  std::string name;
  double grad_error = 0.0;     // worst over instances
  double forward_error = 0.0;  // worst over instances
  bool ok() const { return grad_error <= kGradTol && forward_error <= kForwardTol; }
};

inline std::size_t dim(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

inline std::vector<NamedGradCase> grad_cases() {
  std::vector<NamedGradCase> cs;
  auto add = [&](std::string group, std::string name, std::function<GradCase(Rng&)> make) {
    cs.push_back({std::move(group), std::move(name), std::move(make)});
  };

  add("elementwise", "add", [](Rng& rng) {
    Shape s{dim(rng, 1, 4), dim(rng, 1, 5)};
    return GradCase{[](auto v) { return ops::add(v[0], v[1]); }, [](const auto& v) { return ref::add(v[0], v[1]); },
                    {random_tensor(s, rng), random_tensor(s, rng)}};
  });
  add("elementwise", "sub", [](Rng& rng) {
    Shape s{dim(rng, 1, 4), dim(rng, 1, 5)};
    return GradCase{[](auto v) { return ops::sub(v[0], v[1]); }, [](const auto& v) { return ref::sub(v[0], v[1]); },
                    {random_tensor(s, rng), random_tensor(s, rng)}};
  });
  add("elementwise", "mul", [](Rng& rng) {
    Shape s{dim(rng, 1, 4), dim(rng, 1, 5)};
    return GradCase{[](auto v) { return ops::mul(v[0], v[1]); }, [](const auto& v) { return ref::mul(v[0], v[1]); },
                    {random_tensor(s, rng), random_tensor(s, rng)}};
  });
  add("elementwise", "mul scalar", [](Rng& rng) {
    Shape s{dim(rng, 1, 4), dim(rng, 1, 5)};
    return GradCase{[](auto v) { return ops::mul(v[0], v[1]); }, [](const auto& v) { return ref::mul(v[0], v[1]); },
                    {random_tensor(s, rng), random_tensor({1}, rng)}};
  });
  add("elementwise", "scale", [](Rng& rng) {
    const float k = rng.uniform(-3, 3);
    return GradCase{[k](auto v) { return ops::scale(v[0], k); }, [k](const auto& v) { return ref::scale(v[0], k); },
                    {random_tensor({dim(rng, 1, 6)}, rng)}};
  });
  add("elementwise", "square", [](Rng& rng) {
    return GradCase{[](auto v) { return ops::square(v[0]); }, [](const auto& v) { return ref::square(v[0]); },
                    {random_tensor({dim(rng, 1, 3), dim(rng, 1, 6)}, rng)}};
  });
  add("elementwise", "relu", [](Rng& rng) {
    return GradCase{[](auto v) { return ops::relu(v[0]); }, [](const auto& v) { return ref::relu(v[0]); },
                    {away_from_zero({dim(rng, 1, 3), dim(rng, 1, 6)}, rng)}};
  });
  add("elementwise", "log", [](Rng& rng) {
    return GradCase{[](auto v) { return ops::log(v[0]); }, [](const auto& v) { return ref::log(v[0]); },
                    {random_tensor({dim(rng, 1, 3), dim(rng, 1, 6)}, rng, 0.5f, 2.0f)}};
  });

  add("linear_algebra", "matmul", [](Rng& rng) {
    const std::size_t m = dim(rng, 1, 4), k = dim(rng, 1, 5), n = dim(rng, 1, 4);
    return GradCase{[](auto v) { return ops::matmul(v[0], v[1]); },
                    [](const auto& v) { return ref::matmul(v[0], v[1]); },
                    {random_tensor({m, k}, rng), random_tensor({k, n}, rng)}};
  });
  add("linear_algebra", "linear", [](Rng& rng) {
    const std::size_t b = dim(rng, 1, 4), in = dim(rng, 1, 6), out = dim(rng, 1, 5);
    return GradCase{[](auto v) { return ops::linear(v[0], v[1], v[2]); },
                    [](const auto& v) { return ref::linear(v[0], v[1], v[2]); },
                    {random_tensor({b, in}, rng), random_tensor({in, out}, rng), random_tensor({out}, rng)}};
  });

  for (auto pad : {ops::Padding::same, ops::Padding::valid}) {
    const bool same = pad == ops::Padding::same;
    add("conv2d", same ? "conv2d same" : "conv2d valid", [pad, same](Rng& rng) {
      const std::size_t b = dim(rng, 1, 2), c = dim(rng, 1, 2), o = dim(rng, 1, 3), h = dim(rng, 3, 6),
                        w = dim(rng, 3, 6);
      const std::size_t k = same ? 3 : (rng.below(2) ? 3 : 1);
      return GradCase{[pad](auto v) { return ops::conv2d(v[0], v[1], v[2], pad); },
                      [same](const auto& v) { return ref::conv2d(v[0], v[1], v[2], same); },
                      {random_tensor({b, c, h, w}, rng), random_tensor({o, c, k, k}, rng), random_tensor({o}, rng)}};
    });
  }

  add("max_pool", "max_pool2x2", [](Rng& rng) {
    return GradCase{[](auto v) { return ops::max_pool2x2(v[0]); },
                    [](const auto& v) { return ref::max_pool2x2(v[0]); },
                    {distinct_values({dim(rng, 1, 2), dim(rng, 1, 2), 2 * dim(rng, 1, 3), 2 * dim(rng, 1, 3)}, rng)}};
  });

  add("row_ops", "softmax", [](Rng& rng) {
    return GradCase{[](auto v) { return ops::softmax(v[0]); }, [](const auto& v) { return ref::softmax(v[0]); },
                    {random_tensor({dim(rng, 1, 4), dim(rng, 2, 10)}, rng, -3, 3)}};
  });
  add("row_ops", "log_softmax", [](Rng& rng) {
    return GradCase{[](auto v) { return ops::log_softmax(v[0]); },
                    [](const auto& v) { return ref::log_softmax(v[0]); },
                    {random_tensor({dim(rng, 1, 4), dim(rng, 2, 10)}, rng, -3, 3)}};
  });
  add("row_ops", "pick", [](Rng& rng) {
    const std::size_t b = dim(rng, 1, 5), k = dim(rng, 2, 8);
    std::vector<std::uint32_t> idx(b);
    for (auto& i : idx) i = static_cast<std::uint32_t>(rng.below(k));
    return GradCase{[idx](auto v) { return ops::pick(v[0], idx); },
                    [idx](const auto& v) { return ref::pick(v[0], idx); }, {random_tensor({b, k}, rng)}};
  });

  add("reductions", "sum", [](Rng& rng) {
    return GradCase{[](auto v) { return ops::sum(v[0]); }, [](const auto& v) { return ref::sum(v[0]); },
                    {random_tensor({dim(rng, 1, 4), dim(rng, 1, 6)}, rng)}};
  });
  add("reductions", "mean", [](Rng& rng) {
    return GradCase{[](auto v) { return ops::mean(v[0]); }, [](const auto& v) { return ref::mean(v[0]); },
                    {random_tensor({dim(rng, 1, 4), dim(rng, 1, 6)}, rng)}};
  });
  add("reductions", "row_mean", [](Rng& rng) {
    return GradCase{[](auto v) { return ops::row_mean(v[0]); }, [](const auto& v) { return ref::row_mean(v[0]); },
                    {random_tensor({dim(rng, 1, 4), dim(rng, 1, 3), dim(rng, 1, 3)}, rng)}};
  });

  add("shape_ops", "reshape", [](Rng& rng) {
    const std::size_t a = dim(rng, 1, 4), b = dim(rng, 1, 4);
    return GradCase{[a, b](auto v) { return ops::square(ops::reshape(v[0], {b, a})); },
                    [a, b](const auto& v) { return ref::square(ref::reshape(v[0], {b, a})); },
                    {random_tensor({a, b}, rng)}};
  });
  add("shape_ops", "flatten", [](Rng& rng) {
    return GradCase{[](auto v) { return ops::square(ops::flatten(v[0])); },
                    [](const auto& v) { return ref::square(ref::flatten(v[0])); },
                    {random_tensor({dim(rng, 1, 3), dim(rng, 1, 3), dim(rng, 1, 3)}, rng)}};
  });
  add("shape_ops", "slice_cols", [](Rng& rng) {
    const std::size_t l = dim(rng, 2, 8), begin = rng.below(l - 1), end = begin + 1 + rng.below(l - begin - 1);
    return GradCase{[begin, end](auto v) { return ops::square(ops::slice_cols(v[0], begin, end)); },
                    [begin, end](const auto& v) { return ref::square(ref::slice_cols(v[0], begin, end)); },
                    {random_tensor({dim(rng, 1, 3), l}, rng)}};
  });
  add("shape_ops", "concat_cols", [](Rng& rng) {
    const std::size_t b = dim(rng, 1, 3);
    return GradCase{[](auto v) { return ops::square(ops::concat_cols(std::vector<Var>(v.begin(), v.end()))); },
                    [](const auto& v) { return ref::square(ref::concat_cols(v)); },
                    {random_tensor({b, dim(rng, 1, 4)}, rng), random_tensor({b, dim(rng, 1, 4)}, rng),
                     random_tensor({b, dim(rng, 1, 4)}, rng)}};
  });

  add("composite", "mlp cross-entropy", [](Rng& rng) {
    const std::size_t b = dim(rng, 1, 4), in = dim(rng, 2, 6), h1 = dim(rng, 2, 6), h2 = dim(rng, 2, 6),
                      k = dim(rng, 2, 5);
    std::vector<std::uint32_t> labels(b);
    for (auto& l : labels) l = static_cast<std::uint32_t>(rng.below(k));
    MultiFn f = [labels](std::span<const Var> v) {
      Var h = ops::relu(ops::linear(v[0], v[1], v[2]));
      h = ops::relu(ops::linear(h, v[3], v[4]));
      return ops::mean(cross_entropy(ops::linear(h, v[5], v[6]), labels));
    };
    RefFn r = [labels](const std::vector<DT>& v) {
      DT h = ref::relu(ref::linear(v[0], v[1], v[2]));
      h = ref::relu(ref::linear(h, v[3], v[4]));
      return ref::mean(ref::cross_entropy(ref::linear(h, v[5], v[6]), labels));
    };
    // Resample until no hidden pre-activation sits near the relu kink.
    for (;;) {
      std::vector<Tensor> in_t{random_tensor({b, in}, rng), random_tensor({in, h1}, rng), random_tensor({h1}, rng),
                               random_tensor({h1, h2}, rng), random_tensor({h2}, rng),    random_tensor({h2, k}, rng),
                               random_tensor({k}, rng)};
      const Tensor z1 = ops::linear(Var(in_t[0]), Var(in_t[1]), Var(in_t[2])).value();
      const Tensor z2 = ops::linear(ops::relu(Var(z1)), Var(in_t[3]), Var(in_t[4])).value();
      auto clear = [](const Tensor& z) {
        for (float v : z.data())
          if (std::abs(v) < 0.02f) return false;
        return true;
      };
      if (clear(z1) && clear(z2)) return GradCase{f, r, in_t};
    }
  });
  return cs;
}

inline OpCheck run_gradcheck(const NamedGradCase& c, Rng& rng, int instances = kGradInstances) {
  OpCheck r{c.name};
  for (int i = 0; i < instances; ++i) {
    GradCase g = c.make(rng);
    const auto e = gradcheck(g.f, g.ref, g.inputs, rng);
    r.grad_error = std::max(r.grad_error, e.grad_error);
    r.forward_error = std::max(r.forward_error, e.forward_error);
  }
  return r;
}

}  // namespace lrdet::oracle
