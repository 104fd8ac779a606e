#include "mrst/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "mrst/rng.hpp"

namespace mrst {

namespace {

double eval_scalar(const TensorFn& f, std::vector<Tensor<double>>& inputs) {
  Tape<double> tape;
  Tensor<double> out = f(tape, inputs);
  if (out.numel() != 1)
    throw ArgumentError("grad_check: function must be scalar-valued");
  const double v = out.value();
  if (!std::isfinite(v))
    throw EvaluationError("grad_check: non-finite function value");
  return v;
}

}  // namespace

GradCheckReport grad_check(const TensorFn& f,
                           std::vector<Tensor<double>> inputs, double h,
                           double tol) {
  GradCheckReport report;
  report.tolerance = tol;

  // Analytic pass on the original inputs.
  std::vector<std::vector<double>> analytic(inputs.size());
  {
    Tape<double> tape;
    Tensor<double> loss = f(tape, inputs);
    if (loss.numel() != 1)
      throw ArgumentError("grad_check: function must be scalar-valued");
    if (!std::isfinite(loss.value()))
      throw EvaluationError("grad_check: non-finite function value");
    tape.backward(loss);
    for (size_t i = 0; i < inputs.size(); ++i) {
      if (!inputs[i].requires_grad()) continue;
      analytic[i].assign(inputs[i].numel(), 0.0);
      if (inputs[i].has_grad()) {
        auto g = inputs[i].grad();
        analytic[i].assign(g.begin(), g.end());
      }
      inputs[i].clear_grad();
    }
  }

  // Numeric pass: nudge one coordinate at a time on detached clones.
  std::vector<Tensor<double>> probe;
  probe.reserve(inputs.size());
  for (const auto& t : inputs) probe.push_back(t.detached());

  for (size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) continue;
    auto values = probe[i].data();
    for (int64_t j = 0; j < inputs[i].numel(); ++j) {
      const double saved = values[j];
      values[j] = saved + h;
      const double fp = eval_scalar(f, probe);
      values[j] = saved - h;
      const double fm = eval_scalar(f, probe);
      values[j] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[i][static_cast<size_t>(j)];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1.0});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst_input = static_cast<int>(i);
        report.worst_coord = j;
      }
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

namespace {

constexpr double kStep = 1e-6;

Tensor<double> random_tensor(Shape shape, RngStream& rng, double lo = -2.0,
                             double hi = 2.0, bool requires_grad = true) {
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor<double>::from_data(std::move(shape), std::move(v),
                                   requires_grad);
}

// Keeps values away from |x| < margin (activation kinks, l1 ties).
Tensor<double> random_tensor_away_from_zero(Shape shape, RngStream& rng,
                                            double margin) {
  auto t = random_tensor(std::move(shape), rng);
  for (auto& x : t.data()) {
    if (std::abs(x) < margin) x = x < 0 ? x - margin : x + margin;
  }
  return t;
}

GradCheckReport worst(GradCheckReport acc, const GradCheckReport& r) {
  if (r.max_rel_err > acc.max_rel_err) {
    acc.max_rel_err = r.max_rel_err;
    acc.worst_input = r.worst_input;
    acc.worst_coord = r.worst_coord;
  }
  acc.pass = acc.pass && r.pass;
  return acc;
}

GradSuiteEntry run_many(const std::string& name, int instances, double tol,
                        const std::function<GradCheckReport(RngStream&)>& one,
                        RngStream rng) {
  GradSuiteEntry entry;
  entry.name = name;
  entry.instances = instances;
  entry.report.pass = true;
  entry.report.tolerance = tol;
  for (int i = 0; i < instances; ++i) {
    RngStream child = rng.split(static_cast<uint64_t>(i));
    entry.report = worst(entry.report, one(child));
  }
  return entry;
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(int instances_per_op,
                                               uint64_t seed) {
  RngStream root(seed);
  std::vector<GradSuiteEntry> results;
  const int n = instances_per_op;

  results.push_back(run_many(
      "conv2d", n, 1e-6,
      [](RngStream& rng) {
        const int64_t cin = 1 + rng.uniform_int(2);
        const int64_t cout = 1 + rng.uniform_int(2);
        const int64_t k = 1 + 2 * rng.uniform_int(2);  // 1 or 3
        const int64_t h = k + rng.uniform_int(4);
        const int64_t w = k + rng.uniform_int(4);
        const int stride = 1 + static_cast<int>(rng.uniform_int(2));
        const int pad = static_cast<int>(rng.uniform_int(2));
        auto x = random_tensor({1, cin, h, w}, rng);
        auto kernel = random_tensor({cout, cin, k, k}, rng, -1.0, 1.0);
        auto bias = random_tensor({cout}, rng, -0.5, 0.5);
        return grad_check(
            [stride, pad](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.reduce_mean(
                  t.tanh(t.conv2d(in[0], in[1], in[2], stride, pad)));
            },
            {x, kernel, bias}, kStep, 1e-6);
      },
      root.split(1)));

  results.push_back(run_many(
      "upsample_nearest", n, 1e-6,
      [](RngStream& rng) {
        const int factor = 1 + static_cast<int>(rng.uniform_int(3));
        auto x = random_tensor({1, 1 + rng.uniform_int(2),
                                1 + rng.uniform_int(3), 1 + rng.uniform_int(3)},
                               rng);
        return grad_check(
            [factor](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.mse(t.upsample_nearest(in[0], factor),
                           Tensor<double>::zeros(
                               {in[0].dim(0), in[0].dim(1), in[0].dim(2) * factor,
                                in[0].dim(3) * factor}));
            },
            {x}, kStep, 1e-6);
      },
      root.split(2)));

  results.push_back(run_many(
      "instance_mean", n, 1e-5,
      [](RngStream& rng) {
        auto x = random_tensor({1 + rng.uniform_int(2), 1 + rng.uniform_int(2),
                                2 + rng.uniform_int(3), 2 + rng.uniform_int(3)},
                               rng);
        return grad_check(
            [](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.reduce_mean(t.tanh(t.spatial_mean(in[0])));
            },
            {x}, kStep, 1e-5);
      },
      root.split(3)));

  results.push_back(run_many(
      "instance_std", n, 1e-5,
      [](RngStream& rng) {
        auto x = random_tensor({1 + rng.uniform_int(2), 1 + rng.uniform_int(2),
                                2 + rng.uniform_int(3), 2 + rng.uniform_int(3)},
                               rng);
        return grad_check(
            [](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.reduce_mean(t.tanh(t.spatial_std(in[0])));
            },
            {x}, kStep, 1e-5);
      },
      root.split(4)));

  results.push_back(run_many(
      "cin", n, 1e-5,
      [](RngStream& rng) {
        const int64_t c = 1 + rng.uniform_int(3);
        auto x = random_tensor({1 + rng.uniform_int(2), c, 2 + rng.uniform_int(3),
                                2 + rng.uniform_int(3)},
                               rng);
        auto gamma = random_tensor({c}, rng, 0.5, 1.5);
        auto beta = random_tensor({c}, rng, -0.5, 0.5);
        return grad_check(
            [](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.reduce_mean(t.tanh(t.cin(in[0], in[1], in[2])));
            },
            {x, gamma, beta}, kStep, 1e-5);
      },
      root.split(5)));

  results.push_back(run_many(
      "leaky_relu", n, 1e-6,
      [](RngStream& rng) {
        const double slope = rng.uniform(0.0, 0.9);
        auto x = random_tensor_away_from_zero({2, 1, 3, 3}, rng, 0.05);
        return grad_check(
            [slope](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.reduce_mean(t.leaky_relu(in[0], slope));
            },
            {x}, kStep, 1e-6);
      },
      root.split(6)));

  results.push_back(run_many(
      "sigmoid", n, 1e-6,
      [](RngStream& rng) {
        auto x = random_tensor({1, 2, 3, 3}, rng, -4.0, 4.0);
        return grad_check(
            [](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.reduce_mean(t.sigmoid(in[0]));
            },
            {x}, kStep, 1e-6);
      },
      root.split(7)));

  results.push_back(run_many(
      "tanh", n, 1e-6,
      [](RngStream& rng) {
        auto x = random_tensor({1, 2, 3, 3}, rng, -4.0, 4.0);
        return grad_check(
            [](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.reduce_mean(t.tanh(in[0]));
            },
            {x}, kStep, 1e-6);
      },
      root.split(8)));

  results.push_back(run_many(
      "add_scale", n, 1e-6,
      [](RngStream& rng) {
        const double factor = rng.uniform(-2.0, 2.0);
        auto a = random_tensor({2, 3}, rng);
        auto b = random_tensor({2, 3}, rng);
        return grad_check(
            [factor](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.reduce_mean(t.tanh(t.add(t.scale(in[0], factor), in[1])));
            },
            {a, b}, kStep, 1e-6);
      },
      root.split(9)));

  results.push_back(run_many(
      "concat_channels", n, 1e-6,
      [](RngStream& rng) {
        const int64_t h = 2 + rng.uniform_int(3), w = 2 + rng.uniform_int(3);
        auto a = random_tensor({1, 1 + rng.uniform_int(2), h, w}, rng);
        auto b = random_tensor({1, 1 + rng.uniform_int(2), h, w}, rng);
        return grad_check(
            [](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.reduce_mean(t.tanh(t.concat_channels(in[0], in[1])));
            },
            {a, b}, kStep, 1e-6);
      },
      root.split(10)));

  results.push_back(run_many(
      "reduce_mean", n, 1e-6,
      [](RngStream& rng) {
        auto x = random_tensor({3, 4}, rng);
        return grad_check(
            [](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.reduce_mean(in[0]);
            },
            {x}, kStep, 1e-6);
      },
      root.split(11)));

  results.push_back(run_many(
      "mse", n, 1e-6,
      [](RngStream& rng) {
        auto a = random_tensor({2, 5}, rng);
        auto b = random_tensor({2, 5}, rng);
        return grad_check(
            [](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.mse(in[0], in[1]);
            },
            {a, b}, kStep, 1e-6);
      },
      root.split(12)));

  results.push_back(run_many(
      "l1", n, 1e-6,
      [](RngStream& rng) {
        auto a = random_tensor({2, 5}, rng);
        auto b = Tensor<double>::zeros({2, 5});
        // keep |a - b| away from the kink
        for (auto& v : a.data())
          if (std::abs(v) < 0.05) v += 0.1;
        return grad_check(
            [](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.l1(in[0], in[1]);
            },
            {a, b}, kStep, 1e-6);
      },
      root.split(13)));

  results.push_back(run_many(
      "bce_with_logits", n, 1e-6,
      [](RngStream& rng) {
        auto z = random_tensor({2, 4}, rng, -3.0, 3.0);
        auto t01 = random_tensor({2, 4}, rng, 0.0, 1.0, false);
        return grad_check(
            [](Tape<double>& t, std::vector<Tensor<double>>& in) {
              return t.bce_with_logits(in[0], in[1]);
            },
            {z, t01}, kStep, 1e-6);
      },
      root.split(14)));

  // Deep composite: conv -> cin -> leaky_relu -> conv(stride 2) -> cin ->
  // tanh -> upsample -> concat with the early activation -> conv -> mse.
  results.push_back(run_many(
      "composite_graph", n, 1e-4,
      [](RngStream& rng) {
        auto x = random_tensor({1, 2, 6, 6}, rng, -1.0, 1.0);
        auto k1 = random_tensor({3, 2, 3, 3}, rng, -0.7, 0.7);
        auto b1 = random_tensor({3}, rng, -0.3, 0.3);
        auto g1 = random_tensor({3}, rng, 0.5, 1.5);
        auto be1 = random_tensor({3}, rng, -0.5, 0.5);
        auto k2 = random_tensor({4, 3, 3, 3}, rng, -0.7, 0.7);
        auto b2 = random_tensor({4}, rng, -0.3, 0.3);
        auto g2 = random_tensor({4}, rng, 0.5, 1.5);
        auto be2 = random_tensor({4}, rng, -0.5, 0.5);
        auto k3 = random_tensor({1, 7, 3, 3}, rng, -0.7, 0.7);
        auto b3 = random_tensor({1}, rng, -0.3, 0.3);
        auto target = random_tensor({1, 1, 6, 6}, rng, -1.0, 1.0, false);
        return grad_check(
            [](Tape<double>& t, std::vector<Tensor<double>>& in) {
              auto h1 = t.leaky_relu(t.cin(t.conv2d(in[0], in[1], in[2], 1, 1),
                                           in[3], in[4]),
                                     0.2);
              auto h2 = t.tanh(
                  t.cin(t.conv2d(h1, in[5], in[6], 2, 1), in[7], in[8]));
              auto up = t.upsample_nearest(h2, 2);
              auto cat = t.concat_channels(up, h1);
              auto y = t.conv2d(cat, in[9], in[10], 1, 1);
              return t.mse(y, in[11]);
            },
            {x, k1, b1, g1, be1, k2, b2, g2, be2, k3, b3, target}, kStep, 1e-4);
      },
      root.split(15)));

  return results;
}

bool gradient_suite_passed(const std::vector<GradSuiteEntry>& results) {
  return std::all_of(results.begin(), results.end(),
                     [](const GradSuiteEntry& e) { return e.report.pass; });
}

}  // namespace mrst
