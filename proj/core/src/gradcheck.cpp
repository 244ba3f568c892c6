#include "segmicro/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "segmicro/metrics.hpp"
#include "segmicro/rng.hpp"

namespace segmicro {

namespace {

constexpr double kStep = 1e-4;

double loss_of(Graph<double>& graph, const Tensor4<double>& input,
               const Tensor4<double>& targets) {
  return cross_entropy(graph.forward(input), targets).loss;
}

std::vector<std::size_t> pick_coords(std::size_t n, int max_coords, Rng& rng) {
  std::vector<std::size_t> coords;
  if (max_coords <= 0 || n <= static_cast<std::size_t>(max_coords)) {
    coords.resize(n);
    for (std::size_t i = 0; i < n; ++i) coords[i] = i;
    return coords;
  }
  coords.reserve(max_coords);
  for (int i = 0; i < max_coords; ++i) {
    coords.push_back(static_cast<std::size_t>(rng.index(n)));
  }
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  return coords;
}

}  // namespace

double gradcheck_relative_error(double analytic, double numeric) {
  const double scale =
      std::max({std::abs(analytic), std::abs(numeric), 1e-4});
  return std::abs(analytic - numeric) / scale;
}

std::string GradCheckReport::to_string() const {
  std::string out;
  char buf[160];
  for (const LayerCheck& layer : layers) {
    std::snprintf(buf, sizeof(buf),
                  "  %-16s max rel error %.3e (%zu coords, %zu at kinks)\n",
                  layer.name.c_str(), layer.max_rel_error,
                  layer.coords_checked, layer.coords_skipped);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "max relative error %.3e (tolerance %.1e): %s\n",
                max_rel_error, tolerance, passed ? "PASS" : "FAIL");
  out += buf;
  return out;
}

GradCheckReport gradcheck_graph(Graph<double>& graph,
                                const Tensor4<double>& input,
                                const Tensor4<double>& targets,
                                double tolerance, int max_coords_per_layer,
                                std::uint64_t seed) {
  GradCheckReport report;
  report.tolerance = tolerance;

  const Tensor4<double> probs = graph.forward(input);
  const auto ce = cross_entropy(probs, targets);
  const Gradients<double> analytic = graph.backward(input, ce.grad);

  Rng rng(seed);
  for (std::size_t pi = 0; pi < graph.num_params(); ++pi) {
    LayerCheck check;
    check.name = graph.param_name(pi);

    // Kernel coordinates, then bias coordinates beyond the kernel size.
    ConvParams<double>& p = graph.param(pi);
    const std::size_t kernel_n = p.kernel.size();
    const std::size_t total = kernel_n + p.bias.size();
    const auto coords = pick_coords(total, max_coords_per_layer, rng);

    for (const std::size_t coord : coords) {
      double* value = coord < kernel_n
                          ? &p.kernel[coord]
                          : &p.bias[coord - kernel_n];
      const double saved = *value;
      *value = saved + kStep;
      const double loss_plus = loss_of(graph, input, targets);
      const std::uint64_t sig_plus = graph.activation_signature();
      *value = saved - kStep;
      const double loss_minus = loss_of(graph, input, targets);
      const std::uint64_t sig_minus = graph.activation_signature();
      *value = saved;

      if (sig_plus != sig_minus) {
        ++check.coords_skipped;
        continue;
      }
      const double numeric = (loss_plus - loss_minus) / (2.0 * kStep);
      const double a = coord < kernel_n
                           ? analytic.kernel[pi][coord]
                           : analytic.bias[pi][coord - kernel_n];
      check.max_rel_error =
          std::max(check.max_rel_error, gradcheck_relative_error(a, numeric));
      ++check.coords_checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.layers.push_back(std::move(check));
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace segmicro
