#include "updp/gradcheck.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "updp/encoders.hpp"
#include "updp/rng.hpp"

namespace updp {

GradcheckReport run_gradcheck(const GradcheckOptions& options) {
  if (options.instances == 0) throw std::invalid_argument("gradcheck needs at least one instance");
  GradcheckReport report;
  for (std::size_t i = 0; i < options.instances; ++i) {
    Rng rng = make_rng(options.seed, i);
    const ReferenceEncoder enc(options.dim, 2, rng());
    SoftPrompt prompt = random_prompt(options.length, options.dim, rng());
    std::normal_distribution<double> normal(0.0, 1.0);
    FeatureVec target(static_cast<Eigen::Index>(options.dim));
    for (Eigen::Index d = 0; d < target.size(); ++d) target(d) = normal(rng);
    target.normalize();

    Matrix analytic = alignment_grad(prompt, target, enc);
    if (options.inject_bug) analytic *= static_cast<double>(options.length);

    double worst = 0.0;
    double scale = analytic.cwiseAbs().maxCoeff();
    for (Eigen::Index r = 0; r < prompt.values.rows(); ++r) {
      for (Eigen::Index c = 0; c < prompt.values.cols(); ++c) {
        const double saved = prompt.values(r, c);
        prompt.values(r, c) = saved + options.step;
        const double up = alignment_loss(prompt, target, enc);
        prompt.values(r, c) = saved - options.step;
        const double down = alignment_loss(prompt, target, enc);
        prompt.values(r, c) = saved;
        const double numeric = (up - down) / (2.0 * options.step);
        worst = std::max(worst, std::abs(analytic(r, c) - numeric));
        scale = std::max(scale, std::abs(numeric));
      }
    }
    const double rel = scale > 0.0 ? worst / scale : worst;
    report.relative_errors.push_back(rel);
    report.max_relative_error = std::max(report.max_relative_error, rel);
    if (!(rel < options.tolerance)) ++report.failures;
  }
  return report;
}

}  // namespace updp
