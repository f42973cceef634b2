#include "fump/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace fump::num {
namespace {

double evaluate(ParameterStore& store, const LossBuilder& loss) {
    Tape tape(&store, false);
    const double v = loss(tape).value()[0];
    if (!std::isfinite(v)) throw std::runtime_error("finite_diff_check: loss is not finite");
    return v;
}

}  // namespace

GradCheckResult finite_diff_check(ParameterStore& store, const LossBuilder& loss, double step,
                                  std::size_t samples_per_param, std::uint64_t seed) {
    if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be positive");
    {
        Tape tape(&store, true);
        const Var l = loss(tape);
        if (!std::isfinite(l.value()[0])) throw std::runtime_error("finite_diff_check: loss is not finite");
        tape.backward(l);
    }
    std::mt19937_64 rng(seed);
    GradCheckResult result;
    for (std::size_t pi = 0; pi < store.size(); ++pi) {
        const std::size_t n = store.at(pi).value.size();
        std::vector<std::size_t> coords(n);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (n > samples_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(samples_per_param);
        }
        for (std::size_t c : coords) {
            double& x = store.at(pi).value[c];
            const double saved = x;
            x = saved + step;
            const double up = evaluate(store, loss);
            x = saved - step;
            const double down = evaluate(store, loss);
            x = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double analytic = store.at(pi).grad[c];
            const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
            ++result.coords_checked;
            if (err > result.max_rel_error || result.worst_param.empty()) {
                if (err >= result.max_rel_error) {
                    result.max_rel_error = err;
                    result.worst_param = store.at(pi).name;
                    result.worst_index = c;
                }
            }
        }
    }
    return result;
}

}  // namespace fump::num
