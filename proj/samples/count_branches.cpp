// Classify the coupling regime and sweep the spectral multiplicity.
#include <cstdio>

#include "oscgraph/multiplicity.hpp"

using namespace oscgraph;

int main() {
    const ModelParams params{1.0, 1.0, 1.0, 1.0};
    const Regime regime = classify(params);
    std::printf("regime %s, band edge %g\n", regime_name(regime.tag), regime.edge);
    for (double lambda = 0.0; lambda <= 4.0; lambda += 0.25)
        std::printf("lambda %5.2f  multiplicity %s\n", lambda,
                    to_string(mult_two_osc(lambda, params)).c_str());
    return 0;
}
