// Curvature of a stereographic sphere patch under grid refinement.
// usage: demo_sphere_curvature [rho]

#include <cstdio>
#include <cstdlib>

#include "rdflab/curvature.hpp"
#include "rdflab/metrics_zoo.hpp"

using namespace rdflab;

int main(int argc, char** argv) {
    const double rho = argc > 1 ? std::atof(argv[1]) : 1.0;
    const double expected = 6.0 / (rho * rho);
    std::printf("sphere radius %g, expected scal %g\n", rho, expected);
    std::printf("%8s %10s %14s %14s %12s\n", "nodes", "h", "max|scal-R|", "|Rm| at 0", "grad+hess");
    for (std::size_t nodes : {17, 33, 65, 129}) {
        const GridSpec g(3, nodes, 1.25);
        const MetricField m = sphere_patch(rho, g);
        const ScalarField s = scalar_curvature(m);
        double err = 0;
        for (std::size_t k = 0; k < g.node_count(); ++k)
            if (g.boundary_distance(k) >= 1) err = std::max(err, std::abs(s[k] - expected));
        const std::vector<double> origin{0, 0, 0};
        const auto rep = covariant_curvature_norms(m, Region(g, origin, 0.3));
        std::printf("%8zu %10.5f %14.6e %14.6f %12.4e\n", nodes, g.spacing(), err, rep.sup_rm,
                    rep.sup_grad_rm + rep.sup_hess_rm);
    }
    // |Rm|^2 = 2n(n-1)/rho^4 on the round sphere
    std::printf("exact |Rm| = %g\n", std::sqrt(12.0) / (rho * rho));
}
