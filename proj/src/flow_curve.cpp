#include "wsub/errors.hpp"
#include "wsub/flows.hpp"
#include "wsub/geodesics.hpp"

#include <cmath>

namespace wsub {

SpaceTimePath finite_length_curve(const GridMeasure1D& y1, const GridMeasure1D& y2, const FlowCurveOptions& opts) {
    if (!(y1.axis == y2.axis)) throw DomainError("endpoints live on different grids");
    const FlowTrace f1 = ou_flow_grid(y1, opts.u, opts.theta, opts.t_end, opts.steps);
    const FlowTrace f2 = ou_flow_grid(y2, opts.u, opts.theta, opts.t_end, opts.steps);

    std::vector<GridMeasure1D> curve(f1.states.begin(), f1.states.end());
    curve.insert(curve.end(), f2.states.rbegin(), f2.states.rend());

    SpaceTimePath path;
    path.dim = 1;
    path.axis0 = y1.axis;
    path.time_steps = static_cast<int>(curve.size()) - 1;
    const double dt = 1.0 / path.time_steps;
    const auto cs = ConstraintSet::sphere(opts.u, opts.theta);
    double len = 0.0;
    path.momentum.assign(1, {});
    const Eigen::Index n = y1.size();
    for (std::size_t k = 0; k < curve.size(); ++k) {
        path.mass.push_back(curve[k].mass);
        path.constraint_residual = std::max(path.constraint_residual, cs.max_residual(curve[k]));
        if (k + 1 == curve.size()) break;
        len += w2_1d(curve[k], curve[k + 1]);
        // Interface flux from the change of the cumulative mass.
        Eigen::VectorXd m(n - 1);
        double acc = 0.0;
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            acc += curve[k + 1].mass[i] - curve[k].mass[i];
            m[i] = -acc / dt;
        }
        path.momentum[0].push_back(m);
    }
    path.action = 0.5 * len * len;
    path.converged = true;
    path.duality_gap = path.action;
    return path;
}

}  // namespace wsub
