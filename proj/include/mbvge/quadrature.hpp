#pragma once

#include <functional>

#include "mbvge/bvge.hpp"
#include "mbvge/mixture.hpp"

namespace mbvge {

/// Adaptive Gauss-Kronrod on a finite interval.
double integrate(const std::function<double(double)>& f, double a, double b, double abs_tol);

/// E[g(X1, X2)] under one component. Each region is mapped to the unit square
/// by t = (1 - exp(-lambda x))^a, which turns the component density into a
/// uniform one; the Lower/Upper split follows the diagonal, which is also the
/// only place the joint CDF is non-smooth.
double component_expectation(const BVGEParams& c,
                             const std::function<double(double, double)>& g, double abs_tol);

/// E[g(X1, X2)] under the mixture.
double mixture_expectation(const MixtureParams& params,
                           const std::function<double(double, double)>& g, double abs_tol);

struct MassBreakdown {
  double planar = 0;    // integral of the density over x1 != x2
  double diagonal = 0;  // integral of the diagonal density along x1 = x2
  double total() const { return planar + diagonal; }
};

/// Direct quadrature of the density channels in the original coordinates.
MassBreakdown component_total_mass(const BVGEParams& c);
MassBreakdown mixture_total_mass(const MixtureParams& params);

}  // namespace mbvge
