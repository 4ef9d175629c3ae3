#pragma once

#include <functional>

#include "rcnls/types.hpp"

//! Scalar statistics helpers shared by the decomposition, likelihood and
//! simulation code: stable normal tail functions, sample moments and
//! linear-interpolation quantiles.
namespace rcnls::stats {

//! Standard normal density.
double norm_pdf(double x);

//! Standard normal CDF via erfc (accurate in both tails).
double norm_cdf(double x);

//! log Phi(x), stable for arbitrarily negative x.
double log_norm_cdf(double x);

//! Upper-tail inverse Mills ratio phi(t) / (1 - Phi(t)).
double mills_upper(double t);

double mean(ConstVectorRef v);

//! k-th central moment with 1/n normalization.
double central_moment(ConstVectorRef v, int k);

//! Linear-interpolation sample quantile (the `(n-1)q` convention); q in [0,1].
double quantile(ConstVectorRef v, double q);

//! Golden-section maximizer on [lo, hi] with a parabolic polish step.
//! Returns the argmax; `iters` bounds the golden-section phase.
double golden_section_max(const std::function<double(double)>& f, double lo,
                          double hi, double tol = 1e-10, int iters = 200);

} // namespace rcnls::stats
