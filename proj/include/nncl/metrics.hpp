#pragma once

#include "nncl/types.hpp"

namespace nncl::metrics {

using VecRef = Eigen::Ref<const Eigen::VectorXd>;

double mse(const VecRef& y, const VecRef& y_hat);
double mae(const VecRef& y, const VecRef& y_hat);

/// 200/H * sum |y - y_hat| / (|y| + |y_hat|), in [0, 200]. Throws when a
/// term has a zero denominator; the message carries its index.
double smape(const VecRef& y, const VecRef& y_hat);

/// 100/H * sum |y - y_hat| / |y|.
double mape(const VecRef& y, const VecRef& y_hat);

/// Mean absolute error scaled by the in-window seasonal difference
/// (1/(H - s)) sum_{j>s} |y_j - y_{j-s}|. Requires H > s.
double mase(const VecRef& y, const VecRef& y_hat, Index period);

/// MASE with the scale taken from the in-sample history instead of the
/// target window, as in the M4 reference tooling.
double mase_history(const VecRef& y, const VecRef& y_hat, const VecRef& history, Index period);

/// 0.5 * (smape / smape_naive2 + mase / mase_naive2).
double owa(double smape, double mase, double smape_naive2, double mase_naive2);

/// Repeats the final seasonal cycle of `history` over `horizon` steps.
Eigen::VectorXd seasonal_naive(const VecRef& history, Index period, Index horizon);

} // namespace nncl::metrics
