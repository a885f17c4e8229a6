#include "nncl/metrics.hpp"

#include <cmath>
#include <string>

namespace nncl::metrics {

namespace {

void check_pair(const VecRef& y, const VecRef& y_hat, const char* name)
{
    require(y.size() == y_hat.size(), std::string(name) + ": length mismatch ("
                                          + std::to_string(y.size()) + " vs "
                                          + std::to_string(y_hat.size()) + ")");
    require(y.size() > 0, std::string(name) + ": empty input");
}

} // namespace

double mse(const VecRef& y, const VecRef& y_hat)
{
    check_pair(y, y_hat, "mse");
    return (y - y_hat).squaredNorm() / double(y.size());
}

double mae(const VecRef& y, const VecRef& y_hat)
{
    check_pair(y, y_hat, "mae");
    return (y - y_hat).cwiseAbs().sum() / double(y.size());
}

double smape(const VecRef& y, const VecRef& y_hat)
{
    check_pair(y, y_hat, "smape");
    double acc = 0.0;
    for (Index h = 0; h < y.size(); ++h) {
        const double denom = std::abs(y[h]) + std::abs(y_hat[h]);
        require(denom > 0.0, "smape: zero denominator at index " + std::to_string(h));
        acc += std::abs(y[h] - y_hat[h]) / denom;
    }
    return 200.0 * acc / double(y.size());
}

double mape(const VecRef& y, const VecRef& y_hat)
{
    check_pair(y, y_hat, "mape");
    double acc = 0.0;
    for (Index h = 0; h < y.size(); ++h) {
        require(y[h] != 0.0, "mape: zero target at index " + std::to_string(h));
        acc += std::abs(y[h] - y_hat[h]) / std::abs(y[h]);
    }
    return 100.0 * acc / double(y.size());
}

double mase(const VecRef& y, const VecRef& y_hat, Index period)
{
    check_pair(y, y_hat, "mase");
    const Index H = y.size();
    require(period >= 1, "mase: period must be positive");
    require(H > period, "mase: horizon must exceed the seasonal period");
    double scale = 0.0;
    for (Index j = period; j < H; ++j)
        scale += std::abs(y[j] - y[j - period]);
    scale /= double(H - period);
    require(scale > 0.0, "mase: zero denominator (seasonal differences vanish)");
    return (y - y_hat).cwiseAbs().sum() / double(H) / scale;
}

double mase_history(const VecRef& y, const VecRef& y_hat, const VecRef& history, Index period)
{
    check_pair(y, y_hat, "mase_history");
    require(period >= 1, "mase_history: period must be positive");
    require(history.size() > period, "mase_history: history must exceed the seasonal period");
    double scale = 0.0;
    for (Index j = period; j < history.size(); ++j)
        scale += std::abs(history[j] - history[j - period]);
    scale /= double(history.size() - period);
    require(scale > 0.0, "mase_history: zero denominator (seasonal differences vanish)");
    return (y - y_hat).cwiseAbs().sum() / double(y.size()) / scale;
}

double owa(double smape_value, double mase_value, double smape_naive2, double mase_naive2)
{
    require(smape_naive2 > 0.0 && mase_naive2 > 0.0, "owa: reference values must be positive");
    return 0.5 * (smape_value / smape_naive2 + mase_value / mase_naive2);
}

Eigen::VectorXd seasonal_naive(const VecRef& history, Index period, Index horizon)
{
    require(period >= 1, "seasonal_naive: period must be positive");
    require(horizon >= 0, "seasonal_naive: negative horizon");
    require(history.size() >= period, "seasonal_naive: history of "
                                          + std::to_string(history.size())
                                          + " steps is shorter than the period "
                                          + std::to_string(period));
    const Index base = history.size() - period;
    Eigen::VectorXd out(horizon);
    for (Index h = 0; h < horizon; ++h)
        out[h] = history[base + h % period];
    return out;
}

} // namespace nncl::metrics
