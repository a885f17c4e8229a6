#pragma once

#include "nncl/config.hpp"
#include "nncl/model.hpp"

#include <cmath>

namespace nncl {

inline double scheduled_learning_rate(const RunConfig& cfg, Index step, Index total_steps)
{
    switch (cfg.lr_schedule) {
    case LrSchedule::constant:
        return cfg.learning_rate;
    case LrSchedule::cosine: {
        if (total_steps <= 1)
            return cfg.learning_rate;
        const double progress = std::min(1.0, double(step) / double(total_steps - 1));
        return 0.5 * cfg.learning_rate * (1.0 + std::cos(3.141592653589793 * progress));
    }
    case LrSchedule::step:
        return cfg.learning_rate * std::pow(cfg.lr_gamma, double(step / cfg.lr_step_size));
    }
    return cfg.learning_rate;
}

/// Adam with bias correction and optional decoupled weight decay. It only
/// ever sees the trainable parameter set.
template <typename Scalar>
class Adam {
public:
    Adam() = default;

    Adam(const TrainableParams<Scalar>& params, double beta1, double beta2, double eps,
         double weight_decay)
        : m_(params.zeros_like()), v_(params.zeros_like()), beta1_(beta1), beta2_(beta2),
          eps_(eps), weight_decay_(weight_decay)
    {
    }

    void step(TrainableParams<Scalar>& params, const TrainableParams<Scalar>& grads, double lr)
    {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, double(t_));
        const double c2 = 1.0 - std::pow(beta2_, double(t_));
        auto p = params.tensors();
        auto g = const_cast<TrainableParams<Scalar>&>(grads).tensors();
        auto m = m_.tensors();
        auto v = v_.tensors();
        const Scalar b1 = Scalar(beta1_), b2 = Scalar(beta2_);
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i]->array() = b1 * m[i]->array() + (Scalar(1) - b1) * g[i]->array();
            v[i]->array() = b2 * v[i]->array() + (Scalar(1) - b2) * g[i]->array().square();
            if (weight_decay_ > 0)
                p[i]->array() *= Scalar(1.0 - lr * weight_decay_);
            p[i]->array() -= Scalar(lr)
                           * ((m[i]->array() / Scalar(c1))
                              / ((v[i]->array() / Scalar(c2)).sqrt() + Scalar(eps_)));
        }
    }

    Index steps() const { return t_; }

private:
    TrainableParams<Scalar> m_, v_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8, weight_decay_ = 0.0;
    Index t_ = 0;
};

} // namespace nncl
