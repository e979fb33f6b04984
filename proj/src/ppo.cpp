#include "kix/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kix/errors.hpp"
#include "kix/nets.hpp"

namespace kix {

namespace {

void check_trajectory(const Trajectory& traj) {
    if (traj.empty()) throw NumericError("ppo: empty trajectory");
    for (const StepRecord& s : traj.steps) {
        if (s.log_prob > 1e-9) {
            throw NumericError("ppo: recorded log-prob " + std::to_string(s.log_prob) + " is positive");
        }
    }
}

PolicyOutput run_policy(const ParamSet& params, const Trajectory& traj, size_t index) {
    const StepRecord& s = traj.steps[index];
    return traj.level == Level::Meta ? meta_forward(params, s.graph) : grid_forward(params, s.obs);
}

}  // namespace

const char* level_name(Level level) {
    switch (level) {
        case Level::Meta: return "meta";
        case Level::Interaction: return "interaction";
        case Level::Reach: return "reach";
        case Level::Base: return "base";
    }
    throw ConfigError("unknown level code");
}

void PpoConfig::validate() const {
    if (!(clip_eps > 0.0) || !(clip_eps < 1.0)) {
        throw ConfigError("ppo clip epsilon must lie in (0,1), got " + std::to_string(clip_eps));
    }
    if (entropy_coef < 0.0 || value_coef < 0.0) throw ConfigError("ppo loss coefficients must be >= 0");
    if (lr < 0.0) throw ConfigError("ppo learning rate must be >= 0");
    if (epochs < 1) throw ConfigError("ppo epochs must be >= 1");
    if (minibatch < 1) throw ConfigError("ppo minibatch size must be >= 1");
    if (!(gamma_meta >= 0.0 && gamma_meta <= 1.0) || !(gamma_prim >= 0.0 && gamma_prim <= 1.0)) {
        throw ConfigError("ppo discounts must lie in [0,1]");
    }
    if (grad_clip <= 0.0) throw ConfigError("ppo gradient clip must be > 0");
}

std::vector<double> one_step_advantage(const Trajectory& traj) {
    check_trajectory(traj);
    const size_t n = traj.size();
    std::vector<double> adv(n);
    for (size_t t = 0; t < n; ++t) {
        const StepRecord& s = traj.steps[t];
        adv[t] = s.reward + traj.gamma * s.next_value * (s.done ? 0.0 : 1.0) - s.value;
    }
    return adv;
}

std::vector<double> discounted_returns(const Trajectory& traj) {
    const size_t n = traj.size();
    std::vector<double> ret(n);
    double carry = 0.0;
    for (size_t i = n; i-- > 0;) {
        const StepRecord& s = traj.steps[i];
        if (s.done) {
            carry = s.reward;
        } else if (s.cut || i + 1 == n) {
            carry = s.reward + traj.gamma * s.next_value;
        } else {
            carry = s.reward + traj.gamma * carry;
        }
        ret[i] = carry;
    }
    return ret;
}

std::vector<double> normalize_advantage_batch(const std::vector<double>& adv, double std_floor) {
    if (adv.empty()) return {};
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / adv.size();
    double var = 0.0;
    for (double a : adv) var += (a - mean) * (a - mean);
    const double denom = std::max(std::sqrt(var / adv.size()), std_floor);
    std::vector<double> out(adv.size());
    for (size_t i = 0; i < adv.size(); ++i) out[i] = (adv[i] - mean) / denom;
    return out;
}

Tensor clipped_actor_loss(const Tensor& new_log_probs, const std::vector<double>& old_log_probs,
                          const std::vector<double>& advantages, double clip_eps) {
    const size_t n = old_log_probs.size();
    if (new_log_probs.numel() != static_cast<long>(n) || advantages.size() != n) {
        throw NumericError("clipped_actor_loss: mismatched lengths");
    }
    Tensor old_lp = Tensor::from_data({static_cast<int>(n)}, old_log_probs);
    Tensor ratio = exp_t(sub(new_log_probs, old_lp));
    for (double r : ratio.value()) {
        if (!std::isfinite(r)) throw NumericError("clipped_actor_loss: non-finite probability ratio");
    }
    Tensor adv = Tensor::from_data({static_cast<int>(n)}, advantages);
    Tensor unclipped = mul(ratio, adv);
    Tensor clipped = mul(clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps), adv);
    return neg(mean(minimum(unclipped, clipped)));
}

Tensor critic_loss(const Tensor& values, const std::vector<double>& returns) {
    if (values.numel() != static_cast<long>(returns.size())) {
        throw NumericError("critic_loss: mismatched lengths");
    }
    Tensor target = Tensor::from_data({static_cast<int>(returns.size())}, returns);
    Tensor diff = sub(values, target);
    return mul_scalar(mean(mul(diff, diff)), 0.5);
}

Tensor entropy_bonus(const std::vector<Tensor>& distributions) {
    if (distributions.empty()) throw NumericError("entropy_bonus: empty batch");
    std::vector<Tensor> entropies;
    entropies.reserve(distributions.size());
    for (const Tensor& dist : distributions) {
        std::vector<Tensor> terms;
        for (long i = 0; i < dist.numel(); ++i) {
            if (dist.value()[i] > 0.0) {
                Tensor p = pick(dist, i);
                terms.push_back(mul(p, log_t(p)));
            }
        }
        // An all-zero "distribution" cannot occur (inputs are softmax outputs);
        // a point mass leaves exactly one 1*log(1) term.
        entropies.push_back(neg(add_n(terms)));
    }
    return mean(stack_scalars(entropies));
}

LossReport ppo_update(ParamSet& params, const Trajectory& traj, const PpoConfig& cfg, Rng& rng) {
    cfg.validate();
    check_trajectory(traj);

    std::vector<double> advantages = one_step_advantage(traj);
    const std::vector<double> returns = discounted_returns(traj);
    if (cfg.normalize_advantages) advantages = normalize_advantage_batch(advantages);

    const size_t n = traj.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    ParamSet snapshot = params.clone();
    LossReport report;
    try {
        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
            for (size_t start = 0; start < n; start += cfg.minibatch) {
                const size_t stop = std::min(n, start + cfg.minibatch);
                std::vector<Tensor> new_lps, new_values, dists;
                std::vector<double> old_lps, mb_adv, mb_ret;
                for (size_t j = start; j < stop; ++j) {
                    const int idx = order[j];
                    PolicyOutput out = run_policy(params, traj, idx);
                    new_lps.push_back(pick(out.log_probs, traj.steps[idx].action));
                    new_values.push_back(pick(out.value, 0));
                    dists.push_back(out.probs);
                    old_lps.push_back(traj.steps[idx].log_prob);
                    mb_adv.push_back(advantages[idx]);
                    mb_ret.push_back(returns[idx]);
                }
                Tensor actor = clipped_actor_loss(stack_scalars(new_lps), old_lps, mb_adv, cfg.clip_eps);
                Tensor critic = critic_loss(stack_scalars(new_values), mb_ret);
                Tensor entropy = entropy_bonus(dists);
                Tensor loss = add(sub(actor, mul_scalar(entropy, cfg.entropy_coef)),
                                  mul_scalar(critic, cfg.value_coef));

                params.zero_grads();
                auto grads = backward_gradients(loss, params);
                report.grad_norm += gradient_norm(grads);
                clip_gradient_norm(grads, cfg.grad_clip);
                AdamConfig adam;
                adam.lr = cfg.lr;
                adam_step(params, grads, adam);

                report.actor_loss += actor.item();
                report.critic_loss += critic.item();
                report.entropy += entropy.item();
                report.minibatches += 1;
            }
        }
    } catch (const NumericError&) {
        params.restore(snapshot);
        throw;
    }
    if (report.minibatches > 0) {
        report.actor_loss /= report.minibatches;
        report.critic_loss /= report.minibatches;
        report.entropy /= report.minibatches;
        report.grad_norm /= report.minibatches;
    }
    return report;
}

}  // namespace kix
