#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nmtattack/corpus.hpp"
#include "nmtattack/model.hpp"

namespace nmtattack {

// Adam with bias correction (beta1=0.9, beta2=0.999, eps=1e-8). Moment slots
// are positional, so the parameter list must be stable across steps.
class Adam {
  public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<const Tensor*>& params);
    int steps_taken() const { return t_; }

  private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct TrainOptions {
    int epochs = 30;
    double lr = 1e-3;
    int batch_size = 8;
    std::uint64_t seed = 0;
};

// Called after each epoch with (epoch index, mean training loss). Must not
// consume the training random stream.
using EpochCallback = std::function<void(int, double)>;

// Teacher-forced Adam training; deterministic given the seed. Returns the
// per-epoch mean loss curve. Parameters end up frozen (requires_grad off).
std::vector<double> train_nmt(NmtModel& model, const Corpus& corpus, const TrainOptions& opt,
                              const EpochCallback& on_epoch = {});

// Next-token objective over sentences (each with BOS/EOS).
std::vector<double> train_lm(CausalLm& model, const std::vector<std::vector<int>>& sentences,
                             const TrainOptions& opt, const EpochCallback& on_epoch = {});

}  // namespace nmtattack
