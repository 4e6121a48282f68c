#include "nmtattack/train.hpp"

#include <algorithm>
#include <cmath>

namespace nmtattack {

void Adam::step(const std::vector<const Tensor*>& params) {
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i]->data.size(), 0.0);
            v_[i].assign(params[i]->data.size(), 0.0);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const Tensor* p = params[i];
        if (p->grad.empty()) continue;
        auto& m = m_[i];
        auto& v = v_[i];
        auto& data = const_cast<Tensor*>(p)->data;
        for (std::size_t j = 0; j < data.size(); ++j) {
            const double grad = p->grad[j];
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * grad;
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * grad * grad;
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

namespace {

template <typename LossFn>
std::vector<double> run_training(const std::vector<const Tensor*>& params, std::size_t n_examples,
                                 const TrainOptions& opt, LossFn make_loss,
                                 const EpochCallback& on_epoch) {
    if (n_examples == 0) throw ConfigError("training corpus is empty");
    if (opt.batch_size < 1) throw ConfigError("batch_size must be at least 1");

    Adam adam(opt.lr);
    Rng rng(opt.seed);
    std::vector<std::size_t> order(n_examples);
    for (std::size_t i = 0; i < n_examples; ++i) order[i] = i;

    std::vector<double> curve;
    curve.reserve(static_cast<std::size_t>(opt.epochs));
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        // Fisher-Yates with our own rng so the visit order is reproducible
        for (std::size_t i = n_examples - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i) + 1));
            std::swap(order[i], order[j]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n_examples; start += static_cast<std::size_t>(opt.batch_size)) {
            const std::size_t end = std::min(n_examples, start + static_cast<std::size_t>(opt.batch_size));
            Graph g;
            std::vector<Var> losses;
            losses.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) losses.push_back(make_loss(g, order[i], rng));
            Var batch_loss = losses[0];
            for (std::size_t i = 1; i < losses.size(); ++i) batch_loss = g.add(batch_loss, losses[i]);
            batch_loss = g.scale(batch_loss, 1.0 / static_cast<double>(losses.size()));
            g.backward(batch_loss);
            adam.step(params);
            for (const Tensor* p : params) p->zero_grad();
            epoch_loss += g.scalar_value(batch_loss) * static_cast<double>(losses.size());
        }
        epoch_loss /= static_cast<double>(n_examples);
        curve.push_back(epoch_loss);
        if (on_epoch) on_epoch(epoch, epoch_loss);
    }
    return curve;
}

}  // namespace

std::vector<double> train_nmt(NmtModel& model, const Corpus& corpus, const TrainOptions& opt,
                              const EpochCallback& on_epoch) {
    model.set_trainable(true);
    auto params = model.parameters();
    auto curve = run_training(
        params, corpus.size(), opt,
        [&](Graph& g, std::size_t idx, Rng& rng) {
            const ParallelExample& ex = corpus.examples[idx];
            ForwardOptions fwd{true, &rng};
            return nmt_loss(g, model, ex.source, ex.reference, fwd);
        },
        on_epoch);
    model.set_trainable(false);
    return curve;
}

std::vector<double> train_lm(CausalLm& model, const std::vector<std::vector<int>>& sentences,
                             const TrainOptions& opt, const EpochCallback& on_epoch) {
    for (const auto& s : sentences)
        if (s.size() < 2) throw ConfigError("language model sentences need at least 2 tokens");
    model.set_trainable(true);
    auto params = model.parameters();
    auto curve = run_training(
        params, sentences.size(), opt,
        [&](Graph& g, std::size_t idx, Rng& rng) {
            const std::vector<int>& s = sentences[idx];
            const std::vector<int> input(s.begin(), s.end() - 1);
            const std::vector<int> targets(s.begin() + 1, s.end());
            ForwardOptions fwd{true, &rng};
            Var logits = model.logits(g, model.hidden_states(g, input, fwd));
            return g.cross_entropy(logits, targets, Vocabulary::PAD);
        },
        on_epoch);
    model.set_trainable(false);
    return curve;
}

}  // namespace nmtattack
