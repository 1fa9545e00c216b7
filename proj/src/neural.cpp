#include "pma/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "pma/fastmath.hpp"
#include "pma/numerics.hpp"

namespace pma {

namespace {
constexpr int kBatch = 16;  // samples per block; inner loops vectorize over this
}

size_t StudentNet::param_count() const {
    size_t n = 0;
    for (size_t l = 0; l + 1 < widths.size(); ++l)
        n += static_cast<size_t>(widths[l]) * widths[l + 1] + widths[l + 1];
    return n;
}

StudentNet make_student(const std::vector<int>& hidden, uint64_t init_seed) {
    StudentNet net;
    net.widths.push_back(1);
    for (int h : hidden) {
        if (h < 1) throw std::invalid_argument("make_student: hidden width must be >= 1");
        net.widths.push_back(h);
    }
    net.widths.push_back(1);
    net.w.resize(net.param_count());
    Rng rng(init_seed);
    size_t off = 0;
    for (size_t l = 0; l + 1 < net.widths.size(); ++l) {
        const int fan_in = net.widths[l], fan_out = net.widths[l + 1];
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (int i = 0; i < fan_out * fan_in; ++i) net.w[off++] = rng.uniform(-scale, scale);
        for (int i = 0; i < fan_out; ++i) net.w[off++] = 0.0;  // biases
    }
    return net;
}

double StudentNet::forward(double y) const {
    std::vector<double> act{y}, next;
    size_t off = 0;
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fan_in = widths[l], fan_out = widths[l + 1];
        next.assign(fan_out, 0.0);
        for (int o = 0; o < fan_out; ++o) {
            double z = w[off + static_cast<size_t>(fan_out) * fan_in + o];  // bias
            for (int i = 0; i < fan_in; ++i)
                z += w[off + static_cast<size_t>(o) * fan_in + i] * act[i];
            next[o] = (l + 2 < widths.size())
                          ? std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z)))
                          : z;
        }
        off += static_cast<size_t>(fan_out) * fan_in + fan_out;
        act.swap(next);
    }
    return act[0];
}

Jet3 StudentNet::forward_jet(double y) const {
    std::vector<Jet3> act{jet_var(y)}, next;
    size_t off = 0;
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fan_in = widths[l], fan_out = widths[l + 1];
        next.assign(fan_out, Jet3{});
        for (int o = 0; o < fan_out; ++o) {
            Jet3 z = jet_const(w[off + static_cast<size_t>(fan_out) * fan_in + o]);
            for (int i = 0; i < fan_in; ++i)
                z += w[off + static_cast<size_t>(o) * fan_in + i] * act[i];
            next[o] = (l + 2 < widths.size()) ? jet_softplus(z) : z;
        }
        off += static_cast<size_t>(fan_out) * fan_in + fan_out;
        act.swap(next);
    }
    return act[0];
}

AdamState make_adam(size_t params, double lr, double beta1, double beta2, double eps) {
    AdamState s;
    s.first_moment.assign(params, 0.0);
    s.second_moment.assign(params, 0.0);
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps_stab = eps;
    return s;
}

void adam_step(std::vector<double>& weights, const std::vector<double>& grads, AdamState& state) {
    if (weights.size() != grads.size() || weights.size() != state.first_moment.size())
        throw std::invalid_argument("adam_step: size mismatch");
    for (double g : grads)
        if (!std::isfinite(g))
            throw TrainingError("adam_step: non-finite gradient", int(state.step_count));
    state.step_count += 1;
    const double b1t = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double b2t = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (size_t i = 0; i < weights.size(); ++i) {
        state.first_moment[i] =
            state.beta1 * state.first_moment[i] + (1.0 - state.beta1) * grads[i];
        state.second_moment[i] =
            state.beta2 * state.second_moment[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.first_moment[i] / b1t;
        const double vhat = state.second_moment[i] / b2t;
        weights[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps_stab);
    }
}

namespace {

enum class LossKind { logistic, score, deriv_match };

// Full-batch loss/gradient engine over a fixed sample set. Activations are
// stored [neuron][batch] so all inner loops run over a contiguous 16-wide
// batch; fixed-order 4-lane reductions keep results bit-deterministic while
// still vectorizing.
inline void axpy_b(double* __restrict acc, double w, const double* __restrict x) {
    for (int b = 0; b < kBatch; ++b) acc[b] += w * x[b];
}

inline double dot_b(const double* __restrict x, const double* __restrict y) {
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    for (int b = 0; b < kBatch; b += 4)
        for (int j = 0; j < 4; ++j) lane[j] += x[b + j] * y[b + j];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

inline double sum_b(const double* __restrict x) {
    double lane[4] = {0.0, 0.0, 0.0, 0.0};
    for (int b = 0; b < kBatch; b += 4)
        for (int j = 0; j < 4; ++j) lane[j] += x[b + j];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

class BatchNet {
public:
    BatchNet(const std::vector<int>& widths, bool dual)
        : widths_(widths), dual_(dual), layers_(static_cast<int>(widths.size()) - 1) {
        int maxw = 0;
        for (int wd : widths) maxw = std::max(maxw, wd);
        stride_ = static_cast<size_t>(maxw) * kBatch;
        const size_t total = (static_cast<size_t>(layers_) + 1) * stride_;
        for (auto* buf : {&z_, &a_, &s_, &zd_, &ad_, &gz_, &gzd_, &ga_, &gad_})
            buf->assign(total, 0.0);
    }

    double run_block(const std::vector<double>& w, const double* xs, const double* aux,
                     const double* mask, LossKind kind, double inv_n, std::vector<double>* grad) {
        return dual_ ? run_block_impl<true>(w, xs, aux, mask, kind, inv_n, grad)
                     : run_block_impl<false>(w, xs, aux, mask, kind, inv_n, grad);
    }

private:
    template <bool kDual>
    double run_block_impl(const std::vector<double>& w, const double* xs, const double* aux,
                          const double* mask, LossKind kind, double inv_n,
                          std::vector<double>* grad) {
        const int L = layers_;
        double* a0 = a_.data();
        double* ad0 = ad_.data();
        for (int b = 0; b < kBatch; ++b) {
            a0[b] = xs[b];
            ad0[b] = 1.0;
        }
        // ---- forward ----
        size_t off = 0;
        for (int l = 0; l < L; ++l) {
            const int fin = widths_[l], fout = widths_[l + 1];
            const double* __restrict al = a_.data() + static_cast<size_t>(l) * stride_;
            const double* __restrict adl = ad_.data() + static_cast<size_t>(l) * stride_;
            double* __restrict zn = z_.data() + static_cast<size_t>(l + 1) * stride_;
            double* __restrict an = a_.data() + static_cast<size_t>(l + 1) * stride_;
            double* __restrict adn = ad_.data() + static_cast<size_t>(l + 1) * stride_;
            double* __restrict zdn = zd_.data() + static_cast<size_t>(l + 1) * stride_;
            double* __restrict sn = s_.data() + static_cast<size_t>(l + 1) * stride_;
            const double* bias = w.data() + off + static_cast<size_t>(fout) * fin;
            const bool last = (l + 1 == L);
            for (int o = 0; o < fout; ++o) {
                const double* wrow = w.data() + off + static_cast<size_t>(o) * fin;
                double acc[kBatch];
                for (int b = 0; b < kBatch; ++b) acc[b] = bias[o];
                for (int i = 0; i < fin; ++i) axpy_b(acc, wrow[i], al + static_cast<size_t>(i) * kBatch);
                double accd[kBatch];
                if constexpr (kDual) {
                    for (int b = 0; b < kBatch; ++b) accd[b] = 0.0;
                    for (int i = 0; i < fin; ++i)
                        axpy_b(accd, wrow[i], adl + static_cast<size_t>(i) * kBatch);
                }
                double* zno = zn + static_cast<size_t>(o) * kBatch;
                for (int b = 0; b < kBatch; ++b) zno[b] = acc[b];
                if constexpr (kDual) {
                    double* zdno = zdn + static_cast<size_t>(o) * kBatch;
                    for (int b = 0; b < kBatch; ++b) zdno[b] = accd[b];
                }
            }
            if (!last) {
                // one vectorized pass fills the layer's values and sigmoid caches
                softplus_sigmoid_span(zn, an, sn, fout * kBatch);
                if constexpr (kDual) {
                    for (int k = 0; k < fout * kBatch; ++k) adn[k] = sn[k] * zdn[k];
                }
            } else {
                for (int b = 0; b < kBatch; ++b) an[b] = zn[b];
                if constexpr (kDual)
                    for (int b = 0; b < kBatch; ++b) adn[b] = zdn[b];
            }
            off += static_cast<size_t>(fout) * fin + fout;
        }

        // ---- per-sample loss and output adjoints ----
        const double* u = a_.data() + static_cast<size_t>(L) * stride_;
        const double* ud = ad_.data() + static_cast<size_t>(L) * stride_;
        double* gu = gz_.data() + static_cast<size_t>(L) * stride_;
        double* gud = gzd_.data() + static_cast<size_t>(L) * stride_;
        double loss = 0.0;
        switch (kind) {
            case LossKind::logistic:
                for (int b = 0; b < kBatch; ++b) {
                    const double h = u[b];
                    const double label = aux[b];
                    const double ax = h < 0.0 ? -h : h;
                    const double e = fexp(-ax);
                    const double tail = flog1p01(e);
                    // label*log(1+exp(-h)) + (1-label)*log(1+exp(h))
                    const double sp_neg = tail + (h < 0.0 ? -h : 0.0);
                    const double sp_pos = tail + (h > 0.0 ? h : 0.0);
                    loss += mask[b] * inv_n * (label * sp_neg + (1.0 - label) * sp_pos);
                    const double inv = 1.0 / (1.0 + e);
                    const double sig = h >= 0.0 ? inv : e * inv;
                    gu[b] = mask[b] * inv_n * (sig - label);
                    gud[b] = 0.0;
                }
                break;
            case LossKind::score:
                for (int b = 0; b < kBatch; ++b) {
                    loss += mask[b] * inv_n * (ud[b] + 0.5 * u[b] * u[b]);
                    gu[b] = mask[b] * inv_n * u[b];
                    gud[b] = mask[b] * inv_n;
                }
                break;
            case LossKind::deriv_match:
                for (int b = 0; b < kBatch; ++b) {
                    const double r = ud[b] - aux[b];
                    loss += mask[b] * inv_n * r * r;
                    gu[b] = 0.0;
                    gud[b] = mask[b] * inv_n * 2.0 * r;
                }
                break;
        }

        // ---- backward ----
        for (int l = L - 1; l >= 0; --l) {
            const int fin = widths_[l], fout = widths_[l + 1];
            off -= static_cast<size_t>(fout) * fin + fout;
            const double* __restrict al = a_.data() + static_cast<size_t>(l) * stride_;
            const double* __restrict adl = ad_.data() + static_cast<size_t>(l) * stride_;
            double* __restrict gzn = gz_.data() + static_cast<size_t>(l + 1) * stride_;
            double* __restrict gzdn = gzd_.data() + static_cast<size_t>(l + 1) * stride_;
            if (grad) {
                double* gw = grad->data() + off;
                for (int o = 0; o < fout; ++o) {
                    const double* gzno = gzn + static_cast<size_t>(o) * kBatch;
                    const double* gzdno = gzdn + static_cast<size_t>(o) * kBatch;
                    double* gwrow = gw + static_cast<size_t>(o) * fin;
                    for (int i = 0; i < fin; ++i) {
                        double acc = dot_b(gzno, al + static_cast<size_t>(i) * kBatch);
                        if constexpr (kDual)
                            acc += dot_b(gzdno, adl + static_cast<size_t>(i) * kBatch);
                        gwrow[i] += acc;
                    }
                    gw[static_cast<size_t>(fout) * fin + o] += sum_b(gzno);
                }
            }
            if (l == 0) break;
            double* __restrict gal = ga_.data() + static_cast<size_t>(l) * stride_;
            double* __restrict gadl = gad_.data() + static_cast<size_t>(l) * stride_;
            for (int i = 0; i < fin; ++i) {
                double acc[kBatch];
                for (int b = 0; b < kBatch; ++b) acc[b] = 0.0;
                double accd[kBatch];
                if constexpr (kDual)
                    for (int b = 0; b < kBatch; ++b) accd[b] = 0.0;
                for (int o = 0; o < fout; ++o) {
                    const double wij = w[off + static_cast<size_t>(o) * fin + i];
                    axpy_b(acc, wij, gzn + static_cast<size_t>(o) * kBatch);
                    if constexpr (kDual)
                        axpy_b(accd, wij, gzdn + static_cast<size_t>(o) * kBatch);
                }
                double* gali = gal + static_cast<size_t>(i) * kBatch;
                for (int b = 0; b < kBatch; ++b) gali[b] = acc[b];
                if constexpr (kDual) {
                    double* gadli = gadl + static_cast<size_t>(i) * kBatch;
                    for (int b = 0; b < kBatch; ++b) gadli[b] = accd[b];
                }
            }
            // through the softplus activation of layer l
            const double* __restrict sl = s_.data() + static_cast<size_t>(l) * stride_;
            const double* __restrict zdl = zd_.data() + static_cast<size_t>(l) * stride_;
            double* __restrict gzl = gz_.data() + static_cast<size_t>(l) * stride_;
            double* __restrict gzdl = gzd_.data() + static_cast<size_t>(l) * stride_;
            for (int i = 0; i < fin; ++i) {
                const double* sli = sl + static_cast<size_t>(i) * kBatch;
                const double* gali = gal + static_cast<size_t>(i) * kBatch;
                double* gzli = gzl + static_cast<size_t>(i) * kBatch;
                if constexpr (kDual) {
                    const double* zdli = zdl + static_cast<size_t>(i) * kBatch;
                    const double* gadli = gadl + static_cast<size_t>(i) * kBatch;
                    double* gzdli = gzdl + static_cast<size_t>(i) * kBatch;
                    for (int b = 0; b < kBatch; ++b) {
                        const double sig = sli[b];
                        gzli[b] = gali[b] * sig + gadli[b] * sig * (1.0 - sig) * zdli[b];
                        gzdli[b] = gadli[b] * sig;
                    }
                } else {
                    for (int b = 0; b < kBatch; ++b) gzli[b] = gali[b] * sli[b];
                }
            }
        }
        return loss;
    }

    std::vector<int> widths_;
    bool dual_;
    int layers_;
    size_t stride_;
    std::vector<double> z_, a_, s_, zd_, ad_, gz_, gzd_, ga_, gad_;
};

struct Batches {
    std::vector<double> xs, aux, mask;  // padded to a multiple of kBatch
    size_t blocks = 0;
    double inv_n = 0.0;
};

Batches pack(const std::vector<double>& xs, const std::vector<double>& aux) {
    Batches b;
    const size_t n = xs.size();
    b.blocks = (n + kBatch - 1) / kBatch;
    const size_t padded = b.blocks * kBatch;
    b.xs.assign(padded, 0.0);
    b.aux.assign(padded, 0.0);
    b.mask.assign(padded, 0.0);
    std::copy(xs.begin(), xs.end(), b.xs.begin());
    std::copy(aux.begin(), aux.end(), b.aux.begin());
    std::fill(b.mask.begin(), b.mask.begin() + n, 1.0);
    b.inv_n = 1.0 / static_cast<double>(n);
    return b;
}

double full_pass(BatchNet& engine, const std::vector<double>& w, const Batches& batch,
                 LossKind kind, std::vector<double>* grad) {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
    double loss = 0.0;
    for (size_t blk = 0; blk < batch.blocks; ++blk) {
        const size_t at = blk * kBatch;
        loss += engine.run_block(w, batch.xs.data() + at, batch.aux.data() + at,
                                 batch.mask.data() + at, kind, batch.inv_n, grad);
    }
    return loss;
}

// Data-parallel full-batch pass: fixed contiguous block ranges per worker and
// a fixed-order reduction keep the result identical for a given thread count.
// Workers persist across epochs; one condvar handshake per pass.
class ParallelPass {
public:
    ParallelPass(const std::vector<int>& widths, bool dual, size_t params, size_t blocks,
                 int threads)
        : blocks_(blocks), threads_(std::max(1, threads)) {
        if (blocks < 64) threads_ = 1;
        for (int t = 0; t < threads_; ++t) {
            engines_.emplace_back(widths, dual);
            grads_.emplace_back(params, 0.0);
            losses_.push_back(0.0);
        }
        for (int t = 1; t < threads_; ++t)
            workers_.emplace_back([this, t] { worker_loop(t); });
    }

    ~ParallelPass() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& th : workers_) th.join();
    }

    double run(const std::vector<double>& w, const Batches& batch, LossKind kind,
               std::vector<double>* grad) {
        if (threads_ == 1) {
            if (grad) std::fill(grad->begin(), grad->end(), 0.0);
            losses_[0] = run_range(0, w, batch, kind, grad);
            return losses_[0];
        }
        {
            std::lock_guard<std::mutex> lock(mu_);
            w_ = &w;
            batch_ = &batch;
            kind_ = kind;
            want_grad_ = grad != nullptr;
            pending_ = threads_ - 1;
            ++generation_;
        }
        cv_.notify_all();
        if (want_grad_) std::fill(grads_[0].begin(), grads_[0].end(), 0.0);
        losses_[0] = run_range(0, w, batch, kind, want_grad_ ? &grads_[0] : nullptr);
        {
            std::unique_lock<std::mutex> lock(mu_);
            cv_done_.wait(lock, [this] { return pending_ == 0; });
        }
        double loss = 0.0;
        for (int t = 0; t < threads_; ++t) loss += losses_[t];
        if (grad) {
            std::fill(grad->begin(), grad->end(), 0.0);
            for (int t = 0; t < threads_; ++t)
                for (size_t i = 0; i < grad->size(); ++i) (*grad)[i] += grads_[t][i];
        }
        return loss;
    }

private:
    double run_range(int t, const std::vector<double>& w, const Batches& batch, LossKind kind,
                     std::vector<double>* g) {
        const size_t per = (batch.blocks + threads_ - 1) / threads_;
        const size_t b0 = std::min(batch.blocks, static_cast<size_t>(t) * per);
        const size_t b1 = std::min(batch.blocks, static_cast<size_t>(t + 1) * per);
        double loss = 0.0;
        for (size_t blk = b0; blk < b1; ++blk) {
            const size_t at = blk * kBatch;
            loss += engines_[t].run_block(w, batch.xs.data() + at, batch.aux.data() + at,
                                          batch.mask.data() + at, kind, batch.inv_n, g);
        }
        return loss;
    }

    void worker_loop(int t) {
        uint64_t seen = 0;
        for (;;) {
            std::unique_lock<std::mutex> lock(mu_);
            cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
            if (stop_) return;
            seen = generation_;
            const std::vector<double>* w = w_;
            const Batches* batch = batch_;
            const LossKind kind = kind_;
            const bool want_grad = want_grad_;
            lock.unlock();
            if (want_grad) std::fill(grads_[t].begin(), grads_[t].end(), 0.0);
            losses_[t] = run_range(t, *w, *batch, kind, want_grad ? &grads_[t] : nullptr);
            lock.lock();
            if (--pending_ == 0) cv_done_.notify_one();
        }
    }

    size_t blocks_;
    int threads_;
    std::vector<BatchNet> engines_;
    std::vector<std::vector<double>> grads_;
    std::vector<double> losses_;
    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_, cv_done_;
    const std::vector<double>* w_ = nullptr;
    const Batches* batch_ = nullptr;
    LossKind kind_ = LossKind::logistic;
    bool want_grad_ = false;
    int pending_ = 0;
    uint64_t generation_ = 0;
    bool stop_ = false;
};

StudentNet train(const std::vector<double>& xs, const std::vector<double>& aux, LossKind kind,
                 const StudentConfig& cfg, uint64_t init_seed) {
    StudentNet net = make_student(cfg.hidden, init_seed);
    const Batches batch = pack(xs, aux);
    const int threads = cfg.threads > 0
                            ? cfg.threads
                            : std::max(1u, std::min(4u, std::thread::hardware_concurrency()));
    ParallelPass pass(net.widths, kind != LossKind::logistic, net.w.size(), batch.blocks, threads);
    AdamState adam = make_adam(net.w.size(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps_stab);
    std::vector<double> grad(net.w.size(), 0.0);
    double best = std::numeric_limits<double>::infinity();
    int last_improve = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double loss = pass.run(net.w, batch, kind, &grad);
        if (!std::isfinite(loss)) throw TrainingError("train: non-finite loss", epoch);
        if (loss < best - cfg.early_stop_tol) {
            best = loss;
            last_improve = epoch;
        } else if (epoch - last_improve >= cfg.early_stop_patience) {
            break;
        }
        try {
            adam_step(net.w, grad, adam);
        } catch (const TrainingError&) {
            throw TrainingError("train: non-finite gradient", epoch);
        }
    }
    return net;
}

}  // namespace

StudentNet logistic_fit(const std::vector<double>& target_samples,
                        const std::vector<double>& model_samples, const StudentConfig& cfg,
                        uint64_t rng_seed) {
    if (target_samples.empty() || model_samples.empty())
        throw std::invalid_argument("logistic_fit: empty sample list");
    std::vector<double> xs, labels;
    xs.reserve(target_samples.size() + model_samples.size());
    labels.reserve(target_samples.size() + model_samples.size());
    for (double x : target_samples) {
        xs.push_back(x);
        labels.push_back(0.0);
    }
    for (double x : model_samples) {
        xs.push_back(x);
        labels.push_back(1.0);
    }
    return train(xs, labels, LossKind::logistic, cfg, child_seed(rng_seed, 1));
}

StudentNet score_fit(const std::vector<double>& samples, const StudentConfig& cfg,
                     uint64_t rng_seed) {
    if (samples.empty()) throw std::invalid_argument("score_fit: empty sample list");
    const std::vector<double> aux(samples.size(), 0.0);
    return train(samples, aux, LossKind::score, cfg, child_seed(rng_seed, 1));
}

StudentNet distill(const Residual& delta, const StudentConfig& cfg, int sample_count, double lo,
                   double hi, uint64_t rng_seed) {
    if (sample_count < 2) throw std::invalid_argument("distill: need at least 2 samples");
    Rng rng(child_seed(rng_seed, 0));
    std::vector<double> zs(sample_count), targets(sample_count);
    for (int j = 0; j < sample_count; ++j) {
        zs[j] = rng.uniform(lo, hi);
        const Jet3 d = delta.eval(zs[j]);
        if (!std::isfinite(d.d1)) throw NumericError("distill: non-finite residual derivative");
        targets[j] = d.d1;
    }
    StudentNet net = train(zs, targets, LossKind::deriv_match, cfg, child_seed(rng_seed, 1));
    // the derivative objective leaves the constant free; pin it at the anchor
    const double shift = delta.eval(0.0).v - net.forward(0.0);
    net.w.back() += shift;
    return net;
}

double logistic_loss_grad(const StudentNet& net, const std::vector<double>& target_samples,
                          const std::vector<double>& model_samples, std::vector<double>* grad) {
    std::vector<double> xs, labels;
    for (double x : target_samples) {
        xs.push_back(x);
        labels.push_back(0.0);
    }
    for (double x : model_samples) {
        xs.push_back(x);
        labels.push_back(1.0);
    }
    BatchNet engine(net.widths, false);
    if (grad) grad->assign(net.w.size(), 0.0);
    return full_pass(engine, net.w, pack(xs, labels), LossKind::logistic, grad);
}

double score_loss_grad(const StudentNet& net, const std::vector<double>& samples,
                       std::vector<double>* grad) {
    BatchNet engine(net.widths, true);
    if (grad) grad->assign(net.w.size(), 0.0);
    const std::vector<double> aux(samples.size(), 0.0);
    return full_pass(engine, net.w, pack(samples, aux), LossKind::score, grad);
}

double distill_loss_grad(const StudentNet& net, const std::vector<double>& zs,
                         const std::vector<double>& deriv_targets, std::vector<double>* grad) {
    BatchNet engine(net.widths, true);
    if (grad) grad->assign(net.w.size(), 0.0);
    return full_pass(engine, net.w, pack(zs, deriv_targets), LossKind::deriv_match, grad);
}

namespace {

class StudentResidual final : public Residual {
public:
    explicit StudentResidual(StudentNet net) : net_(std::move(net)) {}
    Jet3 eval(double y) const override { return net_.forward_jet(y); }

private:
    StudentNet net_;
};

class ClassifierResidual final : public Residual {
public:
    ClassifierResidual(StudentNet h, PotentialStack parent)
        : h_(std::move(h)), parent_(std::move(parent)) {}
    Jet3 eval(double y) const override { return eval_from_prefix(y, parent_.jet_eval(y)); }
    Jet3 eval_from_prefix(double, const Jet3& pre) const override {
        const Jet3 map{pre.d1, pre.d2, pre.d3, 0.0};  // 4th derivative not carried
        const Jet3 h = h_.forward_jet(map.v);
        return -jet_compose(h.v, h.d1, h.d2, h.d3, map);
    }
    const PotentialStack* parent() const override { return &parent_; }

private:
    StudentNet h_;
    PotentialStack parent_;
};

class ScoreResidual final : public Residual {
public:
    ScoreResidual(StudentNet model_score, StudentNet target_score, PotentialStack parent,
                  double lo, double hi, int panels)
        : model_(std::move(model_score)),
          target_(std::move(target_score)),
          parent_(std::move(parent)),
          antideriv_([this](double y) { return deriv_value(y); }, lo, hi, panels, 0.0) {}

    Jet3 eval(double y) const override { return eval_from_prefix(y, parent_.jet_eval(y)); }

    Jet3 eval_from_prefix(double y, const Jet3& pre) const override {
        // Δ' = -ψ''·m̂(ψ'), m̂ = σ̂_model − σ̂_target
        const Jet3 map{pre.d1, pre.d2, pre.d3, 0.0};
        const Jet3 ms = model_.forward_jet(map.v);
        const Jet3 ts = target_.forward_jet(map.v);
        const Jet3 m_hat =
            jet_compose(ms.v - ts.v, ms.d1 - ts.d1, ms.d2 - ts.d2, ms.d3 - ts.d3, map);
        const Jet3 hess{pre.d2, pre.d3, 0.0, 0.0};
        const Jet3 d1 = -1.0 * (hess * m_hat);
        return {antideriv_(y), d1.v, d1.d1, d1.d2};
    }
    const PotentialStack* parent() const override { return &parent_; }

private:
    double deriv_value(double y) const {
        const Jet3 pre = parent_.jet_eval(y);
        return -pre.d2 * (model_.forward(pre.d1) - target_.forward(pre.d1));
    }
    StudentNet model_;
    StudentNet target_;
    PotentialStack parent_;
    CumulativeIntegral antideriv_;
};

}  // namespace

ResidualPtr make_student_residual(StudentNet net) {
    return std::make_shared<StudentResidual>(std::move(net));
}

ResidualPtr make_classifier_residual(StudentNet h, PotentialStack parent) {
    return std::make_shared<ClassifierResidual>(std::move(h), std::move(parent));
}

ResidualPtr make_score_residual(StudentNet model_score, StudentNet target_score,
                                PotentialStack parent, double lo, double hi, int panels) {
    return std::make_shared<ScoreResidual>(std::move(model_score), std::move(target_score),
                                           std::move(parent), lo, hi, panels);
}

PotentialStack alg1_step(const PotentialStack& psi, const std::vector<double>& target_samples,
                         const Target1D& g_ref, double eta, const StudentConfig& cfg,
                         uint64_t rng_seed) {
    Rng rng(child_seed(rng_seed, 0));
    std::vector<double> model(target_samples.size());
    for (auto& x : model) x = psi.jet_eval(g_ref.sampler(rng)).d1;
    StudentNet h = logistic_fit(target_samples, model, cfg, child_seed(rng_seed, 1));
    return psi.push(make_classifier_residual(std::move(h), psi), eta);
}

PotentialStack alg2_step(const PotentialStack& psi, const std::vector<double>& target_samples,
                         const Target1D& g_ref, double eta, const StudentConfig& cfg,
                         uint64_t rng_seed) {
    Rng rng(child_seed(rng_seed, 0));
    std::vector<double> model(target_samples.size());
    for (auto& x : model) x = psi.jet_eval(g_ref.sampler(rng)).d1;
    StudentNet sigma_model = score_fit(model, cfg, child_seed(rng_seed, 1));
    StudentNet sigma_target = score_fit(target_samples, cfg, child_seed(rng_seed, 2));
    auto residual = make_score_residual(std::move(sigma_model), std::move(sigma_target), psi,
                                        -9.0, 9.0, 3600);
    return psi.push(std::move(residual), eta);
}

void dump_weights_csv(const StudentNet& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("dump_weights_csv: cannot open " + path);
    out << "layer,row,col,value\n";
    char buf[64];
    size_t off = 0;
    for (size_t l = 0; l + 1 < net.widths.size(); ++l) {
        const int fin = net.widths[l], fout = net.widths[l + 1];
        for (int o = 0; o < fout; ++o)
            for (int i = 0; i < fin; ++i) {
                std::snprintf(buf, sizeof buf, "%.17g",
                              net.w[off + static_cast<size_t>(o) * fin + i]);
                out << l << ',' << o << ',' << i << ',' << buf << '\n';
            }
        for (int o = 0; o < fout; ++o) {
            std::snprintf(buf, sizeof buf, "%.17g",
                          net.w[off + static_cast<size_t>(fout) * fin + o]);
            out << l << ',' << o << ',' << fin << ',' << buf << '\n';
        }
        off += static_cast<size_t>(fout) * fin + fout;
    }
}

}  // namespace pma
