#include "snnkit/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "snnkit/diagnostics.hpp"

namespace snnkit {

namespace {

Tensor gather_rows(const Tensor& inputs, const std::vector<std::size_t>& idx) {
    const std::size_t elems = inputs.numel() / inputs.shape[0];
    Shape s = inputs.shape;
    s[0] = idx.size();
    Tensor out(s);
    for (std::size_t k = 0; k < idx.size(); ++k) {
        std::copy(inputs.data.begin() + idx[k] * elems, inputs.data.begin() + (idx[k] + 1) * elems,
                  out.data.begin() + k * elems);
    }
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<std::size_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(labels[i]);
    return out;
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
    const std::size_t classes = logits.shape[1];
    const double* r = logits.data.data() + row * classes;
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c) {
        if (r[c] > r[best]) best = c;
    }
    return best;
}

Tensor row_view(const Tensor& batch, std::size_t row) {
    const std::size_t elems = batch.numel() / batch.shape[0];
    return Tensor({elems}, std::vector<double>(batch.data.begin() + row * elems,
                                               batch.data.begin() + (row + 1) * elems));
}

// Mean per-row Omega of one rate layer's batch output; rows with no spikes
// are skipped.
double batch_mean_omega(const Tensor& rates, std::size_t* skipped = nullptr) {
    const std::size_t batch = rates.shape[0];
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t b = 0; b < batch; ++b) {
        Tensor row = row_view(rates, b);
        if (l2_norm_sq(row) == 0.0) {
            if (skipped) ++(*skipped);
            continue;
        }
        sum += omega(row);
        ++used;
    }
    return used ? sum / static_cast<double>(used) : 0.0;
}

std::vector<double> theta_snapshot(Network& net) {
    std::vector<double> thetas;
    for (RateNormLayer* r : net.rate_norm_layers()) thetas.push_back(r->threshold());
    return thetas;
}

}  // namespace

std::string TrainLog::to_csv() const {
    std::ostringstream os;
    os << "epoch,loss,acc,mean_omega,p";
    const std::size_t n_theta = rows.empty() ? 0 : rows.front().thetas.size();
    for (std::size_t i = 1; i <= n_theta; ++i) os << ",theta_" << i;
    os << "\n";
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf;
    };
    for (const auto& r : rows) {
        os << r.epoch << ",";
        put(r.loss);
        os << ",";
        put(r.accuracy);
        os << ",";
        put(r.mean_omega);
        os << ",";
        put(r.p);
        for (double th : r.thetas) {
            os << ",";
            put(th);
        }
        os << "\n";
    }
    return os.str();
}

TrainLog stage1_train(Network& net, const Dataset& data, const StageConfig& cfg) {
    for (RateNormLayer* r : net.rate_norm_layers()) r->lock();  // p_k = 1.0
    Sgd sgd(cfg.lr, cfg.sgd_momentum);
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    TrainLog log;
    const auto rnl_indices = net.rate_norm_indices();
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0, omega_sum = 0.0;
        std::size_t batches = 0, correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, order.size());
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
            Tensor x = gather_rows(data.inputs, idx);
            std::vector<int> y = gather_labels(data.labels, idx);

            net.zero_grad();
            Tensor logits = net.forward(x, Mode::Train);
            const double loss = cross_entropy_loss(logits, y);
            if (!std::isfinite(loss)) {
                throw TrainingError("stage 1 diverged at epoch " + std::to_string(epoch));
            }
            net.backward(cross_entropy_backward(logits, y));
            sgd.step(net.param_entries());

            loss_sum += loss;
            ++batches;
            for (std::size_t b = 0; b < y.size(); ++b) {
                if (static_cast<int>(argmax_row(logits, b)) == y[b]) ++correct;
            }
            double batch_omega = 0.0;
            for (std::size_t k : rnl_indices) batch_omega += batch_mean_omega(net.layer_output(k));
            if (!rnl_indices.empty()) omega_sum += batch_omega / double(rnl_indices.size());
        }
        TrainLogRow row;
        row.epoch = epoch;
        row.loss = loss_sum / double(batches);
        row.accuracy = double(correct) / double(data.size());
        row.mean_omega = batches ? omega_sum / double(batches) : 0.0;
        row.p = 1.0;
        row.thetas = theta_snapshot(net);
        log.rows.push_back(std::move(row));
    }
    return log;
}

double fast_loss(const Tensor& r_star, const Tensor& r_prime, const std::vector<double>& omegas,
                 double lambda) {
    double omega_mean = 0.0;
    for (double o : omegas) omega_mean += o;
    if (!omegas.empty()) omega_mean /= double(omegas.size());
    return 1.0 - cosine_similarity(r_star, r_prime) + lambda * omega_mean;
}

TrainLog stage2_train(Network& net, const Dataset& data, const StageConfig& cfg) {
    auto rnls = net.rate_norm_layers();
    if (rnls.empty()) throw StateError("stage 2 requires rate norm layers");
    const auto rnl_indices = net.rate_norm_indices();
    const std::size_t L = rnls.size();

    tie_shared_p(rnls);
    rnls.front()->unlock(cfg.p_init);
    auto p_state = rnls.front()->p_state();
    p_state->stage2_started = true;

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    TrainLog log;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double cos_sum = 0.0, omega_sum = 0.0;
        std::size_t batches = 0, correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, order.size());
            std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
            Tensor x = gather_rows(data.inputs, idx);
            std::vector<int> y = gather_labels(data.labels, idx);
            const std::size_t B = idx.size();

            // Reference pass: the Stage-1 network (p = 1), gradient-detached.
            Tensor logits_star;
            {
                ScopedPLock lock(rnls);
                logits_star = net.forward(x, Mode::Eval);
            }

            net.zero_grad();
            Tensor logits_prime = net.forward(x, Mode::Eval);

            // Cosine term and its upstream gradient on the training pass.
            double cos_term = 0.0;
            Tensor upstream(logits_prime.shape);
            const std::size_t classes = logits_prime.shape[1];
            for (std::size_t b = 0; b < B; ++b) {
                Tensor star = row_view(logits_star, b);
                Tensor prime = row_view(logits_prime, b);
                cos_term += (1.0 - cosine_similarity(star, prime)) / double(B);
                Tensor dcos = cosine_similarity_backward_b(star, prime);
                for (std::size_t c = 0; c < classes; ++c) {
                    upstream.data[b * classes + c] = -dcos.data[c] / double(B);
                }
            }

            // Rate Inference Loss term, injected at each rate layer's output.
            double omega_term = 0.0;
            std::map<std::size_t, Tensor> injections;
            for (std::size_t k : rnl_indices) {
                const Tensor& rates = net.layer_output(k);
                Tensor inj(rates.shape);
                const std::size_t elems = rates.numel() / B;
                for (std::size_t b = 0; b < B; ++b) {
                    Tensor row = row_view(rates, b);
                    const double l1 = l1_norm(row);
                    const double l2sq = l2_norm_sq(row);
                    if (l2sq == 0.0) {
                        throw TrainingError("stage 2: rate layer output collapsed to zero at epoch " +
                                            std::to_string(epoch));
                    }
                    omega_term += (l1 / l2sq) / double(L * B);
                    const double scale = cfg.lambda / double(L * B);
                    for (std::size_t i = 0; i < elems; ++i) {
                        const double r = row.data[i];
                        inj.data[b * elems + i] = scale * (l2sq - 2.0 * r * l1) / (l2sq * l2sq);
                    }
                }
                injections.emplace(k, std::move(inj));
            }

            const double loss = cos_term + cfg.lambda * omega_term;
            if (!std::isfinite(loss)) {
                throw TrainingError("stage 2 diverged at epoch " + std::to_string(epoch));
            }
            net.backward(upstream, injections);

            // Only the shared p moves; weights stay frozen.
            if (!std::isfinite(p_state->grad)) {
                throw TrainingError("stage 2: non-finite gradient on shared p");
            }
            p_state->p_raw -= cfg.lr * p_state->grad;

            cos_sum += cos_term;
            omega_sum += omega_term;
            ++batches;
            for (std::size_t b = 0; b < y.size(); ++b) {
                if (static_cast<int>(argmax_row(logits_prime, b)) == y[b]) ++correct;
            }
        }
        TrainLogRow row;
        row.epoch = epoch;
        row.cos_term = cos_sum / double(batches);
        row.omega_term = omega_sum / double(batches);
        row.loss = row.cos_term + cfg.lambda * row.omega_term;
        row.accuracy = double(correct) / double(data.size());
        row.mean_omega = row.omega_term;
        row.p = rnls.front()->p();
        row.thetas = theta_snapshot(net);
        log.rows.push_back(std::move(row));
    }
    return log;
}

double mean_omega(Network& net, const Tensor& inputs) {
    const auto rnl_indices = net.rate_norm_indices();
    if (rnl_indices.empty()) throw StateError("mean_omega: no rate norm layers");
    net.forward(inputs, Mode::Eval);
    double sum = 0.0;
    for (std::size_t k : rnl_indices) sum += batch_mean_omega(net.layer_output(k));
    return sum / double(rnl_indices.size());
}

double ann_accuracy(Network& net, const Dataset& data) {
    Tensor logits = net.forward(data.inputs, Mode::Eval);
    std::size_t correct = 0;
    for (std::size_t b = 0; b < data.size(); ++b) {
        if (static_cast<int>(argmax_row(logits, b)) == data.labels[b]) ++correct;
    }
    return double(correct) / double(data.size());
}

}  // namespace snnkit
