#include "fedep/federator.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace fedep {

std::string RoundRecord::to_json_line() const {
    nlohmann::json j;
    j["round"] = round;
    j["lagrangian"] = lagrangian;
    j["consensus_gap_max"] = consensus_gap_max;
    j["consensus_gap_mean"] = consensus_gap_mean;
    j["duration_ms"] = duration_ms;
    if (eval_acc) j["eval_acc"] = *eval_acc;
    if (eval_f1) j["eval_f1"] = *eval_f1;
    return j.dump();
}

FederationRun::FederationRun(std::vector<ClientState> clients, HyperParams hp)
    : clients_(std::move(clients)), hp_(std::move(hp)) {
    hp_.validate();
    if (clients_.empty()) {
        throw std::invalid_argument("FederationRun: at least one client required");
    }
    std::sort(clients_.begin(), clients_.end(),
              [](const ClientState& a, const ClientState& b) { return a.id < b.id; });
    Index n = clients_.front().feature_dim();
    Index m = clients_.front().rank();
    for (const ClientState& c : clients_) {
        if (c.feature_dim() != n || c.rank() != m) {
            throw ShapeError("FederationRun: clients disagree on (n, m)");
        }
    }
    v_raw_ = clients_.front().w.basis();  // V^0 = W_1^0
    initial_lagrangian_ = global_lagrangian(*this);
}

FederationRun FederationRun::restore(std::vector<ClientState> clients, HyperParams hp,
                                     Matrix v_raw, int round, std::vector<RoundRecord> history,
                                     double initial_lagrangian) {
    FederationRun run(std::move(clients), std::move(hp));
    run.v_raw_ = std::move(v_raw);
    run.round_ = round;
    run.history_ = std::move(history);
    run.initial_lagrangian_ = initial_lagrangian;
    return run;
}

StiefelPoint FederationRun::v_projected() const {
    if (clients_.size() == 1) {
        return clients_.front().w;
    }
    return StiefelPoint::orthonormalize(v_raw_);
}

Matrix mean_basis(const std::vector<ClientState>& clients) {
    if (clients.empty()) {
        throw std::invalid_argument("mean_basis: no clients");
    }
    std::vector<const ClientState*> ordered;
    ordered.reserve(clients.size());
    for (const ClientState& c : clients) ordered.push_back(&c);
    std::sort(ordered.begin(), ordered.end(),
              [](const ClientState* a, const ClientState* b) { return a->id < b->id; });

    Matrix sum = Matrix::Zero(clients.front().w.basis().rows(), clients.front().w.basis().cols());
    for (const ClientState* c : ordered) {
        sum += c->w.basis();
    }
    return sum / static_cast<double>(clients.size());
}

StiefelPoint aggregate_V(const std::vector<ClientState>& clients) {
    if (clients.size() == 1) {
        return clients.front().w;
    }
    Matrix mean = mean_basis(clients);
    try {
        return StiefelPoint::orthonormalize(mean);
    } catch (const NumericalError& e) {
        throw NumericalError(std::string("aggregate_V: mean of client bases is rank deficient (") +
                                 e.what() + ")",
                             e.residual);
    }
}

double global_lagrangian(const FederationRun& run) {
    double total = 0.0;
    for (const ClientState& c : run.clients()) {
        total += local_lagrangian(c, run.v_raw(), run.hp());
    }
    return total;
}

int resolve_thread_count(int requested, int client_count) {
    if (requested == 1) return 1;
    int limit = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    if (limit <= 0) limit = 1;
    if (const char* env = std::getenv("FEDEP_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) limit = std::min(limit, cap);
    }
    return std::max(1, std::min(limit, client_count));
}

namespace {

// Fork-join over clients with exclusive per-client ownership. The first
// worker exception is rethrown after the join.
void parallel_over_clients(std::vector<ClientState>& clients, int threads,
                           const std::function<void(ClientState&)>& body) {
    int d = static_cast<int>(clients.size());
    if (threads <= 1 || d == 1) {
        for (ClientState& c : clients) body(c);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t]() {
            for (int i = t; i < d; i += threads) {
                try {
                    body(clients[static_cast<size_t>(i)]);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (std::thread& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

void run_round(FederationRun& run, const FederationOptions& opts) {
    if (run.round_ >= run.hp_.k_max) {
        return;
    }
    auto start = std::chrono::steady_clock::now();
    int threads = resolve_thread_count(opts.threads, run.client_count());

    // Stage the round on a copy so an aborted aggregation leaves the run at
    // the last good state.
    std::vector<ClientState> staged = run.clients_;
    try {
        parallel_over_clients(staged, threads, [&](ClientState& c) {
            local_round(c, run.v_raw_, run.hp_);
        });

        Matrix v_new = mean_basis(staged);
        aggregate_V(staged);  // degenerate-collapse detection

        parallel_over_clients(staged, threads, [&](ClientState& c) {
            apply_multiplier_updates(c, v_new, run.hp_);
        });

        run.clients_ = std::move(staged);
        run.v_raw_ = std::move(v_new);
    } catch (const NumericalError& e) {
        if (opts.on_abort) opts.on_abort(run);
        std::ostringstream msg;
        msg << "round " << (run.round_ + 1) << " aborted: " << e.what();
        throw NumericalError(msg.str(), e.residual);
    }
    run.round_ += 1;

    RoundRecord record;
    record.round = run.round_;
    record.lagrangian = global_lagrangian(run);
    double gap_sum = 0.0, gap_max = 0.0;
    for (const ClientState& c : run.clients_) {
        double gap = (c.w.basis() - run.v_raw_).norm();
        gap_sum += gap;
        gap_max = std::max(gap_max, gap);
    }
    record.consensus_gap_max = gap_max;
    record.consensus_gap_mean = gap_sum / run.client_count();
    if (opts.round_eval) {
        auto [acc, f1] = opts.round_eval(run);
        record.eval_acc = acc;
        record.eval_f1 = f1;
    }
    record.duration_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - start)
                             .count();
    run.history_.push_back(record);
    if (opts.telemetry) {
        (*opts.telemetry) << run.history_.back().to_json_line() << "\n";
    }
}

void run_to_completion(FederationRun& run, const FederationOptions& opts) {
    int consecutive_small = 0;
    while (run.round() < run.hp().k_max) {
        double before = run.history().empty() ? run.initial_lagrangian()
                                              : run.history().back().lagrangian;
        run_round(run, opts);
        if (run.hp().epsilon > 0.0) {
            double after = run.history().back().lagrangian;
            double rel_decrease = (before - after) / std::max(1.0, std::abs(before));
            if (rel_decrease < run.hp().epsilon) {
                ++consecutive_small;
            } else {
                consecutive_small = 0;
            }
            if (consecutive_small >= 3) {
                break;
            }
        }
    }
}

MonotonicityReport monotonicity_check(const std::vector<RoundRecord>& history, double tol_scale,
                                      std::optional<double> initial_lagrangian) {
    MonotonicityReport report;
    auto check = [&](int round, double before, double after) {
        if (after > before + tol_scale * (1.0 + std::abs(before))) {
            report.violations.push_back({round, before, after});
        }
    };
    if (!history.empty() && initial_lagrangian) {
        check(history.front().round, *initial_lagrangian, history.front().lagrangian);
    }
    for (size_t k = 1; k < history.size(); ++k) {
        check(history[k].round, history[k - 1].lagrangian, history[k].lagrangian);
    }
    return report;
}

}  // namespace fedep
