#include "misaka/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace misaka::mesh {

void LinkModel::validate() const {
    auto check_drop = [](double p) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::invalid_argument("drop probability must lie in [0, 1], got " + std::to_string(p));
        }
    };
    auto check_latency = [](const LatencyRange& l) {
        if (!(l.lo_ms >= 0.0) || !(l.hi_ms >= l.lo_ms) || !std::isfinite(l.hi_ms)) {
            throw std::invalid_argument("latency range must satisfy 0 <= lo <= hi");
        }
    };
    check_drop(drop);
    check_latency(latency);
    for (const auto& o : overrides) {
        if (o.drop) {
            check_drop(*o.drop);
        }
        if (o.latency) {
            check_latency(*o.latency);
        }
    }
}

double LinkModel::drop_for(std::size_t from, std::size_t to) const {
    // Later overrides win.
    for (auto it = overrides.rbegin(); it != overrides.rend(); ++it) {
        if (it->from == from && it->to == to && it->drop) {
            return *it->drop;
        }
    }
    return drop;
}

LatencyRange LinkModel::latency_for(std::size_t from, std::size_t to) const {
    for (auto it = overrides.rbegin(); it != overrides.rend(); ++it) {
        if (it->from == from && it->to == to && it->latency) {
            return *it->latency;
        }
    }
    return latency;
}

void EventQueue::push(double time_ms, EventPayload payload) {
    heap_.push(Entry{time_ms, next_sequence_++, std::move(payload)});
}

EventQueue::Entry EventQueue::pop() {
    Entry top = heap_.top();
    heap_.pop();
    return top;
}

MeshSimulation::MeshSimulation(const TransitionMatrix& q, const StateVector& s0, LinkModel links,
                               HandshakeConfig handshake, std::uint64_t seed)
    : links_(std::move(links)), handshake_(handshake), rng_(seed) {
    links_.validate();
    if (handshake_.timeout_ms <= 0.0 || handshake_.retries < 0) {
        throw std::invalid_argument("handshake timeout must be positive and retries nonnegative");
    }
    const std::size_t n = q.size();
    if (s0.size() != n) {
        throw ConsensusError("initial state has " + std::to_string(s0.size()) + " entries, expected " +
                             std::to_string(n));
    }
    agents_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        NodeAgent& a = agents_[i];
        a.id = i;
        a.current_value = s0[i];
        if (!std::isfinite(a.current_value)) {
            throw ConsensusError("initial value of node " + std::to_string(i + 1) + " is not finite");
        }
        const auto row = q.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            if (row[j] > 0.0) {
                a.neighbors_read.push_back(j);
                a.weights.push_back(row[j]);
            }
        }
    }
    results_.resize(n);
    outstanding_.assign(n, 0);
    last_weights_.resize(n);
}

StateVector MeshSimulation::values() const {
    StateVector out(agents_.size());
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        out[i] = agents_[i].current_value;
    }
    return out;
}

double MeshSimulation::uniform01() {
    return static_cast<double>(rng_() >> 11) * 0x1.0p-53;
}

void MeshSimulation::send(MessageEnvelope envelope) {
    envelope.msg_id = next_msg_id_++;
    if (trace_enabled_) {
        trace_.push_back(envelope);
    }
    const double p = links_.drop_for(envelope.from, envelope.to);
    if (p >= 1.0 || (p > 0.0 && uniform01() < p)) {
        return;
    }
    const LatencyRange lat = links_.latency_for(envelope.from, envelope.to);
    const double delay = lat.fixed() ? lat.lo_ms : lat.lo_ms + (lat.hi_ms - lat.lo_ms) * uniform01();
    queue_.push(now_ms_ + delay, Delivery{envelope});
}

void MeshSimulation::start_exchange(std::size_t requester, std::size_t responder, std::uint64_t round,
                                    std::size_t slot) {
    const std::uint64_t id = next_exchange_id_++;
    Exchange ex;
    ex.requester = requester;
    ex.responder = responder;
    ex.round = round;
    ex.attempt = 1;
    ex.attempts_left = handshake_.retries;
    ex.slot = slot;
    auto [it, inserted] = exchanges_.emplace(id, ex);
    send_attempt(id, it->second);
}

void MeshSimulation::send_attempt(std::uint64_t exchange_id, Exchange& ex) {
    MessageEnvelope request;
    request.kind = MessageKind::ValueRequest;
    request.from = ex.requester;
    request.to = ex.responder;
    request.round = ex.round;
    request.attempt = ex.attempt;
    request.exchange = exchange_id;
    queue_.push(now_ms_ + handshake_.timeout_ms, AttemptTimeout{exchange_id, ex.attempt});
    send(request);
}

void MeshSimulation::record_result(std::size_t requester, std::size_t slot, const HandshakeOutcome& outcome) {
    results_[requester][slot] = outcome;
    if (--outstanding_[requester] == 0 && async_) {
        NodeAgent& agent = agents_[requester];
        set_phase(agent, AgentPhase::Updating);
        agent.current_value = combine(requester);
        set_phase(agent, AgentPhase::Idle);
        queue_.push(now_ms_ + async_cfg_.poll_interval_ms, NodeWake{requester});
    }
}

void MeshSimulation::finish_exchange(std::uint64_t exchange_id, bool completed) {
    auto it = exchanges_.find(exchange_id);
    const Exchange ex = it->second;
    exchanges_.erase(it);
    HandshakeOutcome outcome;
    outcome.completed = completed;
    outcome.value = completed ? ex.reply_value : 0.0;
    outcome.attempts = static_cast<int>(ex.attempt);
    if (ex.slot == kIsolated) {
        isolated_outcome_ = outcome;
        return;
    }
    record_result(ex.requester, ex.slot, outcome);
}

void MeshSimulation::dispatch(const EventQueue::Entry& entry) {
    if (const auto* d = std::get_if<Delivery>(&entry.payload)) {
        const MessageEnvelope& msg = d->envelope;
        switch (msg.kind) {
        case MessageKind::ValueRequest: {
            MessageEnvelope reply = msg;
            reply.kind = MessageKind::ValueReply;
            reply.from = msg.to;
            reply.to = msg.from;
            reply.payload = agents_[msg.to].current_value;
            send(reply);
            break;
        }
        case MessageKind::ValueReply: {
            auto it = exchanges_.find(msg.exchange);
            if (it == exchanges_.end() || it->second.attempt != msg.attempt) {
                break;
            }
            it->second.reply_value = msg.payload;
            it->second.reply_seen = true;
            MessageEnvelope ack = msg;
            ack.kind = MessageKind::Ack;
            ack.from = msg.to;
            ack.to = msg.from;
            ack.payload = 0.0;
            send(ack);
            break;
        }
        case MessageKind::Ack: {
            auto it = exchanges_.find(msg.exchange);
            if (it == exchanges_.end() || it->second.attempt != msg.attempt || !it->second.reply_seen) {
                break;
            }
            finish_exchange(msg.exchange, true);
            break;
        }
        }
        return;
    }
    if (const auto* t = std::get_if<AttemptTimeout>(&entry.payload)) {
        auto it = exchanges_.find(t->exchange);
        if (it == exchanges_.end() || it->second.attempt != t->attempt) {
            return;
        }
        Exchange& ex = it->second;
        if (ex.attempts_left > 0) {
            --ex.attempts_left;
            ++ex.attempt;
            ex.reply_seen = false;
            send_attempt(t->exchange, ex);
        } else {
            finish_exchange(t->exchange, false);
        }
        return;
    }
    if (const auto* w = std::get_if<NodeWake>(&entry.payload)) {
        begin_cycle(w->node);
    }
}

void MeshSimulation::set_phase(NodeAgent& agent, AgentPhase next) {
    const auto expected = [](AgentPhase p) {
        switch (p) {
        case AgentPhase::Idle:
            return AgentPhase::Polling;
        case AgentPhase::Polling:
            return AgentPhase::Collecting;
        case AgentPhase::Collecting:
            return AgentPhase::Updating;
        case AgentPhase::Updating:
            return AgentPhase::Idle;
        }
        return AgentPhase::Idle;
    }(agent.phase);
    if (next != expected) {
        throw std::logic_error("node " + std::to_string(agent.id + 1) + " made an illegal phase transition");
    }
    agent.phase = next;
}

void MeshSimulation::begin_cycle(std::size_t node) {
    NodeAgent& agent = agents_[node];
    set_phase(agent, AgentPhase::Polling);
    ++agent.cycle;
    const std::size_t k = agent.neighbors_read.size();
    results_[node].assign(k, HandshakeOutcome{});
    outstanding_[node] = k;
    // Count every exchange before starting any, so synchronous completions cannot close the cycle early.
    const std::uint64_t round = async_ ? agent.cycle : round_;
    set_phase(agent, AgentPhase::Collecting);
    for (std::size_t slot = 0; slot < k; ++slot) {
        const std::size_t j = agent.neighbors_read[slot];
        if (j == node) {
            record_result(node, slot, HandshakeOutcome{true, agent.current_value, 0});
        } else {
            start_exchange(node, j, round, slot);
        }
    }
}

double MeshSimulation::combine(std::size_t node) {
    const NodeAgent& agent = agents_[node];
    const auto& results = results_[node];
    UpdateWeights& used = last_weights_[node];
    used.clear();

    const bool all = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.completed; });
    if (all) {
        double acc = 0.0;
        for (std::size_t k = 0; k < results.size(); ++k) {
            acc += agent.weights[k] * results[k].value;
            used.emplace_back(agent.neighbors_read[k], agent.weights[k]);
        }
        return acc;
    }
    double total = 0.0;
    for (std::size_t k = 0; k < results.size(); ++k) {
        if (results[k].completed) {
            total += agent.weights[k];
        }
    }
    if (total <= 0.0) {
        return agent.current_value;
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < results.size(); ++k) {
        if (results[k].completed) {
            const double w = agent.weights[k] / total;
            acc += w * results[k].value;
            used.emplace_back(agent.neighbors_read[k], w);
        }
    }
    return acc;
}

void MeshSimulation::drain() {
    while (!queue_.empty()) {
        const auto entry = queue_.pop();
        now_ms_ = entry.time_ms;
        dispatch(entry);
    }
}

HandshakeOutcome MeshSimulation::handshake_exchange(std::size_t requester, std::size_t responder) {
    if (async_) {
        throw std::logic_error("isolated exchanges are unavailable once asynchronous cycles run");
    }
    if (requester >= size() || responder >= size()) {
        throw std::out_of_range("handshake endpoint out of range");
    }
    if (requester == responder) {
        return HandshakeOutcome{true, agents_[requester].current_value, 0};
    }
    isolated_outcome_.reset();
    start_exchange(requester, responder, round_, kIsolated);
    drain();
    return *isolated_outcome_;
}

void MeshSimulation::run_round() {
    if (async_) {
        throw std::logic_error("lockstep rounds are unavailable once asynchronous cycles run");
    }
    ++round_;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        begin_cycle(i);
    }
    drain();
    StateVector next(agents_.size());
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        set_phase(agents_[i], AgentPhase::Updating);
        next[i] = combine(i);
    }
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        agents_[i].current_value = next[i];
        set_phase(agents_[i], AgentPhase::Idle);
    }
}

void MeshSimulation::start_async(const AsyncConfig& cfg) {
    if (async_) {
        throw std::logic_error("asynchronous cycles already started");
    }
    if (!(cfg.cadence_ms > 0.0) || cfg.poll_interval_ms < 0.0 || cfg.start_jitter_ms < 0.0) {
        throw std::invalid_argument("async cadence must be positive and intervals nonnegative");
    }
    async_ = true;
    async_cfg_ = cfg;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        const double offset = cfg.start_jitter_ms > 0.0 ? cfg.start_jitter_ms * uniform01() : 0.0;
        queue_.push(now_ms_ + offset, NodeWake{i});
    }
}

void MeshSimulation::advance_async_to(double t_ms) {
    if (!async_) {
        throw std::logic_error("start_async must be called first");
    }
    while (!queue_.empty() && queue_.next_time() <= t_ms) {
        const auto entry = queue_.pop();
        now_ms_ = entry.time_ms;
        dispatch(entry);
    }
    now_ms_ = std::max(now_ms_, t_ms);
}

Trajectory run_lockstep(const TransitionMatrix& q, const StateVector& s0, const LinkModel& links,
                        std::size_t rounds, std::uint64_t seed, const HandshakeConfig& handshake) {
    MeshSimulation sim(q, s0, links, handshake, seed);
    Trajectory t;
    t.states.push_back(s0);
    t.spread_history.push_back(spread(s0));
    for (std::size_t r = 0; r < rounds; ++r) {
        sim.run_round();
        t.states.push_back(sim.values());
        t.spread_history.push_back(spread(t.states.back()));
    }
    t.iterations_run = rounds;
    const std::size_t last = t.states.size() - 1;
    t.converged = has_converged(q.mode(),
                                last > 0 ? std::span<const double>(t.states[last - 1]) : std::span<const double>{},
                                t.states[last], ConvergenceConfig{}.tolerance);
    return t;
}

Trajectory run_lockstep(const DirectedGraph& graph, const StateVector& s0, const LinkModel& links,
                        std::size_t rounds, std::uint64_t seed, const HandshakeConfig& handshake) {
    return run_lockstep(row_stochastic(graph), s0, links, rounds, seed, handshake);
}

Trajectory run_async(const TransitionMatrix& q, const StateVector& s0, const LinkModel& links, double duration_ms,
                     std::uint64_t seed, const AsyncConfig& cfg, const HandshakeConfig& handshake,
                     double tolerance) {
    if (!(duration_ms >= 0.0)) {
        throw std::invalid_argument("duration must be nonnegative");
    }
    MeshSimulation sim(q, s0, links, handshake, seed);
    sim.start_async(cfg);
    Trajectory t;
    t.states.push_back(s0);
    t.spread_history.push_back(spread(s0));
    double sampled_at = 0.0;
    for (std::size_t k = 1;; ++k) {
        const double at = static_cast<double>(k) * cfg.cadence_ms;
        if (at > duration_ms) {
            break;
        }
        sim.advance_async_to(at);
        sampled_at = at;
        t.states.push_back(sim.values());
        t.spread_history.push_back(spread(t.states.back()));
    }
    if (sampled_at < duration_ms) {
        sim.advance_async_to(duration_ms);
        t.states.push_back(sim.values());
        t.spread_history.push_back(spread(t.states.back()));
    }
    t.iterations_run = t.states.size() - 1;
    const std::size_t last = t.states.size() - 1;
    t.converged = has_converged(q.mode(),
                                last > 0 ? std::span<const double>(t.states[last - 1]) : std::span<const double>{},
                                t.states[last], tolerance);
    return t;
}

Trajectory run_async(const DirectedGraph& graph, const StateVector& s0, const LinkModel& links, double duration_ms,
                     std::uint64_t seed, const AsyncConfig& cfg, const HandshakeConfig& handshake,
                     double tolerance) {
    return run_async(row_stochastic(graph), s0, links, duration_ms, seed, cfg, handshake, tolerance);
}

} // namespace misaka::mesh
