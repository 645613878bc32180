#pragma once

#include "misaka/consensus.hpp"
#include "misaka/graph.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <queue>
#include <random>
#include <unordered_map>
#include <variant>
#include <vector>

namespace misaka::mesh {

struct LatencyRange {
    double lo_ms = 10.0;
    double hi_ms = 10.0;

    bool fixed() const noexcept { return lo_ms == hi_ms; }
};

// Per directed link (from, to), 0-based. Unset fields fall back to the defaults.
struct LinkOverride {
    std::size_t from = 0;
    std::size_t to = 0;
    std::optional<double> drop;
    std::optional<LatencyRange> latency;
};

struct LinkModel {
    LatencyRange latency;
    double drop = 0.0;
    std::vector<LinkOverride> overrides;

    void validate() const;
    double drop_for(std::size_t from, std::size_t to) const;
    LatencyRange latency_for(std::size_t from, std::size_t to) const;
};

struct HandshakeConfig {
    double timeout_ms = 50.0;
    // Extra attempts after the first one times out.
    int retries = 2;
};

enum class MessageKind { ValueRequest, ValueReply, Ack };

struct MessageEnvelope {
    MessageKind kind = MessageKind::ValueRequest;
    std::size_t from = 0;
    std::size_t to = 0;
    std::uint64_t round = 0;
    std::uint32_t attempt = 0;
    double payload = 0.0;
    std::uint64_t msg_id = 0;
    std::uint64_t exchange = 0;
};

enum class AgentPhase { Idle, Polling, Collecting, Updating };

struct NodeAgent {
    std::size_t id = 0;
    double current_value = 0.0;
    // Nodes this agent reads (q_ij > 0), ascending, with their nominal weights.
    std::vector<std::size_t> neighbors_read;
    std::vector<double> weights;
    AgentPhase phase = AgentPhase::Idle;
    std::uint64_t cycle = 0;
};

struct HandshakeOutcome {
    bool completed = false;
    double value = 0.0;
    int attempts = 0;
};

struct Delivery {
    MessageEnvelope envelope;
};
struct AttemptTimeout {
    std::uint64_t exchange = 0;
    std::uint32_t attempt = 0;
};
struct NodeWake {
    std::size_t node = 0;
};
using EventPayload = std::variant<Delivery, AttemptTimeout, NodeWake>;

/// Time-ordered event queue; equal timestamps dequeue in insertion order.
class EventQueue {
public:
    struct Entry {
        double time_ms = 0.0;
        std::uint64_t sequence = 0;
        EventPayload payload;
    };

    void push(double time_ms, EventPayload payload);
    Entry pop();
    bool empty() const noexcept { return heap_.empty(); }
    std::size_t size() const noexcept { return heap_.size(); }
    double next_time() const { return heap_.top().time_ms; }

private:
    struct Later {
        bool operator()(const Entry& a, const Entry& b) const noexcept {
            if (a.time_ms != b.time_ms) {
                return a.time_ms > b.time_ms;
            }
            return a.sequence > b.sequence;
        }
    };
    std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
    std::uint64_t next_sequence_ = 0;
};

struct AsyncConfig {
    // Sampling interval of the recorded trajectory.
    double cadence_ms = 100.0;
    // Idle time between the end of one poll/update cycle and the next.
    double poll_interval_ms = 100.0;
    // Each node starts its first cycle at a uniform offset in [0, start_jitter_ms).
    double start_jitter_ms = 5.0;
};

// Weight (node, weight) actually used by one node in its latest update.
using UpdateWeights = std::vector<std::pair<std::size_t, double>>;

/// Message-passing consensus over a simulated lossy mesh.
///
/// Single-threaded and deterministic under `seed`: every random draw
/// (latency, drop, start jitter) comes from one generator consumed in event
/// order. Values are only ever combined from nodes that completed the full
/// request/reply/ack exchange in the current cycle.
class MeshSimulation {
public:
    MeshSimulation(const TransitionMatrix& q, const StateVector& s0, LinkModel links = {},
                   HandshakeConfig handshake = {}, std::uint64_t seed = 0);

    std::size_t size() const noexcept { return agents_.size(); }
    double now_ms() const noexcept { return now_ms_; }
    const std::vector<NodeAgent>& agents() const noexcept { return agents_; }
    StateVector values() const;
    // Weights applied in each node's most recent update.
    const std::vector<UpdateWeights>& last_update_weights() const noexcept { return last_weights_; }
    std::uint64_t messages_sent() const noexcept { return next_msg_id_; }

    void set_trace(bool enabled) { trace_enabled_ = enabled; }
    const std::vector<MessageEnvelope>& trace() const noexcept { return trace_; }

    // Runs one isolated exchange from `requester` to `responder` to resolution.
    HandshakeOutcome handshake_exchange(std::size_t requester, std::size_t responder);

    // One synchronous round: every node polls its neighbours, then all commit together.
    void run_round();

    // Starts independent per-node cycles; later calls to advance_async_to progress them.
    void start_async(const AsyncConfig& cfg);
    void advance_async_to(double t_ms);

private:
    struct Exchange {
        std::size_t requester = 0;
        std::size_t responder = 0;
        std::uint64_t round = 0;
        std::uint32_t attempt = 0;
        int attempts_left = 0;
        // Position in the requester's neighbour list, or npos for an isolated exchange.
        std::size_t slot = 0;
        double reply_value = 0.0;
        bool reply_seen = false;
    };
    static constexpr std::size_t kIsolated = static_cast<std::size_t>(-1);

    double uniform01();
    void send(MessageEnvelope envelope);
    void start_exchange(std::size_t requester, std::size_t responder, std::uint64_t round, std::size_t slot);
    void send_attempt(std::uint64_t exchange_id, Exchange& ex);
    void finish_exchange(std::uint64_t exchange_id, bool completed);
    void record_result(std::size_t requester, std::size_t slot, const HandshakeOutcome& outcome);
    void dispatch(const EventQueue::Entry& entry);
    void begin_cycle(std::size_t node);
    void set_phase(NodeAgent& agent, AgentPhase next);
    double combine(std::size_t node);
    void drain();

    std::vector<NodeAgent> agents_;
    LinkModel links_;
    HandshakeConfig handshake_;
    std::mt19937_64 rng_;
    EventQueue queue_;
    double now_ms_ = 0.0;
    std::uint64_t next_msg_id_ = 0;
    std::uint64_t round_ = 0;

    std::unordered_map<std::uint64_t, Exchange> exchanges_;
    std::uint64_t next_exchange_id_ = 0;
    // Per node: outcome for each entry of neighbors_read in the cycle in progress.
    std::vector<std::vector<HandshakeOutcome>> results_;
    std::vector<std::size_t> outstanding_;
    std::optional<HandshakeOutcome> isolated_outcome_;
    std::vector<UpdateWeights> last_weights_;

    bool async_ = false;
    AsyncConfig async_cfg_;

    bool trace_enabled_ = false;
    std::vector<MessageEnvelope> trace_;
};

// Lockstep rounds; rounds == 0 yields the single state s0.
Trajectory run_lockstep(const TransitionMatrix& q, const StateVector& s0, const LinkModel& links,
                        std::size_t rounds, std::uint64_t seed, const HandshakeConfig& handshake = {});
// Row-stochastic weights built from the graph.
Trajectory run_lockstep(const DirectedGraph& graph, const StateVector& s0, const LinkModel& links,
                        std::size_t rounds, std::uint64_t seed, const HandshakeConfig& handshake = {});

// Asynchronous cycles sampled every cfg.cadence_ms from t = 0 through duration_ms.
Trajectory run_async(const TransitionMatrix& q, const StateVector& s0, const LinkModel& links, double duration_ms,
                     std::uint64_t seed, const AsyncConfig& cfg = {}, const HandshakeConfig& handshake = {},
                     double tolerance = ConvergenceConfig{}.tolerance);
Trajectory run_async(const DirectedGraph& graph, const StateVector& s0, const LinkModel& links, double duration_ms,
                     std::uint64_t seed, const AsyncConfig& cfg = {}, const HandshakeConfig& handshake = {},
                     double tolerance = ConvergenceConfig{}.tolerance);

} // namespace misaka::mesh
