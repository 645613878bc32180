#pragma once

#include "misaka/session.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <future>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace misaka::session {

/// Ordered frame stream for one subscriber. Frames are never dropped.
class Subscription {
public:
    std::optional<EventFrame> pop(std::chrono::milliseconds timeout);
    std::size_t pending() const;
    void close();
    bool closed() const;

private:
    friend class SessionService;
    void push(const EventFrame& frame);

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<EventFrame> frames_;
    bool closed_ = false;
};

/// Owns a Session and serializes access to it. Commands queue up and are
/// applied at the start of the next step, in submission order.
class SessionService {
public:
    explicit SessionService(Session session);
    ~SessionService();
    SessionService(const SessionService&) = delete;
    SessionService& operator=(const SessionService&) = delete;

    // The future throws the command's error, if any.
    std::future<void> submit(Command cmd);

    // Applies queued commands, ticks by dt and publishes one frame.
    EventFrame step_once(double dt_s);

    void start(std::chrono::milliseconds period);
    void stop();

    std::shared_ptr<Subscription> subscribe();
    std::optional<EventFrame> latest() const;
    ExportBundle export_run() const;

    template <class F>
    auto with_session(F&& f) const {
        std::lock_guard lock(session_mu_);
        return f(session_);
    }

private:
    struct Pending {
        Command cmd;
        std::promise<void> done;
    };

    mutable std::mutex session_mu_;
    Session session_;
    std::optional<EventFrame> latest_;

    std::mutex queue_mu_;
    std::vector<Pending> queue_;

    std::mutex subs_mu_;
    std::vector<std::weak_ptr<Subscription>> subs_;

    std::atomic<bool> running_{false};
    std::thread loop_;
};

/// Newline-delimited JSON over TCP. Clients send one command object per line
/// and receive every frame as one line; a rejected command is answered with
/// {"error": "..."}. {"cmd": "export"} returns {"export": {...}}.
class FrameServer {
public:
    // Port 0 picks a free port. Throws std::system_error if the bind fails.
    FrameServer(SessionService& service, unsigned short port, const std::string& host = "127.0.0.1");
    ~FrameServer();
    FrameServer(const FrameServer&) = delete;
    FrameServer& operator=(const FrameServer&) = delete;

    unsigned short port() const noexcept { return port_; }
    void stop();

private:
    struct Client;
    void accept_loop();
    void serve_client(const std::shared_ptr<Client>& client);

    SessionService& service_;
    int listen_fd_ = -1;
    unsigned short port_ = 0;
    std::atomic<bool> stopping_{false};
    std::thread acceptor_;
    std::mutex clients_mu_;
    std::vector<std::shared_ptr<Client>> clients_;
};

} // namespace misaka::session
