#include "misaka/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <system_error>

namespace misaka::session {

std::optional<EventFrame> Subscription::pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, timeout, [this] { return !frames_.empty() || closed_; });
    if (frames_.empty()) {
        return std::nullopt;
    }
    EventFrame f = std::move(frames_.front());
    frames_.pop_front();
    return f;
}

std::size_t Subscription::pending() const {
    std::lock_guard lock(mu_);
    return frames_.size();
}

void Subscription::close() {
    {
        std::lock_guard lock(mu_);
        closed_ = true;
    }
    cv_.notify_all();
}

bool Subscription::closed() const {
    std::lock_guard lock(mu_);
    return closed_;
}

void Subscription::push(const EventFrame& frame) {
    {
        std::lock_guard lock(mu_);
        if (closed_) {
            return;
        }
        frames_.push_back(frame);
    }
    cv_.notify_one();
}

SessionService::SessionService(Session session) : session_(std::move(session)) {}

SessionService::~SessionService() { stop(); }

std::future<void> SessionService::submit(Command cmd) {
    std::lock_guard lock(queue_mu_);
    queue_.push_back({std::move(cmd), {}});
    return queue_.back().done.get_future();
}

EventFrame SessionService::step_once(double dt_s) {
    std::vector<Pending> batch;
    {
        std::lock_guard lock(queue_mu_);
        batch.swap(queue_);
    }
    EventFrame frame;
    {
        std::lock_guard lock(session_mu_);
        for (Pending& p : batch) {
            try {
                session_.apply_command(p.cmd);
                p.done.set_value();
            } catch (...) {
                p.done.set_exception(std::current_exception());
            }
        }
        session_.tick(dt_s);
        frame = session_.snapshot();
        latest_ = frame;
    }
    std::lock_guard lock(subs_mu_);
    std::erase_if(subs_, [](const std::weak_ptr<Subscription>& w) {
        auto s = w.lock();
        return !s || s->closed();
    });
    for (const auto& w : subs_) {
        if (auto s = w.lock()) {
            s->push(frame);
        }
    }
    return frame;
}

void SessionService::start(std::chrono::milliseconds period) {
    if (running_.exchange(true)) {
        return;
    }
    loop_ = std::thread([this, period] {
        const double dt = std::chrono::duration<double>(period).count();
        auto next = std::chrono::steady_clock::now();
        while (running_.load()) {
            step_once(dt);
            next += period;
            std::this_thread::sleep_until(next);
        }
    });
}

void SessionService::stop() {
    running_.store(false);
    if (loop_.joinable()) {
        loop_.join();
    }
    std::lock_guard lock(subs_mu_);
    for (const auto& w : subs_) {
        if (auto s = w.lock()) {
            s->close();
        }
    }
}

std::shared_ptr<Subscription> SessionService::subscribe() {
    auto s = std::make_shared<Subscription>();
    std::lock_guard lock(subs_mu_);
    subs_.push_back(s);
    return s;
}

std::optional<EventFrame> SessionService::latest() const {
    std::lock_guard lock(session_mu_);
    return latest_;
}

ExportBundle SessionService::export_run() const {
    std::lock_guard lock(session_mu_);
    return session_.export_run();
}

struct FrameServer::Client {
    int fd = -1;
    std::mutex write_mu;
    std::shared_ptr<Subscription> sub;
    std::thread reader;
    std::thread writer;

    bool send_line(const std::string& line) {
        std::lock_guard lock(write_mu);
        std::string data = line + "\n";
        std::size_t off = 0;
        while (off < data.size()) {
            const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
            if (n <= 0) {
                if (n < 0 && errno == EINTR) {
                    continue;
                }
                return false;
            }
            off += static_cast<std::size_t>(n);
        }
        return true;
    }
};

FrameServer::FrameServer(SessionService& service, unsigned short port, const std::string& host)
    : service_(service) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) {
        throw std::system_error(errno, std::generic_category(), "socket");
    }
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        throw std::system_error(EINVAL, std::generic_category(), "bad listen address " + host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listen_fd_, 16) < 0) {
        const int err = errno;
        ::close(listen_fd_);
        throw std::system_error(err, std::generic_category(), "cannot listen on " + host + ":" + std::to_string(port));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
}

FrameServer::~FrameServer() { stop(); }

void FrameServer::stop() {
    if (stopping_.exchange(true)) {
        return;
    }
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (acceptor_.joinable()) {
        acceptor_.join();
    }
    std::vector<std::shared_ptr<Client>> clients;
    {
        std::lock_guard lock(clients_mu_);
        clients.swap(clients_);
    }
    for (auto& c : clients) {
        ::shutdown(c->fd, SHUT_RDWR);
        c->sub->close();
    }
    for (auto& c : clients) {
        if (c->reader.joinable()) {
            c->reader.join();
        }
        if (c->writer.joinable()) {
            c->writer.join();
        }
        ::close(c->fd);
    }
}

void FrameServer::accept_loop() {
    while (!stopping_.load()) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) {
                continue;
            }
            return;
        }
        auto client = std::make_shared<Client>();
        client->fd = fd;
        client->sub = service_.subscribe();
        std::lock_guard lock(clients_mu_);
        if (stopping_.load()) {
            ::close(fd);
            return;
        }
        clients_.push_back(client);
        serve_client(client);
    }
}

void FrameServer::serve_client(const std::shared_ptr<Client>& client) {
    Client* c = client.get();
    c->writer = std::thread([c] {
        while (true) {
            auto frame = c->sub->pop(std::chrono::milliseconds(200));
            if (!frame) {
                if (c->sub->closed()) {
                    return;
                }
                continue;
            }
            if (!c->send_line(frame_to_json(*frame).dump())) {
                c->sub->close();
                return;
            }
        }
    });
    c->reader = std::thread([this, c] {
        std::string buffer;
        char chunk[4096];
        while (true) {
            const ssize_t n = ::recv(c->fd, chunk, sizeof chunk, 0);
            if (n <= 0) {
                if (n < 0 && errno == EINTR) {
                    continue;
                }
                break;
            }
            buffer.append(chunk, static_cast<std::size_t>(n));
            std::size_t nl;
            while ((nl = buffer.find('\n')) != std::string::npos) {
                const std::string line = buffer.substr(0, nl);
                buffer.erase(0, nl + 1);
                if (line.find_first_not_of(" \t\r") == std::string::npos) {
                    continue;
                }
                try {
                    const json j = json::parse(line);
                    if (j.is_object() && j.value("cmd", std::string()) == "export") {
                        const ExportBundle b = service_.export_run();
                        c->send_line(json{{"export", {{"trajectory_csv", b.trajectory_csv}, {"scenario", b.scenario}}}}
                                         .dump());
                        continue;
                    }
                    auto done = service_.submit(command_from_json(j));
                    while (done.wait_for(std::chrono::milliseconds(100)) != std::future_status::ready) {
                        if (stopping_.load()) {
                            return;
                        }
                    }
                    done.get();
                } catch (const std::exception& e) {
                    c->send_line(json{{"error", e.what()}}.dump());
                }
            }
        }
        c->sub->close();
    });
}

} // namespace misaka::session
