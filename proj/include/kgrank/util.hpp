#pragma once
// Shared plumbing: errors, deterministic RNG, hashing, tokenization,
// little-endian binary IO, a chunked parallel_for, and a line-protocol
// subprocess wrapper used by the external adapters.

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace kgrank {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
    if (!cond) fail(msg);
}

// ---------------------------------------------------------------------------
// Deterministic randomness. std::mt19937_64 has a pinned bitstream, but the
// standard distributions do not, so uniforms are derived from raw bits here.

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        // splitmix64; stable across platforms and fast enough for everything here
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) {
        // modulo bias is irrelevant at the sizes used here but rejection is cheap
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
};

inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    Rng r(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
    return r.next_u64();
}

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Text handling shared by the hashed embedder and the re-ranker tokenizer.

inline std::string to_lower(const std::string& s) {
    std::string out = s;
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

// Lowercase word tokens; splits on anything that is not a letter or digit.
inline std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

inline std::vector<std::string> split_whitespace(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            if (!cur.empty()) {
                out.push_back(cur);
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

// Splits on a separator character, keeping empty fields.
inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

inline bool replace_first(std::string& s, const std::string& what, const std::string& with) {
    size_t pos = s.find(what);
    if (pos == std::string::npos) return false;
    s.replace(pos, what.size(), with);
    return true;
}

inline void replace_all(std::string& s, const std::string& what, const std::string& with) {
    size_t pos = 0;
    while ((pos = s.find(what, pos)) != std::string::npos) {
        s.replace(pos, what.size(), with);
        pos += with.size();
    }
}

// ---------------------------------------------------------------------------
// Little-endian binary IO for checkpoints. Round-trips must be bit-exact.

inline void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    require(bool(is), "checkpoint: unexpected end of file");
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

inline void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    require(bool(is), "checkpoint: unexpected end of file");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void write_f64_block(std::ostream& os, const std::vector<double>& v) {
    write_u64(os, v.size());
    for (double x : v) {
        uint64_t bits;
        std::memcpy(&bits, &x, sizeof(bits));
        write_u64(os, bits);
    }
}

inline void read_f64_block(std::istream& is, std::vector<double>& v, size_t expected) {
    uint64_t n = read_u64(is);
    require(n == expected, "checkpoint: parameter block size mismatch");
    v.resize(n);
    for (uint64_t i = 0; i < n; ++i) {
        uint64_t bits = read_u64(is);
        double x;
        std::memcpy(&x, &bits, sizeof(x));
        v[i] = x;
    }
}

// ---------------------------------------------------------------------------
// Threading. Work is partitioned into contiguous chunks so every index writes
// only its own slot; reductions happen afterwards in index order.

inline int thread_count_from_env() {
    const char* env = std::getenv("KGRANK_THREADS");
    if (env != nullptr) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(std::min(hw, 8u));
}

inline void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn) {
    if (threads <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    size_t nthreads = std::min<size_t>(static_cast<size_t>(threads), n);
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    size_t chunk = (n + nthreads - 1) / nthreads;
    for (size_t t = 0; t < nthreads; ++t) {
        size_t lo = t * chunk;
        size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------------------
// Line-protocol subprocess. One request line in on stdin, one response line
// out on stdout. Used by the external embedder and generator adapters.

class Subprocess {
public:
    explicit Subprocess(const std::vector<std::string>& argv, int timeout_ms = 10000)
        : timeout_ms_(timeout_ms) {
        require(!argv.empty(), "subprocess: empty command");
        int to_child[2];
        int from_child[2];
        require(pipe(to_child) == 0 && pipe(from_child) == 0, "subprocess: pipe failed");
        pid_ = fork();
        require(pid_ >= 0, "subprocess: fork failed");
        if (pid_ == 0) {
            dup2(to_child[0], STDIN_FILENO);
            dup2(from_child[1], STDOUT_FILENO);
            close(to_child[0]);
            close(to_child[1]);
            close(from_child[0]);
            close(from_child[1]);
            std::vector<char*> args;
            for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
            args.push_back(nullptr);
            execvp(args[0], args.data());
            std::fprintf(stderr, "subprocess: exec %s failed: %s\n", args[0], std::strerror(errno));
            _exit(127);
        }
        close(to_child[0]);
        close(from_child[1]);
        in_fd_ = to_child[1];
        out_fd_ = from_child[0];
    }

    Subprocess(const Subprocess&) = delete;
    Subprocess& operator=(const Subprocess&) = delete;

    ~Subprocess() { shutdown(); }

    void write_line(const std::string& line) {
        std::string payload = line;
        payload.push_back('\n');
        size_t off = 0;
        while (off < payload.size()) {
            ssize_t n = ::write(in_fd_, payload.data() + off, payload.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                fail("subprocess: write failed (process gone?)");
            }
            off += static_cast<size_t>(n);
        }
    }

    // Blocks until a full line arrives or the timeout expires.
    std::string read_line() {
        for (;;) {
            size_t nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            struct pollfd pfd{out_fd_, POLLIN, 0};
            int pr = poll(&pfd, 1, timeout_ms_);
            require(pr >= 0, "subprocess: poll failed");
            require(pr > 0, "subprocess: timed out waiting for response");
            char chunk[4096];
            ssize_t n = ::read(out_fd_, chunk, sizeof(chunk));
            require(n >= 0, "subprocess: read failed");
            require(n > 0, "subprocess: closed the pipe before replying");
            buffer_.append(chunk, static_cast<size_t>(n));
        }
    }

    void shutdown() {
        if (pid_ < 0) return;
        close(in_fd_);
        close(out_fd_);
        int status = 0;
        for (int i = 0; i < 50; ++i) {
            pid_t r = waitpid(pid_, &status, WNOHANG);
            if (r == pid_) {
                pid_ = -1;
                return;
            }
            usleep(10000);
        }
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
        pid_ = -1;
    }

private:
    pid_t pid_ = -1;
    int in_fd_ = -1;
    int out_fd_ = -1;
    int timeout_ms_;
    std::string buffer_;
};

}  // namespace kgrank
