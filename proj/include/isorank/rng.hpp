#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace isorank {

// Counter-based pseudo-random stream.  Each draw hashes (key, counter) with
// the splitmix64 finalizer, so streams are stateless apart from the counter
// and runs are bit-reproducible for a given (seed, stream id).
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix(seed ^ mix(stream * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL))) {}

    // Independent child stream; deterministic in (parent key, id).
    RngStream substream(std::uint64_t id) const {
        RngStream s(0);
        s.key_ = mix(key_ ^ mix(id * 0xd6e8feb86659fd93ULL + 0x632be59bd9b4e019ULL));
        s.ctr_ = 0;
        return s;
    }

    std::uint64_t next_u64() { return mix(key_ + (++ctr_) * 0x9e3779b97f4a7c15ULL); }

    // Uniform in (0,1), never exactly 0 or 1.
    double uniform01() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Inclusive bounds.
    int uniform_int(int lo, int hi) {
        if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next_u64() % span);
    }

    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Exponential inter-arrival method: exact, O(lambda) work, no underflow.
    long poisson(double lambda) {
        if (lambda < 0) throw std::invalid_argument("poisson: negative rate");
        long count = 0;
        double acc = 0.0;
        while (true) {
            acc += -std::log(uniform01());
            if (acc > lambda) break;
            ++count;
        }
        return count;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = next_u64() % i;
            std::swap(v[i - 1], v[j]);
        }
    }

    // k distinct values from {0,...,m-1}, sorted ascending.
    std::vector<int> sample_without_replacement(int m, int k) {
        if (k > m) throw std::invalid_argument("sample_without_replacement: k > m");
        std::vector<int> pool(m);
        for (int i = 0; i < m; ++i) pool[i] = i;
        for (int i = 0; i < k; ++i) {
            int j = i + static_cast<int>(next_u64() % static_cast<std::uint64_t>(m - i));
            std::swap(pool[i], pool[j]);
        }
        std::vector<int> out(pool.begin(), pool.begin() + k);
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    static std::uint64_t mix(std::uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

}  // namespace isorank
