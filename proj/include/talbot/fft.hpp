#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <utility>

#include <fftw3.h>

namespace talbot {

/// In-place complex FFT of fixed length backed by an FFTW plan. Plans are
/// created once per (length, direction) under a lock and executed through the
/// new-array interface, which FFTW guarantees to be thread-safe.
class Fft {
public:
    enum class Direction { forward, backward };

    static Fft const& get(std::size_t n, Direction dir) {
        static std::mutex mutex;
        static std::map<std::pair<std::size_t, Direction>, std::unique_ptr<Fft>> cache;
        std::lock_guard lock(mutex);
        auto& slot = cache[{n, dir}];
        if (!slot) slot.reset(new Fft(n, dir));
        return *slot;
    }

    Fft(Fft const&) = delete;
    Fft& operator=(Fft const&) = delete;
    ~Fft() { fftw_destroy_plan(plan_); }

    std::size_t size() const noexcept { return n_; }

    /// Unnormalised transform, in place.
    void operator()(std::span<std::complex<double>> data) const {
        if (data.size() != n_) throw std::invalid_argument("FFT length mismatch");
        auto* p = reinterpret_cast<fftw_complex*>(data.data());
        fftw_execute_dft(plan_, p, p);
    }

private:
    Fft(std::size_t n, Direction dir) : n_(n) {
        auto* buf = fftw_alloc_complex(n);
        plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf,
                                 dir == Direction::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(buf);
        if (!plan_) throw std::runtime_error("FFTW plan creation failed");
    }

    std::size_t n_;
    fftw_plan plan_;
};

inline void fft_forward(std::span<std::complex<double>> data) {
    Fft::get(data.size(), Fft::Direction::forward)(data);
}

/// Inverse transform including the 1/N normalisation.
inline void fft_inverse(std::span<std::complex<double>> data) {
    Fft::get(data.size(), Fft::Direction::backward)(data);
    double const scale = 1.0 / static_cast<double>(data.size());
    for (auto& v : data) v *= scale;
}

} // namespace talbot
