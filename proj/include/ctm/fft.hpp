#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace ctm {

using cplx = std::complex<double>;

// Thin cache around FFTW plans. Plans are created once per size with
// FFTW_UNALIGNED so they can run on any buffer; execution on distinct
// buffers is thread-safe, plan creation is serialized.
class FftEngine {
public:
    static FftEngine& instance() {
        static FftEngine eng;
        return eng;
    }

    void forward(const cplx* in, cplx* out, int n) { run(in, out, n, FFTW_FORWARD); }
    void backward(const cplx* in, cplx* out, int n) { run(in, out, n, FFTW_BACKWARD); }

private:
    struct PlanPair {
        fftw_plan fwd = nullptr;
        fftw_plan bwd = nullptr;
    };

    FftEngine() = default;
    ~FftEngine() {
        for (auto& [n, p] : plans_) {
            fftw_destroy_plan(p.fwd);
            fftw_destroy_plan(p.bwd);
        }
    }
    FftEngine(const FftEngine&) = delete;

    void run(const cplx* in, cplx* out, int n, int sign) {
        fftw_plan plan;
        {
            std::lock_guard<std::mutex> lock(mtx_);
            auto it = plans_.find(n);
            if (it == plans_.end()) {
                std::vector<cplx> a(n), b(n);
                PlanPair p;
                p.fwd = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                                         reinterpret_cast<fftw_complex*>(b.data()),
                                         FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
                p.bwd = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(a.data()),
                                         reinterpret_cast<fftw_complex*>(b.data()),
                                         FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
                it = plans_.emplace(n, p).first;
            }
            plan = (sign == FFTW_FORWARD) ? it->second.fwd : it->second.bwd;
        }
        fftw_execute_dft(plan,
                         reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)),
                         reinterpret_cast<fftw_complex*>(out));
    }

    std::mutex mtx_;
    std::map<int, PlanPair> plans_;
};

}  // namespace ctm
