#include "israte/kernels.hpp"

#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace israte::kernels {

namespace {

/// Holds the first exception thrown inside a parallel region.
class ErrorSlot {
public:
    template <class F>
    void run(F&& f) {
        try {
            f();
        } catch (...) {
            std::lock_guard<std::mutex> lock(mutex_);
            if (!error_) error_ = std::current_exception();
        }
    }
    void rethrow() const {
        if (error_) std::rethrow_exception(error_);
    }

private:
    std::mutex mutex_;
    std::exception_ptr error_;
};

}  // namespace

std::size_t count_event_hits(const ImportanceModel& model, const EventTester& tester, std::size_t n,
                             std::size_t reps, std::uint64_t seed) {
    ErrorSlot slot;
    std::size_t hits = 0;
    const auto count = static_cast<std::int64_t>(reps);
#pragma omp parallel for reduction(+ : hits) schedule(static)
    for (std::int64_t r = 0; r < count; ++r) {
        slot.run([&] {
            if (tester(sample_weighted_empirical(model, n, seed, static_cast<std::uint64_t>(r)))) ++hits;
        });
    }
    slot.rethrow();
    return hits;
}

std::size_t count_event_hits_serial(const ImportanceModel& model, const EventTester& tester, std::size_t n,
                                    std::size_t reps, std::uint64_t seed) {
    std::size_t hits = 0;
    for (std::size_t r = 0; r < reps; ++r)
        if (tester(sample_weighted_empirical(model, n, seed, r))) ++hits;
    return hits;
}

std::vector<double> replicated_integrals(const ImportanceModel& model, std::size_t n, std::size_t reps,
                                         std::uint64_t seed, const std::function<double(double)>& g) {
    std::vector<double> out(reps);
    ErrorSlot slot;
    const auto count = static_cast<std::int64_t>(reps);
#pragma omp parallel for schedule(static)
    for (std::int64_t r = 0; r < count; ++r) {
        slot.run([&] {
            out[r] = integrate(sample_weighted_empirical(model, n, seed, static_cast<std::uint64_t>(r)), g);
        });
    }
    slot.rethrow();
    return out;
}

std::vector<double> replicated_integrals_serial(const ImportanceModel& model, std::size_t n, std::size_t reps,
                                                std::uint64_t seed, const std::function<double(double)>& g) {
    std::vector<double> out(reps);
    for (std::size_t r = 0; r < reps; ++r) out[r] = integrate(sample_weighted_empirical(model, n, seed, r), g);
    return out;
}

std::vector<RateValue> gamma_grid(double eps, bool plus, const std::vector<double>& s_values) {
    std::vector<RateValue> out(s_values.size());
    ErrorSlot slot;
    const auto count = static_cast<std::int64_t>(s_values.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < count; ++i) {
        slot.run([&] { out[i] = plus ? gamma_plus(eps, s_values[i]) : gamma_minus(eps, s_values[i]); });
    }
    slot.rethrow();
    return out;
}

std::vector<RateValue> gamma_grid_serial(double eps, bool plus, const std::vector<double>& s_values) {
    std::vector<RateValue> out;
    out.reserve(s_values.size());
    for (double s : s_values) out.push_back(plus ? gamma_plus(eps, s) : gamma_minus(eps, s));
    return out;
}

int worker_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_worker_count(int workers) {
#ifdef _OPENMP
    if (workers > 0) omp_set_num_threads(workers);
#else
    (void)workers;
#endif
}

}  // namespace israte::kernels
