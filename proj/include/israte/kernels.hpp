#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "israte/laplace.hpp"
#include "israte/model.hpp"
#include "israte/rates.hpp"

// Replication and grid loops. Each parallel kernel has a serial twin that
// computes the identical result; tests hold them together and bench/ times them.
namespace israte::kernels {

std::size_t count_event_hits(const ImportanceModel& model, const EventTester& tester, std::size_t n,
                             std::size_t reps, std::uint64_t seed);
std::size_t count_event_hits_serial(const ImportanceModel& model, const EventTester& tester, std::size_t n,
                                    std::size_t reps, std::uint64_t seed);

/// integrate(sample_weighted_empirical(model, n, seed, r), g) for r < reps.
std::vector<double> replicated_integrals(const ImportanceModel& model, std::size_t n, std::size_t reps,
                                         std::uint64_t seed, const std::function<double(double)>& g);
std::vector<double> replicated_integrals_serial(const ImportanceModel& model, std::size_t n, std::size_t reps,
                                                std::uint64_t seed, const std::function<double(double)>& g);

/// gamma_plus or gamma_minus over a grid of s values.
std::vector<RateValue> gamma_grid(double eps, bool plus, const std::vector<double>& s_values);
std::vector<RateValue> gamma_grid_serial(double eps, bool plus, const std::vector<double>& s_values);

/// Number of worker threads the parallel kernels use.
int worker_count();
void set_worker_count(int workers);

}  // namespace israte::kernels
