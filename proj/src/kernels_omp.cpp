#include <exception>
#include <mutex>

#include <omp.h>

#include "hgf/error.hpp"
#include "hgf/kernels.hpp"

namespace hgf::kernels {

namespace {

// Exceptions may not cross an OpenMP region; keep the first and rethrow.
class FirstError {
 public:
  template <class F>
  void run(F&& f) {
    try {
      f();
    } catch (...) {
      std::lock_guard lock(mu_);
      if (!error_) error_ = std::current_exception();
    }
  }
  void rethrow() const {
    if (error_) std::rethrow_exception(error_);
  }

 private:
  std::mutex mu_;
  std::exception_ptr error_;
};

}  // namespace

int max_threads() { return omp_get_max_threads(); }

void score_pairs_parallel(const Predictor& predictor, const Corpus& corpus,
                          std::span<const QuestionPair> pairs, std::span<double> out) {
  if (out.size() != pairs.size()) fail(ErrorKind::kValidation, "output size mismatch");
  FirstError errors;
  const auto n = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) {
    errors.run([&] { out[i] = predictor.pair_score(pair_input(corpus, pairs[i], false)); });
  }
  errors.rethrow();
}

void beliefs_parallel(const BeliefFunction& belief, std::span<const QuestionPair> pairs,
                      std::span<const std::uint8_t> correctness, std::span<double> out) {
  if (out.size() != pairs.size()) fail(ErrorKind::kValidation, "output size mismatch");
  FirstError errors;
  const auto n = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for schedule(dynamic, 256)
  for (std::int64_t i = 0; i < n; ++i) {
    errors.run([&] { out[i] = belief(pairs[i], correctness[pairs[i].shown] != 0); });
  }
  errors.rethrow();
}

}  // namespace hgf::kernels
