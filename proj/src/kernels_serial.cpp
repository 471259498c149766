#include "hgf/error.hpp"
#include "hgf/kernels.hpp"

namespace hgf::kernels {

void score_pairs_serial(const Predictor& predictor, const Corpus& corpus,
                        std::span<const QuestionPair> pairs, std::span<double> out) {
  if (out.size() != pairs.size()) fail(ErrorKind::kValidation, "output size mismatch");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out[i] = predictor.pair_score(pair_input(corpus, pairs[i], false));
  }
}

void beliefs_serial(const BeliefFunction& belief, std::span<const QuestionPair> pairs,
                    std::span<const std::uint8_t> correctness, std::span<double> out) {
  if (out.size() != pairs.size()) fail(ErrorKind::kValidation, "output size mismatch");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    out[i] = belief(pairs[i], correctness[pairs[i].shown] != 0);
  }
}

}  // namespace hgf::kernels
