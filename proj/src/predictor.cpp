#include "pinf/predictor.hpp"

#include "pinf/error.hpp"

#include <string>

namespace pinf {

PredictionTrace::PredictionTrace(Eigen::MatrixXd scores) : scores_(std::move(scores)) {
    if (scores_.rows() == 0 || scores_.cols() < 2) {
        throw data_error("prediction trace needs at least one row and two classes");
    }
    if (!scores_.allFinite()) {
        throw numeric_error("prediction trace contains non-finite scores");
    }
}

Eigen::VectorXd PredictionTrace::row(std::size_t position) const {
    if (position >= num_positions()) {
        throw data_error("trace row " + std::to_string(position) + " out of range (" +
                         std::to_string(num_positions()) + " positions)");
    }
    return scores_.row(static_cast<Eigen::Index>(position)).transpose();
}

bool PredictionTrace::operator==(const PredictionTrace& other) const {
    return scores_.rows() == other.scores_.rows() && scores_.cols() == other.scores_.cols() &&
           (scores_.array() == other.scores_.array()).all();
}

PredictionTrace CountingPredictor::forward(const TokenSeq& input) const {
    ++calls_;
    return inner_.forward(input);
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double top = logits.maxCoeff();
    Eigen::VectorXd e = (logits.array() - top).exp();
    return e / e.sum();
}

void check_tokens(const TokenSeq& input, std::size_t vocab_size) {
    if (input.empty()) {
        throw data_error("empty token sequence");
    }
    for (std::size_t i = 0; i < input.size(); ++i) {
        if (input[i] >= vocab_size) {
            throw data_error("token id " + std::to_string(input[i]) + " at position " + std::to_string(i) +
                             " is outside the vocabulary of size " + std::to_string(vocab_size));
        }
    }
}

}  // namespace pinf
