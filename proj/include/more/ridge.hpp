#pragma once

#include "more/types.hpp"

namespace more {

/// Multi-output ridge regression. Returns W (m x k) minimizing
/// ||Y - X W^T||^2 + lambda ||W||^2, where X is N x k and Y is N x m.
///
/// Solved by column-pivoted QR of the stacked system [X; sqrt(lambda) I],
/// which never forms X^T X; all outputs share one factorization. Throws
/// IllConditionedError when the system is rank deficient (only possible at
/// lambda == 0).
Matrix ridge_fit(const Matrix& inputs, const Matrix& targets, double lambda);

/// Ridge with nonnegative per-sample weights (weighted least squares).
Matrix weighted_ridge_fit(const Matrix& inputs, const Matrix& targets, const Vector& weights,
                          double lambda);

}  // namespace more
