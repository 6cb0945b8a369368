#include "hjbverify/random.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>

namespace hjbv {

double normal_quantile(double u) {
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

} // namespace hjbv
