#include "asyndiff/denoiser.hpp"

#include <cmath>
#include <sstream>

namespace asyndiff {

void GaussianDataSpec::validate() const {
  const auto d = mean.size();
  if (cov.rows() != d || cov.cols() != d)
    throw std::invalid_argument("GaussianDataSpec: dimension mismatch");
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-12)
    throw std::invalid_argument("GaussianDataSpec: covariance not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument(
        "GaussianDataSpec: covariance not positive-definite");
}

Grid3 oracle_predict(const GaussianDataSpec& spec, const Grid3& x,
                     const TimestepField& field,
                     const NoiseSchedule& schedule) {
  const int d = x.h * x.w;
  if (spec.mean.size() != d)
    throw std::invalid_argument("oracle_predict: spec dimension != pixel count");
  if (field.values.h != x.h || field.values.w != x.w)
    throw std::invalid_argument("oracle_predict: field shape mismatch");

  Eigen::VectorXd sqrt_ab(d), one_minus_ab(d);
  for (int p = 0; p < d; ++p) {
    const double ab = schedule.alpha_bar(field.values.v[p]);
    sqrt_ab[p] = std::sqrt(ab);
    one_minus_ab[p] = 1.0 - ab;
  }

  // M = A Sigma A + D; shared across channels.
  Eigen::MatrixXd m = sqrt_ab.asDiagonal() * spec.cov * sqrt_ab.asDiagonal();
  m.diagonal() += one_minus_ab;
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << "oracle_predict: singular system; min(1-alpha_bar) = "
       << one_minus_ab.minCoeff();
    throw std::runtime_error(os.str());
  }
  const Eigen::MatrixXd sigma_a = spec.cov * sqrt_ab.asDiagonal();

  Grid3 eps(x.c, x.h, x.w);
  for (int ch = 0; ch < x.c; ++ch) {
    Eigen::VectorXd xc(d);
    for (int p = 0; p < d; ++p) xc[p] = x.v[static_cast<size_t>(ch) * d + p];
    const Eigen::VectorXd resid = xc - sqrt_ab.cwiseProduct(spec.mean);
    const Eigen::VectorXd x0hat = spec.mean + sigma_a * llt.solve(resid);
    for (int p = 0; p < d; ++p) {
      eps.v[static_cast<size_t>(ch) * d + p] =
          (xc[p] - sqrt_ab[p] * x0hat[p]) / std::sqrt(one_minus_ab[p]);
    }
  }
  return eps;
}

DenoiserOutput GaussianOracleDenoiser::predict(
    const Grid3& x, const TimestepField& field,
    const std::vector<int>* /*tokens*/) const {
  return {oracle_predict(spec_, x, field, schedule_), std::nullopt};
}

}  // namespace asyndiff
