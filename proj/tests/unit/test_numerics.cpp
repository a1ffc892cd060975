#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "tvkd/errors.hpp"
#include "tvkd/numerics.hpp"

using namespace tvkd;

TEST_CASE("logsumexp reference values") {
  const std::vector<double> zeros(4, 0.0);
  CHECK(logsumexp(zeros, 2.0) == doctest::Approx(2.77258872223978123766892848583).epsilon(1e-15));
  const std::vector<double> x{1.0, 0.0};
  CHECK(logsumexp(x) == doctest::Approx(1.31326168751822283404899549497).epsilon(1e-15));
  const std::vector<double> y{1.0, 2.0};
  CHECK(logsumexp(y, 0.5) == doctest::Approx(2.06346400552148624822186340318).epsilon(1e-15));
}

TEST_CASE("logsumexp is stable for large inputs") {
  const std::vector<double> big{1000.0, 1000.0};
  CHECK(logsumexp(big) == doctest::Approx(1000.0 + std::log(2.0)));
  const std::vector<double> small{-1000.0, -1000.0};
  CHECK(logsumexp(small) == doctest::Approx(-1000.0 + std::log(2.0)));
  const std::vector<double> with_inf{-std::numeric_limits<double>::infinity(), 0.0};
  CHECK(logsumexp(with_inf) == 0.0);
}

TEST_CASE("softmax") {
  const std::vector<double> x{1.0, 0.0};
  const auto p = softmax(x);
  CHECK(p[0] == doctest::Approx(0.731058578630004879251159241822).epsilon(1e-15));
  CHECK(p[0] + p[1] == doctest::Approx(1.0));
  const auto sharp = softmax(x, 0.5);
  CHECK(sharp[0] == doctest::Approx(0.880797077977882444059729141302).epsilon(1e-15));
  std::vector<double> out(2);
  softmax_into(x, 0.5, out);
  CHECK(out == sharp);
}

TEST_CASE("kl divergence") {
  const std::vector<double> p{0.2, 0.3, 0.5};
  const std::vector<double> q{0.4, 0.4, 0.2};
  CHECK(kl_divergence(p, q) == doctest::Approx(0.233211308089554192476551479794).epsilon(1e-14));
  CHECK(kl_divergence(p, p) == 0.0);
  const std::vector<double> zero_entry{0.0, 0.5, 0.5};
  CHECK(std::isfinite(kl_divergence(zero_entry, q)));
}

TEST_CASE("sigmoid family") {
  CHECK(sigmoid(1.0) == doctest::Approx(0.731058578630004879251159241822).epsilon(1e-15));
  CHECK(log_sigmoid(1.0) == doctest::Approx(-0.313261687518222834048995494968).epsilon(1e-15));
  CHECK(softplus(-1.1) == doctest::Approx(0.287335325115430788394287074861).epsilon(1e-15));
  CHECK(softplus(800.0) == 800.0);
  CHECK(softplus(-800.0) == 0.0);
  CHECK(sigmoid(-800.0) == 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(std::isfinite(log_sigmoid(-800.0)));
}

TEST_CASE("all_finite") {
  const std::vector<double> ok{1.0, -2.0};
  const std::vector<double> bad{1.0, std::nan("")};
  CHECK(all_finite(ok));
  CHECK_FALSE(all_finite(bad));
}
