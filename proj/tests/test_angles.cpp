#include <cmath>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "orientdet/angles.hpp"

using namespace orientdet;

TEST_CASE("wrapped unit distance crosses the seam") {
  CHECK(wrapped_unit_distance(0.1, 0.9) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(wrapped_unit_distance(0.9, 0.1) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(wrapped_unit_distance(0.0, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(wrapped_unit_distance(0.25, 0.25) == 0.0);
}

TEST_CASE("wrapped degree error crosses the seam") {
  CHECK(wrapped_deg_error(350.0, 10.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(wrapped_deg_error(10.0, 350.0) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(wrapped_deg_error(0.0, 180.0) == doctest::Approx(180.0).epsilon(1e-12));
  CHECK(wrapped_deg_error(90.0, 90.0) == 0.0);
}

TEST_CASE("wrapped distances reject out-of-range inputs") {
  CHECK_THROWS_AS(wrapped_unit_distance(-0.1, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(wrapped_unit_distance(0.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(wrapped_deg_error(-1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(wrapped_deg_error(0.0, 360.0), std::invalid_argument);
}

TEST_CASE("orientation angle folds the full turn and rejects beyond it") {
  CHECK(OrientationAngle::from_degrees(360.0).degrees() == 0.0);
  CHECK(OrientationAngle::from_unit(1.0).unit() == 0.0);
  CHECK(OrientationAngle::from_degrees(90.0).unit() == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(OrientationAngle::from_unit(0.75).degrees() == doctest::Approx(270.0).epsilon(1e-15));
  CHECK_THROWS_AS(OrientationAngle::from_degrees(-0.5), std::invalid_argument);
  CHECK_THROWS_AS(OrientationAngle::from_degrees(360.5), std::invalid_argument);
  CHECK_THROWS_AS(OrientationAngle::from_unit(-0.01), std::invalid_argument);
  CHECK_THROWS_AS(OrientationAngle::from_unit(1.01), std::invalid_argument);
}

TEST_CASE("wrapped distance properties hold over random draws") {
  std::mt19937_64 rng(20240817);
  std::uniform_real_distribution<double> unit(0.0, std::nextafter(1.0, 0.0));
  int checked = 0;
  for (int i = 0; i < 10000; ++i) {
    const double a = unit(rng);
    const double b = unit(rng);
    const double d = wrapped_unit_distance(a, b);

    // Symmetry and bounds.
    CHECK(d == wrapped_unit_distance(b, a));
    CHECK(d >= 0.0);
    CHECK(d <= 0.5);

    // Zero exactly on (and only on) equal angles.
    CHECK(wrapped_unit_distance(a, a) == 0.0);
    if (a != b) CHECK(d > 0.0);

    // Rotating both angles by the same shift leaves the distance alone.
    const double s = unit(rng);
    const double as = a + s >= 1.0 ? a + s - 1.0 : a + s;
    const double bs = b + s >= 1.0 ? b + s - 1.0 : b + s;
    CHECK(wrapped_unit_distance(as, bs) == doctest::Approx(d).epsilon(0).scale(1).abs(1e-12));

    // Triangle inequality through a third angle.
    const double c = unit(rng);
    CHECK(d <= wrapped_unit_distance(a, c) + wrapped_unit_distance(c, b) + 1e-15);

    // Degrees and unit agree up to the 360 scale.
    const double deg = wrapped_deg_error(a * 360.0, b * 360.0);
    CHECK(deg == doctest::Approx(360.0 * d).epsilon(0).scale(1).abs(1e-9));
    ++checked;
  }
  CHECK(checked == 10000);
}
