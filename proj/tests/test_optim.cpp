#include <cmath>

#include "doctest.h"
#include "gradcheck.hpp"
#include "mtmrc/optim.hpp"

using namespace mtmrc;
using namespace mtmrc::testing;

namespace {

ModelParameters filled(double v) {
  ModelParameters p(tiny_config(), 5);
  for (std::size_t i = 0; i < p.tensor_count(); ++i)
    for (auto& x : p.tensor(i).data) x = v;
  return p;
}

}  // namespace

TEST_SUITE("optim") {
  TEST_CASE("Adamax two-step trace with unit gradients") {
    auto p = filled(0.0);
    const auto g = filled(1.0);
    AdamaxState st(p);
    const AdamaxConfig cfg;
    adamax_step(p, g, st, cfg);
    // m = 0.1, u = 1 + 1e-8, step = 0.002 / (1 - 0.9).
    const double u = 1.0 + 1e-8;
    const double p1 = -(0.002 / 0.1) * 0.1 / u;
    CHECK(std::abs(st.moment.tensor(0).data[0] - 0.1) < 1e-12);
    CHECK(std::abs(st.inf_norm.tensor(0).data[0] - u) < 1e-12);
    CHECK(std::abs(p.tensor(0).data[0] - p1) < 1e-12);
    adamax_step(p, g, st, cfg);
    // m = 0.19, u = max(0.999 u, 1 + 1e-8) = u, step = 0.002 / (1 - 0.81).
    const double p2 = p1 - (0.002 / 0.19) * 0.19 / u;
    CHECK(std::abs(st.moment.tensor(0).data[0] - 0.19) < 1e-12);
    CHECK(std::abs(p.tensor(0).data[0] - p2) < 1e-12);
    CHECK(std::abs(p.tensor(0).data[0] - (-0.004 / u)) < 1e-12);
    CHECK(st.step == 2);
  }

  TEST_CASE("zero gradients and zero learning rate leave parameters unchanged") {
    auto p = filled(0.25);
    const auto before = p;
    AdamaxState st(p);
    for (int i = 0; i < 10; ++i) adamax_step(p, filled(0.0), st, AdamaxConfig{});
    for (std::size_t i = 0; i < p.tensor_count(); ++i) CHECK(p.tensor(i) == before.tensor(i));

    AdamaxConfig frozen;
    frozen.lr = 0.0;
    adamax_step(p, filled(2.0), st, frozen);
    for (std::size_t i = 0; i < p.tensor_count(); ++i) CHECK(p.tensor(i) == before.tensor(i));
    CHECK(st.moment.tensor(0).data[0] == doctest::Approx(0.2));
  }

  TEST_CASE("non-finite gradients raise a numeric error naming the tensor") {
    auto p = filled(0.0);
    auto g = filled(0.0);
    g.tensor(2).data[0] = std::nan("");
    AdamaxState st(p);
    try {
      adamax_step(p, g, st, AdamaxConfig{});
      FAIL("expected a numeric error");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find(p.name(2)) != std::string::npos);
    }
  }

  TEST_CASE("EMA closed forms") {
    const auto one = filled(1.0);
    EmaState ema(filled(0.0), 0.995);
    ema_update(ema, one);
    CHECK(std::abs(ema.shadow.tensor(0).data[0] - 0.005) < 1e-15);
    for (int k = 2; k <= 500; ++k) ema_update(ema, one);
    CHECK(std::abs(ema.shadow.tensor(0).data[0] - (1.0 - std::pow(0.995, 500))) < 1e-12);

    EmaState track(filled(0.0), 0.0);
    ema_update(track, filled(3.5));
    CHECK(track.shadow.tensor(1) == filled(3.5).tensor(1));
  }

  TEST_CASE("global-norm clipping") {
    auto g = filled(0.0);
    g.tensor(0).data[0] = 3.0;
    g.tensor(1).data[0] = 4.0;
    CHECK(clip_global_norm(g, 1.0) == doctest::Approx(5.0));
    CHECK(g.tensor(0).data[0] == doctest::Approx(0.6));
    CHECK(g.tensor(1).data[0] == doctest::Approx(0.8));
    CHECK(clip_global_norm(g, 10.0) == doctest::Approx(1.0));
    CHECK(g.tensor(0).data[0] == doctest::Approx(0.6));
  }
}
