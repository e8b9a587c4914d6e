#include <catch2/catch_amalgamated.hpp>
#include <filesystem>

#include "medner/checkpoint.hpp"
#include "medner/optim.hpp"

using medner::adam_step;
using medner::clip_gradients;
using medner::GradMap;
using medner::lr_schedule;
using medner::ParamStore;
using medner::Tensor;

namespace {

// reference Adam, written straight from the update formulas
double adam_by_hand(double p0, const std::vector<double>& grads, double lr, double b1 = 0.9,
                    double b2 = 0.999, double eps = 1e-8) {
  double m = 0, v = 0, p = p0;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    double gr = grads[t - 1];
    m = b1 * m + (1 - b1) * gr;
    v = b2 * v + (1 - b2) * gr * gr;
    double mhat = m / (1 - std::pow(b1, static_cast<double>(t)));
    double vhat = v / (1 - std::pow(b2, static_cast<double>(t)));
    p -= lr * mhat / (std::sqrt(vhat) + eps);
  }
  return p;
}

}  // namespace

TEST_CASE("adam with zero gradient leaves fresh parameters unchanged") {
  ParamStore<double> ps;
  ps.add("w", Tensor<double>::full({2, 2}, 0.37));
  GradMap<double> g{{"w", Tensor<double>::zeros({2, 2})}};
  adam_step<double>(ps, g, 0.1);
  for (int i = 0; i < 4; ++i) REQUIRE(ps["w"][i] == 0.37);
}

TEST_CASE("adam single step matches the hand formula") {
  ParamStore<double> ps;
  ps.add("w", Tensor<double>::zeros({1}));
  GradMap<double> g{{"w", Tensor<double>::full({1}, 1.0)}};
  adam_step<double>(ps, g, 0.001);
  REQUIRE(ps["w"][0] == Catch::Approx(adam_by_hand(0.0, {1.0}, 0.001)).epsilon(1e-12));
  REQUIRE(ps["w"][0] == Catch::Approx(-0.001).margin(1e-9));
}

TEST_CASE("two successive identical gradients reproduce the two-step hand computation") {
  ParamStore<double> ps;
  ps.add("w", Tensor<double>::zeros({1}));
  GradMap<double> g{{"w", Tensor<double>::full({1}, 0.3)}};
  adam_step<double>(ps, g, 0.01);
  adam_step<double>(ps, g, 0.01);
  REQUIRE(ps["w"][0] == Catch::Approx(adam_by_hand(0.0, {0.3, 0.3}, 0.01)).epsilon(1e-12));
}

TEST_CASE("adam rejects mismatched gradient shapes") {
  ParamStore<double> ps;
  ps.add("w", Tensor<double>::zeros({2}));
  GradMap<double> g{{"w", Tensor<double>::zeros({3})}};
  REQUIRE_THROWS_AS(adam_step<double>(ps, g, 0.1), medner::ShapeMismatch);
}

TEST_CASE("power schedule") {
  REQUIRE(lr_schedule(0.5, 0.0, 17) == 0.5);
  REQUIRE(lr_schedule(0.001, 1e-5, 100) == Catch::Approx(0.001 / 1.001).epsilon(1e-12));
  REQUIRE(lr_schedule(0.01, 0.002, 5) == Catch::Approx(0.01 / 1.01).epsilon(1e-12));
}

TEST_CASE("gradient clipping clamps to [-5,5] and keeps interior values") {
  Tensor<double> g({4}, {7.2, -3.0, -12.0, 4.999});
  auto c = clip_gradients(g, 5.0);
  REQUIRE(c[0] == 5.0);
  REQUIRE(c[1] == -3.0);
  REQUIRE(c[2] == -5.0);
  REQUIRE(c[3] == 4.999);

  medner::Rng rng(21);
  Tensor<double> r = Tensor<double>::uniform({100}, rng, -20, 20);
  auto rc = clip_gradients(r, 5.0);
  for (int i = 0; i < 100; ++i) {
    REQUIRE(rc[i] <= 5.0);
    REQUIRE(rc[i] >= -5.0);
    if (std::fabs(r[i]) <= 5.0) REQUIRE(rc[i] == r[i]);
  }
}

TEST_CASE("checkpoint round trip with manifest") {
  namespace fs = std::filesystem;
  auto dir = fs::temp_directory_path() / "medner_ckpt_test";
  fs::create_directories(dir);
  auto path = (dir / "model.bin").string();

  ParamStore<float> ps;
  medner::Rng rng(9);
  ps.add("layer0/W", Tensor<float>::uniform({3, 4}, rng, -1, 1));
  ps.add("layer0/b", Tensor<float>::uniform({4}, rng, -1, 1));
  medner::save_checkpoint(ps, path, 1234, 77, {{"arch", "test"}});

  auto loaded = medner::load_params<float>(path);
  REQUIRE(loaded.slots.size() == 2);
  REQUIRE(loaded.at("layer0/W").shape() == medner::Shape{3, 4});
  for (std::int64_t i = 0; i < 12; ++i) REQUIRE(loaded.at("layer0/W")[i] == ps.at("layer0/W")[i]);

  auto manifest = medner::load_manifest(path);
  REQUIRE(manifest["precision"] == 32);
  REQUIRE(manifest["seed"] == 1234);
  REQUIRE(manifest["step"] == 77);
  REQUIRE(manifest["model"]["arch"] == "test");

  SECTION("corrupt magic is rejected") {
    std::ofstream os(path, std::ios::binary);
    os << "XXXXjunk";
    os.close();
    REQUIRE_THROWS_AS(medner::load_params<float>(path), medner::MalformedHeader);
  }
  fs::remove_all(dir);
}
