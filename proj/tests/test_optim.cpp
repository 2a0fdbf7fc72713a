#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "imac/optim.hpp"
#include "imac/rng.hpp"

using namespace imac;

TEST_CASE("zero gradient and zero decay leave parameters unchanged") {
    Tensor p = Tensor::from_vector({1.0, -2.0, 3.5});
    Tensor g = Tensor::zeros(p.shape);
    OptState st;
    AdamWConfig cfg;
    cfg.lr = 1e-3;
    cfg.weight_decay = 0.0;
    adamw_step(p, g, st, 1, cfg);
    REQUIRE(p.data == std::vector<double>{1.0, -2.0, 3.5});
    adamw_step(p, g, st, 2, cfg);
    REQUIRE(p.data == std::vector<double>{1.0, -2.0, 3.5});
}

TEST_CASE("first step matches the closed form") {
    // With m = (1-b1)g, v = (1-b2)g^2 and the folded bias-corrected step size,
    // the first update is -lr * g / (|g| + eps / sqrt(1 - b2)).
    const double g_val = 0.37;
    Tensor p = Tensor::scalar(0.0);
    Tensor g = Tensor::scalar(g_val);
    OptState st;
    AdamWConfig cfg;
    cfg.lr = 1e-2;
    cfg.weight_decay = 0.0;
    adamw_step(p, g, st, 1, cfg);
    const double expected = -cfg.lr * g_val / (std::abs(g_val) + cfg.eps / std::sqrt(1.0 - cfg.beta2));
    REQUIRE(p.data[0] == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("decay-only step multiplies by (1 - lr*wd)") {
    Tensor p = Tensor::scalar(1.0);
    Tensor g = Tensor::scalar(0.0);
    OptState st;
    AdamWConfig cfg;
    cfg.lr = 4e-5;   // reference optimizer setting
    cfg.weight_decay = 1e-2;
    adamw_step(p, g, st, 1, cfg);
    REQUIRE(p.data[0] == Catch::Approx(1.0 * (1.0 - 4e-7)).epsilon(1e-15));
}

TEST_CASE("non-finite gradient is rejected with the parameter name") {
    Tensor p = Tensor::scalar(1.0);
    Tensor g = Tensor::scalar(std::nan(""));
    OptState st;
    AdamWConfig cfg;
    REQUIRE_THROWS_WITH(adamw_step(p, g, st, 1, cfg, "layer0.W"),
                        Catch::Matchers::ContainsSubstring("layer0.W"));
}

TEST_CASE("optimizer pulls gradients from the graph and counts steps") {
    Rng rng(1);
    Tensor w = Tensor::randn({3, 1}, rng);
    AdamWConfig cfg;
    cfg.lr = 0.1;
    AdamW opt({{"w", &w}}, cfg);
    const Tensor before = w;
    for (int i = 0; i < 3; ++i) {
        Graph g;
        const int wid = g.param(&w);
        const int loss = g.sum(g.square(wid));
        g.backward(loss);
        opt.step(g);
    }
    REQUIRE(opt.step_count() == 3);
    double norm_before = 0, norm_after = 0;
    for (size_t i = 0; i < w.data.size(); ++i) {
        norm_before += before.data[i] * before.data[i];
        norm_after += w.data[i] * w.data[i];
    }
    REQUIRE(norm_after < norm_before);  // descent on ||w||^2
}

TEST_CASE("global norm clipping bounds the applied update") {
    Tensor p = Tensor::scalar(0.0);
    AdamWConfig cfg;
    cfg.lr = 1.0;
    cfg.clip_norm = 1.0;
    AdamW opt({{"p", &p}}, cfg);
    Graph g;
    const int pid = g.param(&p);
    const int loss = g.scale(pid, 1e6);  // gradient 1e6
    g.backward(loss);
    opt.step(g);
    REQUIRE(opt.last_grad_norm() == Catch::Approx(1e6));
    // clipped gradient = 1.0 -> first Adam step is about -lr
    REQUIRE(std::abs(p.data[0]) <= 1.001 * cfg.lr);
}

TEST_CASE("unbound parameter is an error") {
    Tensor p = Tensor::scalar(0.0);
    Tensor q = Tensor::scalar(0.0);
    AdamW opt({{"p", &p}, {"q", &q}}, {});
    Graph g;
    const int pid = g.param(&p);
    g.backward(g.sum(g.square(pid)));
    REQUIRE_THROWS_WITH(opt.step(g), Catch::Matchers::ContainsSubstring("q"));
}
