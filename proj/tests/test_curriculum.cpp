#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "imac/curriculum.hpp"
#include "test_support.hpp"

using namespace imac;
using imac::testing::plr_score_double_sum;

namespace {

PLRBuffer make_buffer(double rho = 0.1, size_t cap = 2500, double replay_prob = 0.5) {
    PLRBufferConfig cfg;
    cfg.buffer_size = cap;
    cfg.staleness_coeff = rho;
    cfg.replay_prob = replay_prob;
    return PLRBuffer(cfg);
}

PLREntry entry_with_score(double score, int horizon = 10) {
    PLREntry e;
    e.context.context_len = 4;
    for (int i = 0; i < 4; ++i) {
        e.context.obs.push_back(std::vector<double>(4, 0.0));
        e.context.actions.push_back(0);
    }
    e.horizon = horizon;
    e.score = score;
    return e;
}

Dataset tiny_dataset() {
    Dataset ds;
    ds.grid_size = 1;
    ds.channels = 4;
    for (int e = 0; e < 5; ++e) {
        Episode ep;
        for (int i = 0; i < 12; ++i) {
            Transition t;
            t.obs.assign(4, 0);
            t.obs[static_cast<size_t>(i % 4)] = 1;
            t.action = static_cast<uint8_t>(i % 5);
            t.done = i == 11;
            ep.transitions.push_back(std::move(t));
        }
        ds.episodes.push_back(std::move(ep));
    }
    return ds;
}

}  // namespace

TEST_CASE("score is zero when no TD error is positive") {
    const std::vector<double> d = {-0.5, 0.0, -2.0};
    REQUIRE(plr_score(d, 0.985, 0.95, ScoreVariant::Eq7) == 0.0);
    REQUIRE(plr_score(d, 0.985, 0.95, ScoreVariant::MeanPositive) == 0.0);
}

TEST_CASE("single-step trajectories give the same score in both variants") {
    const std::vector<double> d = {1.0};
    REQUIRE(plr_score(d, 0.985, 0.95, ScoreVariant::Eq7) == 1.0);
    REQUIRE(plr_score(d, 0.985, 0.95, ScoreVariant::MeanPositive) == 1.0);
    Rng rng(1);
    for (int k = 0; k < 100; ++k) {
        const std::vector<double> one = {rng.normal()};
        REQUIRE(plr_score(one, 0.9, 0.8, ScoreVariant::Eq7) ==
                plr_score(one, 0.9, 0.8, ScoreVariant::MeanPositive));
    }
}

TEST_CASE("eq7 score equals the double-sum oracle") {
    const std::vector<double> fixed = {0.5, -1.0, 2.0};
    REQUIRE(std::abs(plr_score(fixed, 0.985, 0.95, ScoreVariant::Eq7) -
                     plr_score_double_sum(fixed, 0.985, 0.95)) < 1e-12);
    Rng rng(2);
    for (int k = 0; k < 1000; ++k) {
        const int T = static_cast<int>(rng.uniform_int(1, 25));
        std::vector<double> d(static_cast<size_t>(T));
        for (auto& x : d) x = rng.normal();
        const double gamma = rng.uniform();
        const double lam = rng.uniform();
        REQUIRE(std::abs(plr_score(d, gamma, lam, ScoreVariant::Eq7) -
                         plr_score_double_sum(d, gamma, lam)) < 1e-12);
    }
}

TEST_CASE("mean variant is exactly the clamped average") {
    Rng rng(3);
    for (int k = 0; k < 200; ++k) {
        const int T = static_cast<int>(rng.uniform_int(1, 15));
        std::vector<double> d(static_cast<size_t>(T));
        double expect = 0.0;
        for (auto& x : d) {
            x = rng.normal();
            expect += std::max(0.0, x);
        }
        expect /= T;
        REQUIRE(plr_score(d, 0.9, 0.9, ScoreVariant::MeanPositive) == expect);
    }
}

TEST_CASE("empty TD-error sequences are rejected") {
    REQUIRE_THROWS_AS(plr_score(std::vector<double>{}, 0.9, 0.9, ScoreVariant::Eq7), Error);
}

TEST_CASE("insert appends until full, then replaces the minimum") {
    PLRBuffer buf = make_buffer(0.1, 3);
    REQUIRE(buf.insert(entry_with_score(1.0)));
    REQUIRE(buf.size() == 1);
    REQUIRE(buf.insert(entry_with_score(2.0)));
    REQUIRE(buf.insert(entry_with_score(3.0)));
    REQUIRE(buf.full());

    SECTION("below-minimum candidates are discarded") {
        REQUIRE_FALSE(buf.insert(entry_with_score(0.5)));
        std::vector<double> scores;
        for (const auto& e : buf.entries()) scores.push_back(e.score);
        std::sort(scores.begin(), scores.end());
        REQUIRE(scores == std::vector<double>{1.0, 2.0, 3.0});
    }
    SECTION("better candidates replace the argmin") {
        REQUIRE(buf.insert(entry_with_score(2.5)));
        std::vector<double> scores;
        for (const auto& e : buf.entries()) scores.push_back(e.score);
        std::sort(scores.begin(), scores.end());
        REQUIRE(scores == std::vector<double>{2.0, 2.5, 3.0});
    }
    SECTION("score ties evict the oldest") {
        PLRBuffer b2 = make_buffer(0.1, 2);
        PLREntry first = entry_with_score(1.0, 11);
        PLREntry second = entry_with_score(1.0, 22);
        b2.insert(std::move(first));
        b2.insert(std::move(second));
        b2.insert(entry_with_score(1.5, 33));
        std::vector<int> horizons;
        for (const auto& e : b2.entries()) horizons.push_back(e.horizon);
        std::sort(horizons.begin(), horizons.end());
        REQUIRE(horizons == std::vector<int>{22, 33});
    }
}

TEST_CASE("a singleton buffer always replays its entry") {
    PLRBuffer buf = make_buffer();
    buf.insert(entry_with_score(0.7));
    Rng rng(4);
    for (int i = 0; i < 20; ++i) REQUIRE(buf.sample_replay(rng) == 0);
    REQUIRE(buf.counter() == 20);
}

TEST_CASE("draws update staleness bookkeeping") {
    PLRBuffer buf = make_buffer(0.0, 4);
    buf.insert(entry_with_score(5.0));
    buf.insert(entry_with_score(1.0));
    Rng rng(5);
    const size_t i = buf.sample_replay(rng);
    REQUIRE(i == 0);  // rho 0, peaked rank distribution picks the top score
    REQUIRE(buf.entries()[0].last_sampled == 0);
    REQUIRE(buf.counter() == 1);
}

TEST_CASE("rho = 0 rank sampling matches the analytic distribution") {
    PLRBuffer buf = make_buffer(0.0, 10);
    for (int i = 0; i < 10; ++i) buf.insert(entry_with_score(1.0 + i));
    const auto p = buf.replay_probabilities();
    // analytic: rank r weight r^-10, entry scores ascending so entry 9 is rank 1
    double z = 0.0;
    for (int r = 1; r <= 10; ++r) z += std::pow(r, -10.0);
    for (int i = 0; i < 10; ++i) {
        const double expect = std::pow(10 - i, -10.0) / z;
        REQUIRE(p[static_cast<size_t>(i)] == Catch::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("rho = 1 with equal staleness is uniform") {
    PLRBuffer buf = make_buffer(1.0, 8);
    for (int i = 0; i < 8; ++i) buf.insert(entry_with_score(static_cast<double>(i)));
    const auto p = buf.replay_probabilities();
    for (double v : p) REQUIRE(v == Catch::Approx(1.0 / 8.0).epsilon(1e-12));
}

TEST_CASE("curriculum rounds: branch behavior and coin fairness") {
    const Dataset ds = tiny_dataset();
    SegmentSampler sampler(ds, 4, 15);
    HorizonPolicy horizon;
    horizon.mode = HorizonPolicy::Mode::Random;
    CurriculumConfig cfg;

    int imagine_calls = 0, train_calls = 0;
    ImagineFn imagine_fn = [&](const ConditioningBuffer& ctx, int h) {
        ++imagine_calls;
        ImaginedTrajectory t;
        t.context = ctx;
        t.obs.assign(static_cast<size_t>(h) + 1, std::vector<double>(4, 0.0));
        for (int i = 0; i < h; ++i) {
            t.actions.push_back(0);
            t.rewards.push_back(0.0);
            t.dones.push_back(0);
            t.log_probs.push_back(0.0);
            t.values.push_back(0.0);
            t.deltas.push_back(0.1);
        }
        t.values.push_back(0.0);
        return t;
    };
    TrainFn train_fn = [&](const ImaginedTrajectory& t) {
        ++train_calls;
        return t;
    };

    SECTION("replay_prob 0 always explores and grows the buffer") {
        PLRBuffer buf = make_buffer(0.1, 2500, 0.0);
        Rng rng(6);
        for (int i = 0; i < 50; ++i) {
            const RoundResult rr =
                curriculum_round(buf, sampler, horizon, cfg, imagine_fn, train_fn, rng);
            REQUIRE(rr.explored);
        }
        REQUIRE(buf.size() == 50);
        REQUIRE(train_calls == 50);
    }

    SECTION("replay_prob 1 never grows the buffer once seeded") {
        PLRBuffer buf = make_buffer(0.1, 2500, 1.0);
        Rng rng(7);
        curriculum_round(buf, sampler, horizon, cfg, imagine_fn, train_fn, rng);  // fallback explore
        REQUIRE(buf.size() == 1);
        for (int i = 0; i < 50; ++i) {
            const RoundResult rr =
                curriculum_round(buf, sampler, horizon, cfg, imagine_fn, train_fn, rng);
            REQUIRE_FALSE(rr.explored);
        }
        REQUIRE(buf.size() == 1);
    }

    SECTION("explore fraction concentrates near the coin probability") {
        PLRBuffer buf = make_buffer(0.1, 2500, 0.5);
        Rng rng(8);
        int explored = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i)
            explored += curriculum_round(buf, sampler, horizon, cfg, imagine_fn, train_fn, rng)
                            .explored;
        REQUIRE(std::abs(explored / static_cast<double>(n) - 0.5) < 0.02);
    }

    SECTION("explore_train=false skips the update on explore rounds") {
        CurriculumConfig no_train = cfg;
        no_train.explore_train = false;
        PLRBuffer buf = make_buffer(0.1, 2500, 0.0);
        Rng rng(9);
        train_calls = 0;
        for (int i = 0; i < 10; ++i) {
            const RoundResult rr =
                curriculum_round(buf, sampler, horizon, no_train, imagine_fn, train_fn, rng);
            REQUIRE_FALSE(rr.trained);
        }
        REQUIRE(train_calls == 0);
    }

    SECTION("reimagine=false replays the stored rollout") {
        CurriculumConfig stale = cfg;
        stale.replay_reimagine = false;
        PLRBuffer buf = make_buffer(0.1, 2500, 1.0);
        Rng rng(10);
        curriculum_round(buf, sampler, horizon, stale, imagine_fn, train_fn, rng);
        REQUIRE(buf.entries()[0].stored_traj.has_value());
        imagine_calls = 0;
        for (int i = 0; i < 5; ++i)
            curriculum_round(buf, sampler, horizon, stale, imagine_fn, train_fn, rng);
        REQUIRE(imagine_calls == 0);  // replays use the stored trajectory
    }

    SECTION("replay refreshes the drawn entry's score") {
        PLRBuffer buf = make_buffer(0.1, 2500, 1.0);
        Rng rng(11);
        curriculum_round(buf, sampler, horizon, cfg, imagine_fn, train_fn, rng);
        const double before = buf.entries()[0].score;
        // train_fn that doubles the TD errors on replay
        TrainFn boost = [&](const ImaginedTrajectory& t) {
            ImaginedTrajectory out = t;
            for (auto& d : out.deltas) d *= 2.0;
            return out;
        };
        curriculum_round(buf, sampler, horizon, cfg, imagine_fn, boost, rng);
        REQUIRE(buf.entries()[0].score == Catch::Approx(2.0 * before));
    }
}

TEST_CASE("scores must be finite and nonnegative") {
    PLRBuffer buf = make_buffer();
    REQUIRE_THROWS_AS(buf.insert(entry_with_score(-0.1)), Error);
    REQUIRE_THROWS_AS(buf.insert(entry_with_score(std::nan(""))), Error);
}

TEST_CASE("replaying an empty buffer is an error") {
    PLRBuffer buf = make_buffer();
    Rng rng(12);
    REQUIRE_THROWS_AS(buf.sample_replay(rng), Error);
}
