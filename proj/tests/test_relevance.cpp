#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "dtd/relevance.hpp"

using namespace dtd;

namespace {

struct RandomLayer {
    DetectionLayer layer;
    Tensor x;  // non-negative activations
    Tensor r;  // upper-layer relevance, one entry per output
};

// Random rectified layer plus a consistent relevance vector: each neuron's
// relevance is its own activation, the situation produced by an upstream
// consistent propagation pass.
RandomLayer random_layer(std::uint64_t seed, std::size_t d_in = 7, std::size_t d_out = 5,
                         bool nonpositive_bias = true) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> wdist(0.0, 1.0);
    std::uniform_real_distribution<double> xdist(0.0, 2.0);
    RandomLayer rl;
    rl.layer.weights = Tensor({d_in, d_out}, 0.0);
    for (auto& w : rl.layer.weights.mutable_data()) w = wdist(rng);
    rl.layer.biases = Tensor({d_out}, 0.0);
    for (auto& b : rl.layer.biases.mutable_data())
        b = nonpositive_bias ? -xdist(rng) * 0.1 : wdist(rng) * 0.1;
    rl.x = Tensor({d_in}, 0.0);
    for (auto& v : rl.x.mutable_data()) v = xdist(rng);
    rl.r = Tensor({d_out}, 0.0);
    for (std::size_t j = 0; j < d_out; ++j) {
        double z = rl.layer.biases[j];
        for (std::size_t i = 0; i < d_in; ++i) z += rl.x[i] * rl.layer.weights.at(i, j);
        rl.r[j] = std::max(0.0, z);
    }
    return rl;
}

double pos(double v) { return v > 0.0 ? v : 0.0; }
double neg(double v) { return v < 0.0 ? v : 0.0; }

}  // namespace

// ---- per-neuron sum oracles against the matrix forms ---------------------

TEST_CASE("w2 matrix form matches the per-neuron sum oracle") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const RandomLayer rl = random_layer(seed);
        const Tensor got = propagate_w2(rl.layer, rl.r);
        for (std::size_t i = 0; i < rl.x.size(); ++i) {
            double want = 0.0;
            for (std::size_t j = 0; j < rl.r.size(); ++j) {
                double denom = 0.0;
                for (std::size_t k = 0; k < rl.x.size(); ++k)
                    denom += rl.layer.weights.at(k, j) * rl.layer.weights.at(k, j);
                if (std::abs(denom) < 1e-12) continue;
                want += rl.layer.weights.at(i, j) * rl.layer.weights.at(i, j) / denom * rl.r[j];
            }
            CHECK(got[i] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("z matrix form matches the per-neuron sum oracle (bias-free denominator)") {
    for (std::uint64_t seed = 100; seed < 150; ++seed) {
        const RandomLayer rl = random_layer(seed);
        const Tensor got = propagate_z(rl.layer, rl.x, rl.r);
        for (std::size_t i = 0; i < rl.x.size(); ++i) {
            double want = 0.0;
            for (std::size_t j = 0; j < rl.r.size(); ++j) {
                double denom = 0.0;
                for (std::size_t k = 0; k < rl.x.size(); ++k)
                    denom += rl.x[k] * rl.layer.weights.at(k, j);
                if (std::abs(denom) < 1e-12) continue;
                want += rl.x[i] * rl.layer.weights.at(i, j) / denom * rl.r[j];
            }
            CHECK(got[i] == doctest::Approx(want).epsilon(1e-11).scale(1.0));
        }
    }
}

TEST_CASE("zplus matrix form matches the per-neuron sum oracle") {
    for (std::uint64_t seed = 200; seed < 250; ++seed) {
        const RandomLayer rl = random_layer(seed);
        const Tensor got = propagate_zplus(rl.layer, rl.x, rl.r).input;
        for (std::size_t i = 0; i < rl.x.size(); ++i) {
            double want = 0.0;
            for (std::size_t j = 0; j < rl.r.size(); ++j) {
                double denom = 0.0;
                for (std::size_t k = 0; k < rl.x.size(); ++k)
                    denom += rl.x[k] * pos(rl.layer.weights.at(k, j));
                if (std::abs(denom) < 1e-12) continue;
                want += rl.x[i] * pos(rl.layer.weights.at(i, j)) / denom * rl.r[j];
            }
            CHECK(got[i] == doctest::Approx(want).epsilon(1e-12));
        }
    }
}

TEST_CASE("zbox matrix form matches the per-neuron sum oracle") {
    for (std::uint64_t seed = 300; seed < 350; ++seed) {
        RandomLayer rl = random_layer(seed);
        // a box [-1, 3] containing 0 and all activations
        const Tensor lower({rl.x.size()}, -1.0);
        const Tensor upper({rl.x.size()}, 3.0);
        const Tensor got = propagate_zbox(rl.layer, rl.x, rl.r, lower, upper).input;
        for (std::size_t i = 0; i < rl.x.size(); ++i) {
            double want = 0.0;
            for (std::size_t j = 0; j < rl.r.size(); ++j) {
                double denom = 0.0;
                for (std::size_t k = 0; k < rl.x.size(); ++k) {
                    const double w = rl.layer.weights.at(k, j);
                    denom += rl.x[k] * w - lower[k] * pos(w) - upper[k] * neg(w);
                }
                if (std::abs(denom) < 1e-12) continue;
                const double w = rl.layer.weights.at(i, j);
                want += (rl.x[i] * w - lower[i] * pos(w) - upper[i] * neg(w)) / denom * rl.r[j];
            }
            CHECK(got[i] == doctest::Approx(want).epsilon(1e-11).scale(1.0));
        }
    }
}

// ---- root-point oracle ----------------------------------------------------

TEST_CASE("zplus equals the Taylor term at the root on the search line") {
    // with R_j = x_j, the rule must equal w_ij * (x_i - root_i) where the root
    // is the intersection of {x + t * (x .* 1[w>=0])} with the neuron's
    // zero-preactivation plane
    for (std::uint64_t seed = 400; seed < 420; ++seed) {
        const RandomLayer rl = random_layer(seed);
        const std::size_t d_in = rl.x.size();
        const Tensor got = propagate_zplus(rl.layer, rl.x, rl.r).input;
        Tensor want({d_in}, 0.0);
        for (std::size_t j = 0; j < rl.r.size(); ++j) {
            if (rl.r[j] == 0.0) continue;  // inactive neuron contributes nothing
            double z = rl.layer.biases[j], vw = 0.0;
            for (std::size_t i = 0; i < d_in; ++i) {
                const double w = rl.layer.weights.at(i, j);
                z += rl.x[i] * w;
                if (w >= 0.0) vw += rl.x[i] * w;
            }
            REQUIRE(vw > 0.0);
            const double t = -z / vw;
            for (std::size_t i = 0; i < d_in; ++i) {
                const double w = rl.layer.weights.at(i, j);
                const double root_i = rl.x[i] + t * (w >= 0.0 ? rl.x[i] : 0.0);
                want[i] += w * (rl.x[i] - root_i);
            }
            // the root must lie on the plane z_j = 0
            double z_at_root = rl.layer.biases[j];
            for (std::size_t i = 0; i < d_in; ++i)
                z_at_root += (rl.x[i] + t * (rl.layer.weights.at(i, j) >= 0.0 ? rl.x[i] : 0.0)) *
                             rl.layer.weights.at(i, j);
            CHECK(z_at_root == doctest::Approx(0.0).scale(1.0).epsilon(1e-10));
        }
        for (std::size_t i = 0; i < d_in; ++i)
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-10).scale(1.0));
    }
}

// ---- conservation and positivity properties -------------------------------

TEST_CASE("w2, zplus and zbox conserve relevance and keep it positive") {
    for (std::uint64_t seed = 500; seed < 1000; ++seed) {
        const RandomLayer rl = random_layer(seed, 1 + seed % 9, 1 + seed % 7);
        const double total = total_sum(rl.r);

        const Tensor r_w2 = propagate_w2(rl.layer, rl.r);
        CHECK(total_sum(r_w2) == doctest::Approx(total).epsilon(1e-10).scale(1.0));
        for (double v : r_w2.data()) CHECK(v >= -1e-12);

        const Tensor r_zp = propagate_zplus(rl.layer, rl.x, rl.r).input;
        CHECK(total_sum(r_zp) == doctest::Approx(total).epsilon(1e-10).scale(1.0));
        for (double v : r_zp.data()) CHECK(v >= -1e-12);

        const Tensor lower({rl.x.size()}, -0.5);
        const Tensor upper({rl.x.size()}, 2.5);
        const Tensor r_zb = propagate_zbox(rl.layer, rl.x, rl.r, lower, upper).input;
        CHECK(total_sum(r_zb) == doctest::Approx(total).epsilon(1e-10).scale(1.0));
        for (double v : r_zb.data()) CHECK(v >= -1e-12);
    }
}

TEST_CASE("zbox degenerate zero-denominator cases yield zero relevance, not NaN") {
    // the denominator z_j - l w+ - h w- vanishes exactly when every term does;
    // build the four ways a term can vanish and check the guarded division
    DetectionLayer layer;
    layer.weights = Tensor({4, 1}, std::vector<double>{0.0,   // w = 0 entirely
                                                       1.0,   // x at the lower bound, w+ > 0
                                                       -1.0,  // x at the upper bound, w- < 0
                                                       0.0});
    layer.biases = Tensor({1}, 0.0);
    // bounds: component 0 pinned (l = h = x = 0), 1 at l, 2 at h, 3 free
    const Tensor lower = Tensor::vec({0.0, -1.0, -1.0, -1.0});
    const Tensor upper = Tensor::vec({0.0, 1.0, 1.0, 1.0});
    const Tensor x = Tensor::vec({0.0, -1.0, 1.0, 0.5});
    const Tensor r = Tensor::vec({3.0});

    // denominator: 0 + (-1*1 - (-1)*1) + (1*-1 - 1*-1) + 0 = 0
    const LayerRelevance lr = propagate_zbox(layer, x, r, lower, upper);
    REQUIRE(lr.input.all_finite());
    for (double v : lr.input.data()) CHECK(v == 0.0);
}

TEST_CASE("dead neurons (zero denominator) receive and forward no relevance") {
    DetectionLayer layer;
    layer.weights = Tensor({2, 2}, std::vector<double>{-1.0, 1.0, -1.0, 1.0});
    layer.biases = Tensor({2}, 0.0);
    const Tensor x = Tensor::vec({1.0, 1.0});
    // neuron 0 has only negative weights: z+ denominator is 0
    const Tensor r = Tensor::vec({0.0, 5.0});
    const Tensor out = propagate_zplus(layer, x, r).input;
    REQUIRE(out.all_finite());
    CHECK(total_sum(out) == doctest::Approx(5.0));
}

// ---- bias absorption -------------------------------------------------------

TEST_CASE("positive-bias absorption restores exact conservation") {
    for (std::uint64_t seed = 1100; seed < 1200; ++seed) {
        RandomLayer rl = random_layer(seed, 6, 4, /*nonpositive_bias=*/false);
        const LayerRelevance lr = propagate_zplus(rl.layer, rl.x, rl.r, true);
        const double total = total_sum(lr.input) + total_sum(lr.bias);
        CHECK(total == doctest::Approx(total_sum(rl.r)).epsilon(1e-9).scale(1.0));
        for (double v : lr.bias.data()) CHECK(v >= -1e-12);

        const Tensor lower({rl.x.size()}, -0.5);
        const Tensor upper({rl.x.size()}, 2.5);
        const LayerRelevance lb = propagate_zbox(rl.layer, rl.x, rl.r, lower, upper, true);
        CHECK(total_sum(lb.input) + total_sum(lb.bias) ==
              doctest::Approx(total_sum(rl.r)).epsilon(1e-9).scale(1.0));
    }
}

// ---- pooling redistribution -------------------------------------------------

TEST_CASE("pool redistribution is proportional and conservative") {
    const PoolingLayer pool{3, 1.0};
    const Tensor detections = Tensor::vec({1.0, 2.0, 3.0, 0.0, 0.0, 0.0});
    const Tensor pooled_r = Tensor::vec({12.0, 0.0});
    const Tensor r = redistribute_pool(pool, detections, pooled_r);
    CHECK(r[0] == doctest::Approx(2.0));
    CHECK(r[1] == doctest::Approx(4.0));
    CHECK(r[2] == doctest::Approx(6.0));
    CHECK(r[3] == 0.0);  // dead group with zero relevance
    CHECK(total_sum(r) == doctest::Approx(total_sum(pooled_r)));
    CHECK_THROWS_AS(redistribute_pool(pool, detections, Tensor::vec({1.0})), ShapeError);
}

// ---- full backward pass -----------------------------------------------------

namespace {

Network small_net(std::uint64_t seed, bool two_layers = false) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 0.6);
    Network net;
    net.input_size = 8;
    net.input_lower = Tensor({8}, -0.5);
    net.input_upper = Tensor({8}, 1.5);
    DetectionLayer d1;
    d1.weights = Tensor({8, 6}, 0.0);
    for (auto& w : d1.weights.mutable_data()) w = dist(rng);
    d1.biases = Tensor({6}, -0.05);
    net.layers.emplace_back(d1);
    if (two_layers) {
        net.layers.emplace_back(PoolingLayer{2, 1.0});
        DetectionLayer d2;
        d2.weights = Tensor({3, 4}, 0.0);
        for (auto& w : d2.weights.mutable_data()) w = dist(rng);
        d2.biases = Tensor({4}, -0.02);
        net.layers.emplace_back(d2);
        net.layers.emplace_back(PoolingLayer{4, 1.0});
    } else {
        net.layers.emplace_back(PoolingLayer{6, 1.0});
    }
    net.validate();
    return net;
}

Tensor random_input(std::uint64_t seed, std::size_t n = 8) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-0.5, 1.5);
    Tensor x({n}, 0.0);
    for (auto& v : x.mutable_data()) v = dist(rng);
    return x;
}

}  // namespace

TEST_CASE("deep taylor with the default assignment is conservative and positive") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Network net = small_net(seed, seed % 2 == 1);
        const Tensor x = random_input(9000 + seed);
        const ActivationTrace trace = forward(net, x);
        const Heatmap map = deep_taylor(net, trace, default_assignment(net));

        CHECK(map.output_relevance == trace.output());
        CHECK(map.consistency_guaranteed);
        CHECK(total_sum(map.relevance) ==
              doctest::Approx(trace.output()).epsilon(1e-9).scale(1.0));
        for (double v : map.relevance.data()) CHECK(v >= -1e-12);
        // audit trail: every boundary carries the full relevance
        for (double s : map.layer_sums)
            CHECK(s == doctest::Approx(trace.output()).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("deep taylor records rule names input-to-output") {
    const Network net = small_net(3, true);
    const Heatmap map = deep_taylor(net, forward(net, random_input(1)),
                                    default_assignment(net));
    REQUIRE(map.rule_names.size() == 2);
    CHECK(map.rule_names[0] == "zbox");
    CHECK(map.rule_names[1] == "zplus");
}

TEST_CASE("deep taylor rejects mismatched rule assignments and invalid domains") {
    const Network net = small_net(4, true);
    const ActivationTrace trace = forward(net, random_input(2));
    CHECK_THROWS_AS(deep_taylor(net, trace, RuleAssignment{RelevanceRule::zplus()}),
                    std::invalid_argument);

    // zplus on the first layer is invalid: inputs go down to -0.5
    Tensor x = random_input(3);
    x[0] = -0.4;
    RuleAssignment all_zplus{RelevanceRule::zplus(), RelevanceRule::zplus()};
    CHECK_THROWS_AS(deep_taylor(net, forward(net, x), all_zplus), std::domain_error);
}

TEST_CASE("rules reject negative incoming relevance") {
    const RandomLayer rl = random_layer(42);
    Tensor r = rl.r;
    r[0] = -1.0;
    CHECK_THROWS_AS(apply_rule(rl.layer, rl.x, r, RelevanceRule::zplus()), std::domain_error);
    CHECK_THROWS_AS(apply_rule(rl.layer, rl.x, r, RelevanceRule::w2()), std::domain_error);
}

TEST_CASE("zbox rejects boxes that exclude zero or the sample") {
    const RandomLayer rl = random_layer(43);
    const std::size_t n = rl.x.size();
    CHECK_THROWS_AS(
        propagate_zbox(rl.layer, rl.x, rl.r, Tensor({n}, 0.5), Tensor({n}, 2.0)),
        std::domain_error);
    CHECK_THROWS_AS(
        propagate_zbox(rl.layer, rl.x, rl.r, Tensor({n}, -1.0), Tensor({n}, 0.01)),
        std::domain_error);
}

TEST_CASE("rule parameter validation") {
    CHECK_THROWS_AS(RelevanceRule::alphabeta(2.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(RelevanceRule::alphabeta(0.5, -0.5), std::invalid_argument);
    CHECK_NOTHROW(RelevanceRule::alphabeta(2.0, 1.0));
    CHECK_THROWS_AS(RelevanceRule::eps(0.0), std::invalid_argument);
    CHECK_THROWS_AS(RelevanceRule::eps(-1.0), std::invalid_argument);
}

// ---- min-max relevance model -------------------------------------------------

TEST_CASE("minmax predict matches hand arithmetic") {
    MinMaxModel m;
    m.bottom_up = Tensor({2, 2}, std::vector<double>{1.0, 0.5, 1.0, -0.5});
    m.top_down = Tensor({1, 2}, std::vector<double>{-1.0, 2.0});
    m.bias = Tensor({2}, std::vector<double>{0.5, -0.25});
    m.group_size = 2;

    const Tensor x = Tensor::vec({1.0, 2.0});
    const Tensor rup = Tensor::vec({1.0});
    // a1 = min(0, -1 + 0.5) = -0.5; a2 = min(0, 2 - 0.25) = 0
    // y1 = max(0, 1 + 2 - 0.5) = 2.5; y2 = max(0, 0.5 - 1 + 0) = 0
    const Tensor pred = minmax_predict(m, x, rup);
    REQUIRE(pred.size() == 1);
    CHECK(pred[0] == doctest::Approx(2.5));
}

TEST_CASE("minmax training fits a teacher model") {
    // teacher generates the targets; a student trained from a different seed
    // must drive the mse well below its starting point
    const MinMaxModel teacher = minmax_init(6, 8, 4, 2, 0.4, 77);
    std::mt19937_64 rng(78);
    std::uniform_real_distribution<double> xdist(0.0, 1.0);
    std::vector<MinMaxSample> samples;
    for (int s = 0; s < 200; ++s) {
        MinMaxSample ms;
        ms.x = Tensor({6}, 0.0);
        for (auto& v : ms.x.mutable_data()) v = xdist(rng);
        ms.upper_relevance = Tensor({4}, 0.0);
        for (auto& v : ms.upper_relevance.mutable_data()) v = xdist(rng);
        ms.true_relevance = minmax_predict(teacher, ms.x, ms.upper_relevance);
        samples.push_back(std::move(ms));
    }

    MinMaxModel student = minmax_init(6, 8, 4, 2, 0.05, 79);
    TrainConfig cfg;
    cfg.iterations = 15000;
    cfg.minibatch_size = 10;
    cfg.learning_rate = 1e-2;
    cfg.seed = 80;
    const MinMaxTrainResult result = train_minmax(student, samples, cfg);
    CHECK(result.final_mse < 0.05 * result.initial_mse);
}

TEST_CASE("minmax training is deterministic and a zero-iteration run is a no-op") {
    std::vector<MinMaxSample> samples;
    std::mt19937_64 rng(81);
    std::uniform_real_distribution<double> xdist(0.0, 1.0);
    for (int s = 0; s < 20; ++s) {
        MinMaxSample ms;
        ms.x = Tensor({3}, 0.0);
        for (auto& v : ms.x.mutable_data()) v = xdist(rng);
        ms.upper_relevance = Tensor::vec({xdist(rng)});
        ms.true_relevance = Tensor::vec({xdist(rng)});
        samples.push_back(std::move(ms));
    }
    TrainConfig cfg;
    cfg.iterations = 100;
    cfg.minibatch_size = 5;
    cfg.learning_rate = 1e-2;
    cfg.seed = 4;

    MinMaxModel a = minmax_init(3, 4, 1, 4, 0.1, 7);
    MinMaxModel b = minmax_init(3, 4, 1, 4, 0.1, 7);
    train_minmax(a, samples, cfg);
    train_minmax(b, samples, cfg);
    CHECK(a.bottom_up.data() == b.bottom_up.data());
    CHECK(a.top_down.data() == b.top_down.data());
    CHECK(a.bias.data() == b.bias.data());

    MinMaxModel c = minmax_init(3, 4, 1, 4, 0.1, 7);
    cfg.iterations = 0;
    const Tensor before = c.bottom_up;
    const MinMaxTrainResult r = train_minmax(c, samples, cfg);
    CHECK(r.initial_mse == r.final_mse);
    CHECK(c.bottom_up.data() == before.data());
}

TEST_CASE("minmax decomposition conserves the predicted relevance") {
    const MinMaxModel m = minmax_init(5, 6, 3, 2, 0.5, 90);
    std::mt19937_64 rng(91);
    std::uniform_real_distribution<double> xdist(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        Tensor x({5}, 0.0);
        for (auto& v : x.mutable_data()) v = xdist(rng);
        Tensor rup({3}, 0.0);
        for (auto& v : rup.mutable_data()) v = xdist(rng);
        const double predicted = total_sum(minmax_predict(m, x, rup));
        const Tensor r = minmax_decompose(m, x, rup, RelevanceRule::zplus());
        CHECK(total_sum(r) == doctest::Approx(predicted).epsilon(1e-10).scale(1.0));
        for (double v : r.data()) CHECK(v >= -1e-12);
    }
    CHECK_THROWS_AS(minmax_decompose(m, Tensor({5}, 0.5), Tensor({3}, 0.5),
                                     RelevanceRule::eps(1.0)),
                    std::invalid_argument);
}

TEST_CASE("minmax archive round trip is bit-exact") {
    const MinMaxModel m = minmax_init(4, 6, 2, 3, 0.2, 55);
    const std::string path =
        (std::filesystem::temp_directory_path() / "dtd_minmax_rt").string();
    save_model(minmax_to_archive(m), path);
    const MinMaxModel back = minmax_from_archive(load_model(path));
    CHECK(back.bottom_up.data() == m.bottom_up.data());
    CHECK(back.top_down.data() == m.top_down.data());
    CHECK(back.bias.data() == m.bias.data());
    CHECK(back.group_size == 3);

    ModelArchive wrong;
    wrong.strings["kind"] = "network";
    CHECK_THROWS_AS(minmax_from_archive(wrong), IoError);
}
