#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "slogan/encoder.hpp"
#include "slogan/error.hpp"
#include "slogan/gradcheck.hpp"

using namespace slogan;

namespace {

using Dense = std::vector<std::vector<double>>;

Dense dense_normalized(const Graph& g) {
  const std::size_t n = g.node_count;
  Dense a(n, std::vector<double>(n, 0));
  for (std::size_t v = 0; v < n; ++v) a[v][v] = 1;
  for (auto [u, v] : g.edges) a[u][v] = a[v][u] = 1;
  std::vector<double> deg(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) deg[i] += a[i][j];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] /= std::sqrt(deg[i] * deg[j]);
  return a;
}

// Plain-loop forward pass of one graph: z = mean_v ReLU(Â ReLU(Â X W1 + b1) W2 + b2).
std::vector<double> dense_encode(const Graph& g, const EncoderParams& p) {
  const Dense a = dense_normalized(g);
  const std::size_t n = g.node_count, d = g.feature_dim, h = p.hidden_dim();
  auto layer = [&](const Dense& x, const Linear& lin, std::size_t in) {
    Dense xw(n, std::vector<double>(h, 0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < in; ++k)
        for (std::size_t j = 0; j < h; ++j) xw[i][j] += x[i][k] * lin.weight.at(k, j);
    Dense out(n, std::vector<double>(h, 0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < h; ++j) {
        double s = lin.bias.at(0, j);
        for (std::size_t m = 0; m < n; ++m) s += a[i][m] * xw[m][j];
        out[i][j] = std::max(0.0, s);
      }
    return out;
  };
  Dense x(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) x[i][k] = g.features[i * d + k];
  const Dense h2 = layer(layer(x, p.layer1, d), p.layer2, h);
  std::vector<double> z(h, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < h; ++j) z[j] += h2[i][j] / static_cast<double>(n);
  return z;
}

EncoderParams random_params(std::size_t d, std::size_t h, Rng& rng) {
  EncoderParams p = EncoderParams::init(d, h, rng);
  // non-zero biases so the bias path is exercised too
  for (Linear* l : {&p.layer1, &p.layer2})
    for (auto& b : l->bias.mutable_values()) b = static_cast<real>(rng.uniform(-0.1, 0.1));
  return p;
}

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("normalized adjacency examples") {
    Graph single;
    single.node_count = 1;
    single.feature_dim = 1;
    single.features = {1};
    auto a1 = normalize_adjacency(make_batch(std::vector<Graph>{single}));
    CHECK(a1->coeff(0, 0) == doctest::Approx(1.0));

    Graph pair = single;
    pair.node_count = 2;
    pair.features = {1, 1};
    pair.edges = {{0, 1}};
    auto a2 = normalize_adjacency(make_batch(std::vector<Graph>{pair}));
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) CHECK(a2->coeff(i, j) == doctest::Approx(0.5));

    Graph tri = single;
    tri.node_count = 3;
    tri.features = {1, 1, 1};
    tri.edges = {{0, 1}, {0, 2}, {1, 2}};
    auto a3 = normalize_adjacency(make_batch(std::vector<Graph>{tri}));
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(a3->coeff(i, j) == doctest::Approx(1.0 / 3.0));
  }

  TEST_CASE("normalized adjacency matches a dense oracle and is block diagonal") {
    Rng rng(3);
    std::vector<Graph> graphs;
    for (int i = 0; i < 4; ++i) graphs.push_back(test::random_graph(static_cast<std::size_t>(rng.between(1, 9)), 0.4, 2, rng, i));
    const GraphBatch batch = make_batch(graphs);
    const auto op = normalize_adjacency(batch);
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      const Dense d = dense_normalized(graphs[g]);
      for (std::size_t i = 0; i < graphs[g].node_count; ++i)
        for (std::size_t j = 0; j < graphs[g].node_count; ++j)
          CHECK(op->coeff(batch.offsets[g] + i, batch.offsets[g] + j) == doctest::Approx(d[i][j]).epsilon(1e-12));
    }
    for (std::size_t r = 0; r < op->rows; ++r)
      for (std::size_t k = op->row_ptr[r]; k < op->row_ptr[r + 1]; ++k)
        CHECK(batch.membership[r] == batch.membership[op->col_idx[k]]);
  }

  TEST_CASE("encode matches a plain-loop oracle") {
    Rng rng(5);
    const EncoderParams p = random_params(3, 16, rng);
    std::vector<Graph> graphs;
    for (int i = 0; i < 5; ++i) graphs.push_back(test::random_graph(static_cast<std::size_t>(rng.between(1, 10)), 0.35, 3, rng, i));
    const Tensor z = encode(make_batch(graphs), p).z;
    REQUIRE(z.shape() == Shape{5, 16});
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      const auto want = dense_encode(graphs[g], p);
      for (std::size_t j = 0; j < 16; ++j) CHECK(z.at(g, j) == doctest::Approx(want[j]).epsilon(1e-10));
    }
  }

  TEST_CASE("zero features and zero biases give z = 0") {
    Rng rng(1);
    EncoderParams p = EncoderParams::init(4, kHiddenDim, rng);
    Graph g = test::random_graph(6, 0.5, 4, rng);
    std::fill(g.features.begin(), g.features.end(), real(0));
    const Tensor z = encode(make_batch(std::vector<Graph>{g}), p).z;
    for (auto v : z.values()) CHECK(v == 0);
  }

  TEST_CASE("node permutation leaves z unchanged") {
    Rng rng(9);
    const EncoderParams p = random_params(4, kHiddenDim, rng);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
      const Graph g = test::random_graph(static_cast<std::size_t>(rng.between(1, 15)), 0.3, 4, rng);
      const Graph h = test::permute_graph(g, rng.permutation(g.node_count));
      const Tensor a = encode(make_batch(std::vector<Graph>{g}), p).z;
      const Tensor b = encode(make_batch(std::vector<Graph>{h}), p).z;
      worst = std::max(worst, test::max_abs_diff(a, b));
    }
    CHECK(worst < 1e-9);
  }

  TEST_CASE("batch encoding equals per-graph encoding") {
    Rng rng(10);
    const EncoderParams p = random_params(4, kHiddenDim, rng);
    std::vector<Graph> graphs;
    for (int i = 0; i < 20; ++i) graphs.push_back(test::random_graph(static_cast<std::size_t>(rng.between(1, 15)), 0.3, 4, rng, i));
    const Tensor zb = encode(make_batch(graphs), p).z;
    double worst = 0;
    for (std::size_t g = 0; g < graphs.size(); ++g) {
      const Tensor zg = encode(make_batch(std::vector<Graph>{graphs[g]}), p).z;
      for (std::size_t j = 0; j < kHiddenDim; ++j) worst = std::max(worst, std::abs(double(zb.at(g, j) - zg.at(0, j))));
    }
    CHECK(worst < 1e-9);
  }

  TEST_CASE("feature dimension mismatch is rejected") {
    Rng rng(2);
    const EncoderParams p = EncoderParams::init(3, 8, rng);
    const Graph g = test::random_graph(4, 0.5, 5, rng);
    CHECK_THROWS_AS(encode(make_batch(std::vector<Graph>{g}), p), ShapeError);
  }

  TEST_CASE("classify examples") {
    const Linear zero = Linear::zeros(4, 2);
    const Tensor p = classify(Tensor::from({1, 4}, {1, -2, 3, 0.5}), zero);
    CHECK(p.values()[0] == doctest::Approx(0.5));
    CHECK(p.values()[1] == doctest::Approx(0.5));

    // identity head: logits equal the input
    Linear id = Linear::zeros(2, 2);
    id.weight.mutable_values()[0] = 1;
    id.weight.mutable_values()[3] = 1;
    const Tensor q = classify(Tensor::from({1, 2}, {std::log(2.0), 0}), id);
    CHECK(q.values()[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(q.values()[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    Rng rng(4);
    const Linear head = Linear::glorot(6, 3, rng);
    const Tensor r = classify(test::random_tensor({10, 6}, rng, -5, 5), head);
    for (std::size_t i = 0; i < 10; ++i) CHECK(std::abs(r.at(i, 0) + r.at(i, 1) + r.at(i, 2) - 1) < 1e-9);
    CHECK_THROWS_AS(classify(test::random_tensor({2, 5}, rng), head), ShapeError);
  }

  TEST_CASE("encoder gradients match central differences") {
    Rng rng(6);
    EncoderParams p = random_params(3, 8, rng);
    std::vector<Graph> graphs;
    for (int i = 0; i < 4; ++i) graphs.push_back(test::random_graph(static_cast<std::size_t>(rng.between(2, 7)), 0.4, 3, rng, i));
    const GraphBatch batch = make_batch(graphs);
    const Tensor w = test::random_tensor({4, 8}, rng);
    const auto rep = finite_diff_check_params([&] { return sum_all(mul(encode(batch, p).z, w)); },
                                              {p.layer1.weight, p.layer1.bias, p.layer2.weight, p.layer2.bias}, 1e-3);
    INFO("worst entry " << rep.worst);
    CHECK(rep.max_rel_error < 1e-3);
  }
}
