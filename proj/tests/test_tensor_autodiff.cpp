#include <gtest/gtest.h>

#include <cmath>

#include "eegnet/gradcheck.hpp"
#include "eegnet/graph.hpp"
#include "eegnet/ops.hpp"

using namespace eegnet;

namespace {

Tensor t1(std::vector<Real> v) {
  const long n = static_cast<long>(v.size());
  return Tensor(Shape{n}, std::move(v));
}

}  // namespace

TEST(Matmul, IdentityCase) {
  Graph g;
  Value i2 = g.input(Tensor(Shape{2, 2}, {1, 0, 0, 1}));
  Value b = g.input(Tensor(Shape{2, 2}, {5, 6, 7, 8}));
  Value c = matmul(g, i2, b);
  EXPECT_EQ(g.val(c).data, (std::vector<Real>{5, 6, 7, 8}));
}

TEST(Matmul, ZeroAnnihilator) {
  Graph g;
  Value z = g.input(Tensor(Shape{2, 2}));
  Value b = g.input(Tensor(Shape{2, 2}, {3, -1, 2, 9}));
  Value c = matmul(g, z, b);
  EXPECT_EQ(g.val(c).data, (std::vector<Real>{0, 0, 0, 0}));
}

TEST(Matmul, HandExpandedProduct) {
  Graph g;
  Value a = g.input(Tensor(Shape{2, 2}, {1, 2, 3, 4}));
  Value b = g.input(Tensor(Shape{2, 2}, {5, 6, 7, 8}));
  Value c = matmul(g, a, b);
  EXPECT_EQ(g.val(c).data, (std::vector<Real>{19, 22, 43, 50}));
}

TEST(Matmul, ShapeMismatchThrows) {
  Graph g;
  Value a = g.input(Tensor(Shape{2, 3}));
  Value b = g.input(Tensor(Shape{2, 2}));
  EXPECT_THROW(matmul(g, a, b), ShapeError);
}

TEST(Matmul, GradientRule) {
  // loss = sum(A.B); dA = 1.B^T, dB = A^T.1
  ParamStore ps;
  Tensor* A = ps.add("A", Tensor(Shape{2, 3}, {1, 2, 3, 4, 5, 6}));
  Tensor* B = ps.add("B", Tensor(Shape{3, 2}, {1, -1, 2, 0, 3, 1}));
  Graph g;
  Value loss = sum(g, matmul(g, g.param(A), g.param(B)));
  g.backward(loss);
  // dA[i,k] = sum_j B[k,j]
  EXPECT_NEAR(A->grad[0], 0.0, 1e-12);   // B row 0 sums to 0
  EXPECT_NEAR(A->grad[1], 2.0, 1e-12);   // B row 1 sums to 2
  EXPECT_NEAR(A->grad[2], 4.0, 1e-12);   // B row 2 sums to 4
  // dB[k,j] = sum_i A[i,k]
  EXPECT_NEAR(B->grad[0], 5.0, 1e-12);
  EXPECT_NEAR(B->grad[4], 9.0, 1e-12);
}

TEST(Conv1d, IdentityKernel) {
  Graph g;
  Value s = g.input(t1({1, 2, 3, 4}));
  Value k = g.input(t1({1}));
  Value y = conv1d_valid(g, s, k, 1);
  EXPECT_EQ(g.val(y).data, (std::vector<Real>{1, 2, 3, 4}));
}

TEST(Conv1d, SlidingWindowSums) {
  Graph g;
  Value s = g.input(t1({1, 2, 3, 4}));
  Value k = g.input(t1({1, 1}));
  Value y = conv1d_valid(g, s, k, 1);
  EXPECT_EQ(g.val(y).data, (std::vector<Real>{3, 5, 7}));
}

TEST(Conv1d, ValidLengthFormula) {
  Graph g;
  Value s = g.input(Tensor(Shape{200}, Real(1)));
  Value k = g.input(t1({1, 2, 3}));
  Value y = conv1d_valid(g, s, k, 1);
  EXPECT_EQ(g.val(y).shape, (Shape{198}));
}

TEST(Conv1d, KernelTooLongThrows) {
  Graph g;
  Value s = g.input(t1({1, 2}));
  Value k = g.input(t1({1, 2, 3}));
  EXPECT_THROW(conv1d_valid(g, s, k, 1), ShapeError);
}

TEST(Conv1d, OutputLengthExhaustive) {
  // floor((K-k)/stride)+1 for all 1<=k<=K<=64, stride in {1,2}
  for (long K = 1; K <= 64; ++K)
    for (long k = 1; k <= K; ++k)
      for (long stride : {1L, 2L}) {
        Graph g;
        Value s = g.input(Tensor(Shape{K}, Real(0.5)));
        Value kv = g.input(Tensor(Shape{k}, Real(1)));
        Value y = conv1d_valid(g, s, kv, stride);
        ASSERT_EQ(g.val(y).shape[0], (K - k) / stride + 1)
            << "K=" << K << " k=" << k << " stride=" << stride;
      }
}

TEST(Activation, ReluSignCases) {
  Graph g;
  Value x = g.input(t1({-2, 3}));
  Value y = activation(g, x, Activation::Relu);
  EXPECT_EQ(g.val(y).data, (std::vector<Real>{0, 3}));
}

TEST(Activation, SoftmaxSymmetry) {
  Graph g;
  Value x = g.input(t1({0, 0}));
  Value y = activation(g, x, Activation::Softmax);
  EXPECT_NEAR(g.val(y).data[0], 0.5, 1e-15);
  EXPECT_NEAR(g.val(y).data[1], 0.5, 1e-15);
}

TEST(Activation, EluSeluClosedForm) {
  Graph g;
  Value x = g.input(t1({-1}));
  Value y = activation(g, x, Activation::Elu);
  EXPECT_NEAR(g.val(y).data[0], -0.6321205588285577, 1e-12);

  Value x2 = g.input(t1({1}));
  Value y2 = activation(g, x2, Activation::Selu);
  EXPECT_NEAR(g.val(y2).data[0], 1.0507009873554805, 1e-12);

  Value x3 = g.input(t1({-1}));
  Value y3 = activation(g, x3, Activation::Selu);
  EXPECT_NEAR(g.val(y3).data[0], -1.1113307378125625, 1e-12);
}

TEST(Activation, SoftmaxDistributionProperties) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x(Shape{6});
    for (Real& v : x.data) v = rng.uniform(-5, 5);
    Graph g;
    Value y = softmax(g, g.input(x), 0);
    Real total = 0;
    for (Real p : g.val(y).data) {
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
      total += p;
    }
    EXPECT_NEAR(total, 1.0, 1e-9);

    // shift invariance
    Tensor xs = x;
    for (Real& v : xs.data) v += 7.25;
    Graph g2;
    Value y2 = softmax(g2, g2.input(xs), 0);
    for (size_t i = 0; i < 6; ++i)
      EXPECT_NEAR(g.val(y).data[i], g2.val(y2).data[i], 1e-9);
  }
}

TEST(TimePool, WindowMaxAndAverage) {
  Graph g;
  Value x = g.input(Tensor(Shape{1, 4}, {1, 3, 2, 5}));
  Value ymax = time_pool(g, x, 2, PoolKind::Max);
  EXPECT_EQ(g.val(ymax).data, (std::vector<Real>{3, 5}));
  Value yavg = time_pool(g, x, 2, PoolKind::Average);
  EXPECT_EQ(g.val(yavg).data, (std::vector<Real>{2, 3.5}));
}

TEST(TimePool, IdentityWindow) {
  Graph g;
  Value x = g.input(Tensor(Shape{2, 3}, {1, 2, 3, 4, 5, 6}));
  for (PoolKind k : {PoolKind::Max, PoolKind::Average}) {
    Value y = time_pool(g, x, 1, k);
    EXPECT_EQ(g.val(y).data, g.val(x).data);
  }
}

TEST(TimePool, RemainderDroppedAndEmptyThrows) {
  Graph g;
  Value x = g.input(Tensor(Shape{1, 5}, {1, 2, 3, 4, 9}));
  Value y = time_pool(g, x, 2, PoolKind::Max);
  EXPECT_EQ(g.val(y).shape, (Shape{1, 2}));
  Value small = g.input(Tensor(Shape{1, 3}, {1, 2, 3}));
  EXPECT_THROW(time_pool(g, small, 4, PoolKind::Max), ShapeError);
}

TEST(TimePool, MaxDominatesAverage) {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x(Shape{3, 12});
    for (Real& v : x.data) v = rng.uniform(-4, 4);
    for (long w : {2L, 3L, 4L}) {
      Graph g;
      Value xv = g.input(x);
      const Tensor& mx = g.val(time_pool(g, xv, w, PoolKind::Max));
      const Tensor& av = g.val(time_pool(g, xv, w, PoolKind::Average));
      for (size_t i = 0; i < mx.data.size(); ++i)
        EXPECT_GE(mx.data[i], av.data[i]);
    }
  }
}

TEST(FlattenSpace, MergesLeadingAxes) {
  Graph g;
  Tensor x(Shape{16, 16, 99});
  for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<Real>(i);
  Value y = flatten_space(g, g.input(x));
  EXPECT_EQ(g.val(y).shape, (Shape{256, 99}));
  EXPECT_EQ(g.val(y).data, x.data);  // row-major preserving

  Value deg = flatten_space(g, g.input(Tensor(Shape{1, 1, 7}, Real(2))));
  EXPECT_EQ(g.val(deg).shape, (Shape{1, 7}));

  EXPECT_THROW(flatten_space(g, g.input(Tensor(Shape{2, 2}))), ShapeError);
}

TEST(FlattenSpace, ReshapeRoundTrip) {
  Graph g;
  Tensor x(Shape{3, 4, 5});
  for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = static_cast<Real>(i) * 0.5;
  Value flat = flatten_space(g, g.input(x));
  Value back = reshape(g, flat, Shape{3, 4, 5});
  EXPECT_EQ(g.val(back).data, x.data);
  EXPECT_EQ(g.val(back).shape, x.shape);
}

TEST(Backward, SumGivesOnes) {
  ParamStore ps;
  Tensor* w = ps.add("w", Tensor(Shape{4}, {1, 2, 3, 4}));
  Graph g;
  Value loss = sum(g, g.param(w));
  g.backward(loss);
  EXPECT_EQ(w->grad, (std::vector<Real>{1, 1, 1, 1}));
}

TEST(Backward, SumOfSquares) {
  ParamStore ps;
  Tensor* w = ps.add("w", Tensor(Shape{2}, {1, 2}));
  Graph g;
  Value wv = g.param(w);
  Value loss = sum(g, mul(g, wv, wv));
  g.backward(loss);
  EXPECT_NEAR(w->grad[0], 2.0, 1e-12);
  EXPECT_NEAR(w->grad[1], 4.0, 1e-12);
}

TEST(Backward, AccumulatesAcrossCalls) {
  ParamStore ps;
  Tensor* w = ps.add("w", Tensor(Shape{3}, {0.5, -1, 2}));
  Graph g;
  Value wv = g.param(w);
  Value loss = sum(g, mul(g, wv, wv));
  g.backward(loss);
  const std::vector<Real> once = w->grad;
  g.backward(loss);
  for (size_t i = 0; i < once.size(); ++i)
    EXPECT_DOUBLE_EQ(w->grad[i], 2 * once[i]);
}

TEST(Backward, FanOutAddsGradients) {
  ParamStore ps;
  Tensor* w = ps.add("w", Tensor(Shape{2}, {3, -2}));
  Graph g;
  Value wv = g.param(w);
  Value loss = sum(g, add(g, wv, wv));  // loss = 2*sum(w)
  g.backward(loss);
  EXPECT_EQ(w->grad, (std::vector<Real>{2, 2}));
}

TEST(Backward, NonScalarLossThrows) {
  ParamStore ps;
  Tensor* w = ps.add("w", Tensor(Shape{2}, {1, 1}));
  Graph g;
  Value wv = g.param(w);
  EXPECT_THROW(g.backward(wv), ShapeError);
}

TEST(FiniteDiff, ExactForLinear) {
  ParamStore ps;
  ps.add("w", Tensor(Shape{5}, {0.3, -1.2, 0.7, 2.0, -0.4}));
  auto f = [&](Graph& g) { return sum(g, g.param(&ps.entries()[0].tensor)); };
  GradCheckResult r = finite_diff_check(f, ps, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-9);
}

TEST(FiniteDiff, QuadraticAndConvKernels) {
  ParamStore ps;
  Tensor* w = ps.add("w", Tensor(Shape{3}, {0.8, -0.6, 1.1}));
  Tensor* k = ps.add("k", Tensor(Shape{2}, {0.5, -0.25}));
  Tensor sig(Shape{6}, {0.1, 0.9, -0.4, 0.7, 0.3, -0.2});
  auto f = [&](Graph& g) {
    Value wv = g.param(w);
    Value conv = conv1d_valid(g, g.input(sig), g.param(k), 1);
    Value quad = sum(g, mul(g, wv, wv));
    return add(g, sum(g, mul(g, conv, conv)), quad);
  };
  GradCheckResult r = finite_diff_check(f, ps, 1e-5);
  EXPECT_LT(r.max_rel_error, 1e-7) << r.worst_param << "[" << r.worst_index << "]";
}

TEST(FiniteDiff, ReportsNonFiniteCoordinate) {
  ParamStore ps;
  Tensor* w = ps.add("w", Tensor(Shape{1}, {1.0}));
  auto f = [&](Graph& g) {
    Value wv = g.param(w);
    // log of a parameter: perturbing to a negative value yields NaN
    const Tensor& t = g.val(wv);
    Tensor out = Tensor::scalar(std::log(t.data[0] - 1.0));  // NaN at w=1
    return g.make(std::move(out), {wv.id}, [](Graph&) {});
  };
  EXPECT_THROW(finite_diff_check(f, ps, 1e-3), NumericError);
}
