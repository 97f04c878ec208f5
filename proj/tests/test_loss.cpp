#include "doctest.h"

#include "gbs/errors.hpp"
#include "gbs/grad_ledger.hpp"
#include "gbs/loss.hpp"
#include "support.hpp"

#include <limits>
#include <sstream>

using namespace gbs;
using gbs::test::central_difference;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Focal loss written out directly from the probabilities, no shared code.
double focal_reference(const Vector& x, int c, double g) {
  const double m = x.maxCoeff();
  double z = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) z += std::exp(x[i] - m);
  const double p = std::exp(x[c] - m) / z;
  return -std::pow(1.0 - p, g) * std::log(p);
}

}  // namespace

TEST_SUITE("loss") {
  TEST_CASE("two equal logits under cross-entropy") {
    const auto r = loss_and_grad(vec({0.0, 0.0}), 0, LossSpec::cross_entropy());
    CHECK(r.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(r.grad[0] == doctest::Approx(-0.5));
    CHECK(r.grad[1] == doctest::Approx(0.5));
  }

  TEST_CASE("focal with gamma zero reproduces cross-entropy bitwise") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 50; ++k) {
      const Vector x = gbs::test::random_vector(rng, 6, -4.0, 4.0);
      const int c = k % 6;
      const auto ce = loss_and_grad(x, c, LossSpec::cross_entropy());
      const auto fl = loss_and_grad(x, c, LossSpec::focal(0.0));
      CHECK(ce.loss == fl.loss);
      CHECK((ce.grad.array() == fl.grad.array()).all());
    }
  }

  TEST_CASE("focal gradient at a fixed point matches central differences") {
    const Vector x = vec({1.0, -0.5, 0.2});
    const int label = 1;
    const auto r = loss_and_grad(x, label, LossSpec::focal(2.0));
    const Vector fd = central_difference([&](const Vector& v) { return focal_reference(v, label, 2.0); }, x, 1e-5);
    for (Eigen::Index i = 0; i < 3; ++i) CHECK(gbs::test::close(r.grad[i], fd[i], 1e-6, 1e-10));
    CHECK(r.loss == doctest::Approx(focal_reference(x, label, 2.0)).epsilon(1e-14));
  }

  TEST_CASE("cross-entropy gradient is softmax minus one-hot") {
    std::mt19937_64 rng(3);
    for (int k = 0; k < 100; ++k) {
      const Vector x = gbs::test::random_vector(rng, 11, -6.0, 6.0);
      const int c = k % 11;
      const auto r = loss_and_grad(x, c, LossSpec::cross_entropy());
      Vector expect = softmax(x);
      expect[c] -= 1.0;
      CHECK((r.grad - expect).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(std::abs(r.grad.sum()) <= 1e-9);
      CHECK(r.loss >= 0.0);
    }
  }

  TEST_CASE("focal gradients sum to zero and the loss is nonnegative") {
    std::mt19937_64 rng(4);
    for (int k = 0; k < 100; ++k) {
      const Vector x = gbs::test::random_vector(rng, 21, -8.0, 8.0);
      const auto r = loss_and_grad(x, k % 21, LossSpec::focal(2.0));
      CHECK(std::abs(r.grad.sum()) <= 1e-9);
      CHECK(r.loss >= 0.0);
    }
  }

  TEST_CASE("softmax survives large logits") {
    const Vector p = softmax(vec({1000.0, 1000.0, -1000.0}));
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[2] == 0.0);
  }

  TEST_CASE("invalid inputs") {
    CHECK_THROWS_AS(loss_and_grad(vec({0.0, 0.0}), 2, LossSpec::cross_entropy()), InputError);
    CHECK_THROWS_AS(loss_and_grad(vec({0.0, 0.0}), -1, LossSpec::cross_entropy()), InputError);
    CHECK_THROWS_AS(loss_and_grad(vec({std::numeric_limits<double>::quiet_NaN(), 0.0}), 0, LossSpec::cross_entropy()),
                    InputError);
    CHECK_THROWS_AS(loss_and_grad(vec({std::numeric_limits<double>::infinity(), 0.0}), 0, LossSpec::focal(2.0)),
                    InputError);
  }

  TEST_CASE("loss kind names") {
    CHECK(parse_loss_kind("softmax-focal") == LossKind::softmax_focal);
    CHECK(parse_loss_kind(to_string(LossKind::softmax_cross_entropy)) == LossKind::softmax_cross_entropy);
    CHECK_THROWS_AS(parse_loss_kind("sigmoid-focal"), InputError);
  }
}

TEST_SUITE("grad_ledger") {
  TEST_CASE("empty batch leaves a fresh ledger at zero") {
    GradientLedger ledger(5, 0.9995);
    ledger.accumulate({}, Matrix(0, 5));
    CHECK(ledger.raw().isZero(0.0));
  }

  TEST_CASE("single proposal fills exactly its column") {
    GradientLedger ledger(4, 0.9);
    const Vector x = gbs::Vector::LinSpaced(4, -1.0, 2.0);
    const auto r = loss_and_grad(x, 2, LossSpec::focal(2.0));
    ledger.add(2, r.grad);
    for (Eigen::Index k = 0; k < 4; ++k) {
      if (k == 2) CHECK((ledger.raw().col(k).array() == r.grad.array()).all());
      else CHECK(ledger.raw().col(k).isZero(0.0));
    }
  }

  TEST_CASE("accumulation equals brute-force re-summation") {
    std::mt19937_64 rng(11);
    const int n1 = 5;  // 4 classes + background
    ProposalBatch batch;
    batch.logits.resize(50, n1);
    for (int j = 0; j < 50; ++j) {
      batch.logits.row(j) = gbs::test::random_vector(rng, n1, -3.0, 3.0).transpose();
      batch.labels.push_back(static_cast<int>(rng() % 4));  // class 4 absent
      batch.source.push_back(j % 5 == 0 ? ProposalSource::labeled : ProposalSource::unlabeled);
    }
    const auto grads = batch_loss_and_grad(batch, LossSpec::focal(2.0));
    GradientLedger ledger(n1, 0.9995);
    ledger.accumulate(batch.labels, grads.grads);

    double brute[5][5] = {};
    for (int j = 0; j < 50; ++j) {
      const auto r = loss_and_grad(batch.logits.row(j).transpose(), batch.labels[static_cast<std::size_t>(j)],
                                   LossSpec::focal(2.0));
      for (int i = 0; i < n1; ++i) brute[i][batch.labels[static_cast<std::size_t>(j)]] += r.grad[i];
    }
    for (int i = 0; i < n1; ++i) {
      for (int k = 0; k < n1; ++k) CHECK(ledger.raw()(i, k) == brute[i][k]);
    }
    CHECK(ledger.raw().col(4).isZero(0.0));
    // Shift invariance: every column sums to zero.
    for (int k = 0; k < n1; ++k) CHECK(std::abs(ledger.raw().col(k).sum()) <= 1e-9);
  }

  TEST_CASE("accumulation is additive over batches") {
    std::mt19937_64 rng(12);
    Matrix ga(20, 4), gb(30, 4);
    std::vector<ClassIndex> la, lb;
    for (int j = 0; j < 20; ++j) {
      ga.row(j) = gbs::test::random_vector(rng, 4, -1, 1).transpose();
      la.push_back(j % 4);
    }
    for (int j = 0; j < 30; ++j) {
      gb.row(j) = gbs::test::random_vector(rng, 4, -1, 1).transpose();
      lb.push_back((j * 3) % 4);
    }
    GradientLedger split(4, 0.5), joined(4, 0.5);
    split.accumulate(la, ga);
    split.accumulate(lb, gb);
    Matrix gab(50, 4);
    gab << ga, gb;
    std::vector<ClassIndex> lab = la;
    lab.insert(lab.end(), lb.begin(), lb.end());
    joined.accumulate(lab, gab);
    CHECK((split.raw() - joined.raw()).cwiseAbs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("cross-entropy sign pattern") {
    std::mt19937_64 rng(13);
    GradientLedger ledger(4, 0.0);
    for (int j = 0; j < 200; ++j) {
      const Vector x = gbs::test::random_vector(rng, 4, -2.0, 2.0);
      ledger.add(j % 4, loss_and_grad(x, j % 4, LossSpec::cross_entropy()).grad);
    }
    ledger.ema_update();
    for (int i = 0; i < 4; ++i) {
      for (int k = 0; k < 4; ++k) {
        if (i == k) CHECK(ledger.ema()(i, k) <= 0.0);
        else CHECK(ledger.ema()(i, k) >= 0.0);
      }
    }
  }

  TEST_CASE("ema recurrence") {
    SUBCASE("eta zero copies raw") {
      GradientLedger l(3, 0.0);
      l.set_ema(Matrix::Constant(3, 3, 5.0));
      l.add(1, Vector::Constant(3, 0.25));
      const Matrix raw = l.raw();
      l.ema_update();
      CHECK(l.ema() == raw);
      CHECK(l.raw().isZero(0.0));
    }
    SUBCASE("eta one freezes") {
      GradientLedger l(3, 1.0);
      l.set_ema(Matrix::Constant(3, 3, 5.0));
      l.add(0, Vector::Constant(3, 0.25));
      l.ema_update();
      CHECK(l.ema() == Matrix::Constant(3, 3, 5.0));
    }
    SUBCASE("default coefficient, hand recurrence") {
      GradientLedger l(2, 0.9995);
      l.set_ema(Matrix::Constant(2, 2, 2.0));
      l.ema_update();
      CHECK(l.ema()(0, 0) == doctest::Approx(1.999).epsilon(1e-15));
    }
    SUBCASE("non-finite raw is rejected") {
      GradientLedger l(2, 0.5);
      Vector g(2);
      g << std::numeric_limits<double>::infinity(), 0.0;
      l.add(0, g);
      CHECK_THROWS_AS(l.ema_update(), NumericError);
    }
  }

  TEST_CASE("dimension mismatches") {
    GradientLedger l(3, 0.5);
    CHECK_THROWS_AS(l.add(0, Vector::Zero(4)), InputError);
    CHECK_THROWS_AS(l.add(3, Vector::Zero(3)), InputError);
    std::vector<ClassIndex> labels{0, 1};
    CHECK_THROWS_AS(l.accumulate(labels, Matrix::Zero(3, 3)), InputError);
    CHECK_THROWS_AS(l.accumulate(labels, Matrix::Zero(2, 4)), InputError);
  }

  TEST_CASE("batch validation") {
    ProposalBatch b;
    b.logits = Matrix::Zero(2, 3);
    b.labels = {0, 3};
    b.source = {ProposalSource::labeled, ProposalSource::unlabeled};
    CHECK_THROWS_AS(b.validate(), InputError);
    b.labels = {0, 2};
    CHECK_NOTHROW(b.validate());
    b.source.pop_back();
    CHECK_THROWS_AS(b.validate(), InputError);
  }

  TEST_CASE("matrix dump round-trips exactly") {
    std::mt19937_64 rng(5);
    Matrix m(4, 4);
    for (int i = 0; i < 4; ++i) m.row(i) = gbs::test::random_vector(rng, 4, -1e3, 1e3).transpose();
    m(1, 2) = 1e-300;
    std::stringstream ss;
    write_matrix(ss, m);
    CHECK(read_matrix(ss) == m);
  }

  TEST_CASE("malformed matrix dumps") {
    std::stringstream ragged("1 2\n3\n");
    CHECK_THROWS_AS(read_matrix(ragged), ParseError);
    std::stringstream junk("1 x\n2 3\n");
    CHECK_THROWS_AS(read_matrix(junk), ParseError);
    std::stringstream rect("1 2 3\n4 5 6\n");
    CHECK_THROWS_AS(read_matrix(rect), ParseError);
  }
}
