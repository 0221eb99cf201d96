#include <Eigen/Dense>
#include <vector>

#include "boltzcurve/diffops.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace bc;

TEST_SUITE_BEGIN("diffops");

TEST_CASE("spatial gradient of |x|^2/2 is x") {
  auto f = [](auto t, const auto& x) {
    auto acc = t * 0.0;
    for (const auto& xi : x) acc = acc + xi * xi * 0.5;
    return acc;
  };
  const Eigen::Vector3d x(1.2, -0.7, 0.3);
  const Eigen::VectorXd g = spatial_grad_fn(f, 0.4, x);
  for (int i = 0; i < 3; ++i) CHECK(g[i] == doctest::Approx(x[i]).epsilon(1e-14));
}

TEST_CASE("spatial gradient of a constant net is zero") {
  Mlp net({3, 5, 1});
  net.params.setZero();
  net.bias(1)[0] = 3.14;
  const Eigen::VectorXd g = spatial_grad(net, 0.2, Eigen::Vector2d(1.0, 2.0));
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
}

TEST_CASE("spatial gradient matches central differences on random nets") {
  Rng rng(21);
  for (int rep = 0; rep < 25; ++rep) {
    const int d = 1 + static_cast<int>(rng.uniform01() * 3.0);
    Mlp net = test::random_net({1 + d, 12, 10, 1}, rng);
    const Eigen::VectorXd x = test::random_point(d, rng);
    const double t = rng.uniform01();
    const Eigen::VectorXd g = spatial_grad(net, t, x);
    for (int i = 0; i < d; ++i) {
      auto slice = [&](double xi) {
        Eigen::VectorXd xp = x;
        xp[i] = xi;
        return mlp_forward(net, t, xp)[0];
      };
      CHECK(test::rel_err(g[i], test::central_diff(slice, x[i], 1e-5)) < 1e-5);
    }
  }
}

TEST_CASE("divergence of v(x) = x is d") {
  auto field = [](auto t, const auto& x) {
    (void)t;
    return std::vector<std::decay_t<decltype(x[0])>>(x.begin(), x.end());
  };
  const Eigen::VectorXd x = Eigen::Vector4d(0.1, -2.0, 3.0, 0.5);
  CHECK(divergence_fn(field, 0.3, x) == doctest::Approx(4.0).epsilon(1e-14));
}

TEST_CASE("divergence of v(x) = Ax is trace(A)") {
  Rng rng(33);
  Eigen::Matrix3d a;
  for (int i = 0; i < 9; ++i) a.data()[i] = rng.uniform(-2.0, 2.0);
  auto field = [&](auto t, const auto& x) {
    (void)t;
    using T = std::decay_t<decltype(x[0])>;
    std::vector<T> out(3, T(0.0));
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) out[i] = out[i] + a(i, j) * x[j];
    }
    return out;
  };
  const Eigen::Vector3d x(0.4, 1.1, -0.6);
  CHECK(divergence_fn(field, 0.0, x) ==
        doctest::Approx(a.trace()).epsilon(1e-13));
}

TEST_CASE("divergence of a constant field is zero") {
  Mlp net({4, 6, 3});
  net.params.setZero();
  net.bias(1) << 1.0, -2.0, 0.5;
  CHECK(divergence(net, 0.1, Eigen::Vector3d(1, 2, 3)) == 0.0);
}

TEST_CASE("divergence equals the sum of component gradients, exactly") {
  Rng rng(44);
  Mlp net = test::random_net({4, 8, 3}, rng);
  const Eigen::Vector3d x(0.2, -1.0, 0.9);
  const double t = 0.37;
  const double div = divergence(net, t, x);
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    auto comp = [&](auto tt, const auto& xx) {
      using T = std::decay_t<decltype(xx[0])>;
      std::vector<T> in;
      in.reserve(xx.size() + 1);
      in.push_back(tt);
      in.insert(in.end(), xx.begin(), xx.end());
      auto out = mlp_forward_generic<T, double>(
          net, {net.params.data(), static_cast<std::size_t>(net.params.size())},
          in);
      return out[static_cast<std::size_t>(i)];
    };
    sum += spatial_grad_fn(comp, t, x)[i];
  }
  CHECK(div == sum);
}

TEST_CASE("laplacian of |x|^2/2 is d") {
  auto f = [](auto t, const auto& x) {
    auto acc = t * 0.0;
    for (const auto& xi : x) acc = acc + xi * xi * 0.5;
    return acc;
  };
  CHECK(laplacian_fn(f, 0.9, Eigen::Vector3d(3.0, -1.0, 0.0)) ==
        doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("laplacian of an affine net is zero") {
  Rng rng(5);
  Mlp net({3, 1});  // single linear layer
  net.init_params(rng);
  CHECK(std::abs(laplacian(net, 0.5, Eigen::Vector2d(0.3, 0.4))) < 1e-15);
}

TEST_CASE("laplacian matches second central differences on random nets") {
  Rng rng(60);
  for (int rep = 0; rep < 20; ++rep) {
    const int d = 1 + static_cast<int>(rng.uniform01() * 3.0);
    Mlp net = test::random_net({1 + d, 10, 10, 1}, rng);
    const Eigen::VectorXd x = test::random_point(d, rng);
    const double t = rng.uniform01();
    const double lap = laplacian(net, t, x);
    double fd = 0.0;
    for (int i = 0; i < d; ++i) {
      auto slice = [&](double xi) {
        Eigen::VectorXd xp = x;
        xp[i] = xi;
        return mlp_forward(net, t, xp)[0];
      };
      fd += test::second_diff(slice, x[i], 1e-3);
    }
    CHECK(test::rel_err(lap, fd) < 1e-4);
  }
}

TEST_CASE("laplacian equals divergence of the gradient (nested sweeps)") {
  Rng rng(71);
  for (int rep = 0; rep < 10; ++rep) {
    Mlp net = test::random_net({3, 9, 1}, rng);
    const Eigen::Vector2d x(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double t = rng.uniform01();
    // gradient field computed with duals over the ambient scalar type
    auto grad_field = [&](auto tt, const auto& xx) {
      using T = std::decay_t<decltype(xx[0])>;
      std::vector<T> out;
      for (std::size_t j = 0; j < xx.size(); ++j) {
        std::vector<Dual<T>> in;
        in.push_back(Dual<T>(tt));
        for (std::size_t i = 0; i < xx.size(); ++i) {
          in.push_back(Dual<T>(xx[i], T(i == j ? 1.0 : 0.0)));
        }
        auto fwd = mlp_forward_generic<Dual<T>, double>(
            net,
            {net.params.data(), static_cast<std::size_t>(net.params.size())},
            in);
        out.push_back(fwd[0].d);
      }
      return out;
    };
    const double lap = laplacian(net, t, x);
    const double div_grad = divergence_fn(grad_field, t, x);
    CHECK(std::abs(lap - div_grad) < 1e-10);
  }
}

TEST_CASE("time partial: time-independent function gives zero") {
  auto f = [](auto t, const auto& x) { return x[0] * x[0] + t * 0.0; };
  CHECK(time_partial_fn(f, 0.4, Eigen::VectorXd::Constant(1, 2.0)) == 0.0);
}

TEST_CASE("time partial of t*x is x") {
  auto f = [](auto t, const auto& x) { return t * x[0]; };
  CHECK(time_partial_fn(f, 0.8, Eigen::VectorXd::Constant(1, -2.5)) == -2.5);
}

TEST_CASE("time partial matches central differences on random nets") {
  Rng rng(83);
  for (int rep = 0; rep < 20; ++rep) {
    Mlp net = test::random_net({3, 14, 1}, rng);
    const Eigen::Vector2d x(rng.uniform(-2, 2), rng.uniform(-2, 2));
    const double t = rng.uniform(0.1, 0.9);
    auto slice = [&](double tt) { return mlp_forward(net, tt, x)[0]; };
    CHECK(test::rel_err(time_partial(net, t, x),
                        test::central_diff(slice, t, 1e-5)) < 1e-5);
  }
}

TEST_CASE("param_grad of |p|^2/2 is p") {
  Rng rng(91);
  Eigen::VectorXd p = test::random_point(17, rng);
  auto loss = [](std::span<const ad::Var> params) {
    ad::Var acc(0.0);
    for (const ad::Var& v : params) acc = acc + v * v * 0.5;
    return acc;
  };
  const Eigen::VectorXd g = param_grad(loss, p);
  for (int i = 0; i < p.size(); ++i) {
    CHECK(g[i] == doctest::Approx(p[i]).epsilon(1e-12));
  }
}

namespace {

// residual-style loss: (dt f + <grad f, x> - lap f)^2 at a fixed point,
// with every derivative taken by dual sweeps over tape variables
ad::Var residual_loss_tv(const Mlp& net, std::span<const ad::Var> params,
                         double t, const Eigen::VectorXd& x) {
  using D2 = Dual2<ad::Var>;
  using D1 = Dual<ad::Var>;
  const auto d = x.size();

  ad::Var lap(0.0);
  ad::Var dot(0.0);
  for (Eigen::Index j = 0; j < d; ++j) {
    std::vector<D2> in;
    in.push_back(D2(t));
    for (Eigen::Index i = 0; i < d; ++i) {
      in.push_back(D2(ad::Var(x[i]), ad::Var(i == j ? 1.0 : 0.0), ad::Var(0.0)));
    }
    auto out = mlp_forward_generic<D2, ad::Var>(net, params, in);
    lap = lap + out[0].d2;
    dot = dot + out[0].d1 * x[j];
  }
  std::vector<D1> in;
  in.push_back(D1(ad::Var(t), ad::Var(1.0)));
  for (Eigen::Index i = 0; i < d; ++i) in.push_back(D1(ad::Var(x[i])));
  auto out_t = mlp_forward_generic<D1, ad::Var>(net, params, in);
  const ad::Var r = out_t[0].d + dot - lap;
  return r * r;
}

}  // namespace

TEST_CASE("param_grad of a residual loss matches finite differences") {
  Rng rng(101);
  Mlp net = test::random_net({3, 8, 6, 1}, rng);
  const Eigen::Vector2d x(0.6, -0.9);
  const double t = 0.35;

  auto loss = [&](std::span<const ad::Var> params) {
    return residual_loss_tv(net, params, t, x);
  };
  const Eigen::VectorXd g = param_grad(loss, net.params);

  auto loss_value = [&](const Eigen::VectorXd& p) {
    ad::TapeScope scope;
    std::vector<ad::Var> vars(static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      vars[static_cast<std::size_t>(i)] = ad::Var(p[i]);
    }
    return residual_loss_tv(net, vars, t, x).v;
  };

  for (int k = 0; k < 20; ++k) {
    const auto i = static_cast<Eigen::Index>(
        rng.uniform01() * static_cast<double>(net.params.size()));
    auto slice = [&](double v) {
      Eigen::VectorXd p = net.params;
      p[i] = v;
      return loss_value(p);
    };
    CHECK(test::rel_err(g[i], test::central_diff(slice, net.params[i], 1e-6)) <
          1e-4);
  }
}

TEST_CASE("identical twin subnetworks receive identical gradients") {
  Rng rng(111);
  Mlp half = test::random_net({2, 6, 1}, rng);
  const auto k = half.param_count();
  Eigen::VectorXd both(2 * k);
  both.head(k) = half.params;
  both.tail(k) = half.params;

  auto loss = [&](std::span<const ad::Var> params) {
    auto eval_half = [&](std::span<const ad::Var> p) {
      std::vector<ad::Var> in{ad::Var(0.3), ad::Var(-1.2)};
      auto out = mlp_forward_generic<ad::Var, ad::Var>(half, p, in);
      return out[0];
    };
    const ad::Var a = eval_half(params.subspan(0, static_cast<std::size_t>(k)));
    const ad::Var b = eval_half(params.subspan(static_cast<std::size_t>(k)));
    const ad::Var s = a + b;
    return s * s + sigmoid(s);
  };
  const Eigen::VectorXd g = param_grad(loss, both);
  for (Eigen::Index i = 0; i < k; ++i) {
    CHECK(g[i] == doctest::Approx(g[k + i]).epsilon(1e-13));
  }
}

TEST_CASE("param_grad rejects non-finite losses") {
  auto loss = [](std::span<const ad::Var> params) {
    return log(params[0] * 0.0);  // log(0) = -inf
  };
  CHECK_THROWS(param_grad(loss, Eigen::VectorXd::Constant(1, 2.0)));
}

TEST_SUITE_END();
