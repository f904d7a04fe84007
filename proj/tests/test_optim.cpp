#include <catch_amalgamated.hpp>

#include <stsfa/optim.hpp>

using namespace stsfa;
using Catch::Matchers::WithinAbs;

TEST_CASE("minimize a quadratic bowl") {
    auto f = [](const Eigen::VectorXd& x) {
        return (x[0] - 3.0) * (x[0] - 3.0) + 2.0 * (x[1] + 1.0) * (x[1] + 1.0);
    };
    MinimizeResult r = minimize(f, Eigen::Vector2d(10.0, 10.0), Box::unbounded(2));
    CHECK(r.reason != StopReason::max_iter);
    CHECK_THAT(r.x[0], WithinAbs(3.0, 1e-5));
    CHECK_THAT(r.x[1], WithinAbs(-1.0, 1e-5));
}

TEST_CASE("minimize rosenbrock") {
    auto f = [](const Eigen::VectorXd& x) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        return a * a + 100.0 * b * b;
    };
    MinimizeResult r = minimize(f, Eigen::Vector2d(-1.2, 1.0), Box::unbounded(2));
    CHECK_THAT(r.x[0], WithinAbs(1.0, 1e-4));
    CHECK_THAT(r.x[1], WithinAbs(1.0, 1e-4));
}

TEST_CASE("box constraints hold and flag as active") {
    auto f = [](const Eigen::VectorXd& x) { return x[0] * x[0] + x[1] * x[1]; };
    Box box = Box::unbounded(2);
    box.lower[0] = 2.0; // optimum pinned at the lower bound
    MinimizeResult r = minimize(f, Eigen::Vector2d(5.0, 4.0), box);
    CHECK_THAT(r.x[0], WithinAbs(2.0, 1e-9));
    CHECK_THAT(r.x[1], WithinAbs(0.0, 1e-5));
    CHECK(r.active_lower[0]);
    CHECK_FALSE(r.active_lower[1]);
    CHECK(r.reason != StopReason::max_iter);
}

TEST_CASE("never returns worse than the start") {
    // pathological objective: flat plateau with a cliff the line search may probe
    auto f = [](const Eigen::VectorXd& x) {
        return x[0] < -5.0 ? std::numeric_limits<double>::infinity() : std::abs(x[0]);
    };
    Eigen::VectorXd x0(1);
    x0 << 1.0;
    MinimizeResult r = minimize(f, x0, Box::unbounded(1));
    CHECK(r.f <= 1.0);
}

TEST_CASE("iteration cap reports max_iter") {
    auto f = [](const Eigen::VectorXd& x) { return -x[0]; }; // unbounded below
    Eigen::VectorXd x0(1);
    x0 << 0.0;
    MinimizeOptions opts;
    opts.max_iter = 20;
    opts.simplex_budget = 5;
    MinimizeResult r = minimize(f, x0, Box::unbounded(1), opts);
    CHECK(r.reason == StopReason::max_iter);
    CHECK(r.iterations <= 20 + 1);
}

TEST_CASE("numeric gradient on a cubic") {
    auto f = [](const Eigen::VectorXd& x) { return x[0] * x[0] * x[0] + 2.0 * x[0] * x[1]; };
    Eigen::VectorXd x(2);
    x << 1.5, -2.0;
    Eigen::VectorXd g = numeric_gradient(f, x, 1e-6);
    CHECK_THAT(g[0], WithinAbs(3.0 * 1.5 * 1.5 + 2.0 * -2.0, 1e-6));
    CHECK_THAT(g[1], WithinAbs(3.0, 1e-7));
}

TEST_CASE("deterministic across repeated runs") {
    auto f = [](const Eigen::VectorXd& x) {
        return std::sin(x[0]) + x[0] * x[0] * 0.1 + (x[1] - 0.5) * (x[1] - 0.5);
    };
    MinimizeResult a = minimize(f, Eigen::Vector2d(2.0, 2.0), Box::unbounded(2));
    MinimizeResult b = minimize(f, Eigen::Vector2d(2.0, 2.0), Box::unbounded(2));
    CHECK(a.x == b.x);
    CHECK(a.f == b.f);
    CHECK(a.iterations == b.iterations);
}
