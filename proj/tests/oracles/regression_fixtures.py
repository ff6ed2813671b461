"""Regenerates tests/support/regression_fixtures.hpp.

Expected values come from statsmodels (OLS and unpenalized Logit), which is
independent of the C++ fitting code under test.
"""
import numpy as np
import statsmodels.api as sm

rng = np.random.default_rng(20240917)


def ols_case(name, n, coefs, noise):
    x = np.round(rng.normal(size=(n, len(coefs))) * 2.0, 3)
    y = np.round(0.7 + x @ np.array(coefs) + rng.normal(scale=noise, size=n), 3)
    return name, x, y


def logit_case(name, n, coefs):
    x = np.round(rng.normal(size=(n, len(coefs))), 3)
    p = 1 / (1 + np.exp(-(0.3 + x @ np.array(coefs))))
    y = (rng.uniform(size=n) < p).astype(float)
    return name, x, y


ols = [
    ols_case("ols_10x2", 10, [1.5, -0.8], 1.0),
    ols_case("ols_12x3", 12, [0.5, 2.0, 0.0], 0.7),
    ols_case("ols_8x1", 8, [3.0], 2.0),
    ols_case("ols_15x4", 15, [-1.0, 0.3, 1.2, 0.05], 0.5),
    ols_case("ols_20x2", 20, [0.2, 0.25], 1.5),
]
logit = [
    logit_case("logit_12x1", 12, [1.0]),
    logit_case("logit_40x2", 40, [1.2, -0.7]),
]


def arr(v):
    return "{" + ", ".join(repr(float(a)) for a in np.ravel(v)) + "}"


out = []
out.append("// Generated by tests/oracles/regression_fixtures.py; do not edit.")
out.append("#pragma once\n\n#include <string>\n#include <vector>\n")
out.append("namespace shapsel::testing {\n")
out.append("struct RegressionFixture {\n  std::string name;\n  int n;\n  int p;\n"
           "  std::vector<double> x;  // row-major n x p\n  std::vector<double> y;\n"
           "  std::vector<double> coefficients;\n  double intercept;\n"
           "  std::vector<double> std_errors;\n  std::vector<double> t_values;\n"
           "  std::vector<double> p_values;\n};\n")


def emit(cases, fit, var):
    out.append(f"inline const std::vector<RegressionFixture> {var} = {{")
    for name, x, y in cases:
        res = fit(y, sm.add_constant(x))
        params, bse, tv, pv = res.params, res.bse, res.tvalues, res.pvalues
        out.append(f'    {{"{name}", {x.shape[0]}, {x.shape[1]},\n     {arr(x)},\n     {arr(y)},\n'
                   f'     {arr(params[1:])}, {float(params[0])!r},\n     {arr(bse[1:])},\n'
                   f'     {arr(tv[1:])},\n     {arr(pv[1:])}}},')
    out.append("};\n")


emit(ols, lambda y, X: sm.OLS(y, X).fit(), "kOlsFixtures")
emit(logit, lambda y, X: sm.Logit(y, X).fit(disp=0, tol=1e-14, maxiter=200, method="newton"),
     "kLogisticFixtures")
out.append("}  // namespace shapsel::testing")
open(__file__.replace("oracles/regression_fixtures.py", "support/regression_fixtures.hpp"), "w").write(
    "\n".join(out) + "\n")
