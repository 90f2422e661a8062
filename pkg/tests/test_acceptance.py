"""Acceptance gate: every criterion at its stated tolerance.

Each test prints a `[criterion N] ...` line; the conftest summary hook
repeats one PASS/FAIL line per criterion at the end of the run.  The two
desk-scale reproductions (criteria 7 and 8) run once per worker count
through session fixtures so the determinism criterion (9) can compare
bit-identical CSVs without recomputing.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate, stats

import evtcvar as ec
from evtcvar.experiments import ExperimentConfig
from evtcvar.gpd_mle import gpd_loglik
from evtcvar.numerics import norm_cdf, norm_ppf

MASTER_SEED = 0
WORKER_COUNTS = (2, 3)


# ---------------------------------------------------------------------------
# criterion 1: analytic CVaR formulas vs numerical tail integration
# ---------------------------------------------------------------------------

PARAM_GRID = [
    ec.GeneralizedPareto(-0.5, 1.0),
    ec.GeneralizedPareto(-0.2, 2.0),
    ec.GeneralizedPareto(0.0, 1.0),
    ec.GeneralizedPareto(0.0, 3.0),
    ec.GeneralizedPareto(0.4, 1.0),
    ec.GeneralizedPareto(0.8, 1.0),
    ec.GeneralizedPareto(0.8, 2.5),
    ec.Weibull(0.75, 1.0),
    ec.Weibull(1.0, 1.0),
    ec.Weibull(1.25, 2.0),
    ec.Weibull(1.75, 1.0),
    ec.Lognormal(0.0, 0.5),
    ec.Lognormal(0.0, 0.9),
    ec.Lognormal(1.0, 0.7),
]


def _scipy_frozen(dist):
    if isinstance(dist, ec.GeneralizedPareto):
        return stats.genpareto(c=dist.xi, scale=dist.sigma)
    if isinstance(dist, ec.Weibull):
        return stats.weibull_min(c=dist.kappa, scale=dist.lam)
    return stats.lognorm(s=dist.sigma, scale=math.exp(dist.mu))


def _integration_cvar(dist, alpha):
    frozen = _scipy_frozen(dist)

    def integrand(v):
        sf = math.exp(-v)
        if sf == 0.0:
            return 0.0
        return frozen.isf(sf) * sf

    val, _ = integrate.quad(integrand, -math.log1p(-alpha), np.inf, limit=300)
    return val / (1.0 - alpha)


def test_c01_analytic_oracle_equivalence():
    start = time.perf_counter()
    worst = 0.0
    for dist in PARAM_GRID:
        for alpha in (0.95, 0.99, 0.999):
            exact = ec.cvar_exact(dist, alpha)
            oracle = _integration_cvar(dist, alpha)
            rel = abs(exact - oracle) / abs(oracle)
            worst = max(worst, rel)
            assert rel <= 1e-6, f"{dist} alpha={alpha}: rel error {rel}"
    # the printed sqrt(2) variant of the lognormal formula must fail the
    # same oracle
    wrong = (
        math.exp(0.125) / 0.001 * norm_cdf(0.5 - norm_ppf(0.999) / math.sqrt(2))
    )
    oracle_ln = _integration_cvar(ec.Lognormal(0.0, 0.5), 0.999)
    assert abs(wrong - oracle_ln) / oracle_ln > 1.0
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print(
        f"\n[criterion 1] {3 * len(PARAM_GRID)} cases, worst rel err "
        f"{worst:.2e}, {elapsed:.1f}s"
    )


# ---------------------------------------------------------------------------
# criterion 2: exact-input identity of the tail quantile / tail mean maps
# ---------------------------------------------------------------------------

def test_c02_exact_input_identity():
    worst = 0.0
    for xi in (0.0, 0.4, 0.8):
        for level in (0.7, 0.9):
            sigma, alpha = 1.0, 0.999
            u = ec.gpd_quantile(xi, sigma, level)
            exi, esig = ec.gpd_excess_params(xi, sigma, u)
            f_u = ec.gpd_cdf(xi, sigma, u)
            q_hat = ec.evt_quantile(u, exi, esig, f_u, alpha)
            q_true = ec.gpd_quantile(xi, sigma, alpha)
            value = ec.evt_cvar_from_fit(q_hat, u, exi, esig, alpha)
            truth = ec.cvar_exact(ec.GeneralizedPareto(xi, sigma), alpha)
            dq = abs(q_hat - q_true) / q_true
            dc = abs(value - truth) / truth
            worst = max(worst, dq, dc)
            assert dq <= 1e-10 and dc <= 1e-10, f"xi={xi} level={level}"
    print(f"\n[criterion 2] worst rel deviation {worst:.2e}")


# ---------------------------------------------------------------------------
# criterion 3: MLE recovery on seeded samples
# ---------------------------------------------------------------------------

def test_c03_mle_recovery():
    z_heavy = ec.sample_iid(
        ec.GeneralizedPareto(0.4, 1.0), 5000, ec.RngStream(42, 0)
    )
    start = time.perf_counter()
    fit = ec.fit_gpd(z_heavy)
    heavy_time = time.perf_counter() - start
    assert 0.35 <= fit.xi_hat <= 0.45
    assert 0.95 <= fit.sigma_hat <= 1.05
    assert heavy_time < 1.0

    z_exp = ec.sample_iid(ec.GeneralizedPareto(0.0, 1.0), 5000, ec.RngStream(42, 1))
    start = time.perf_counter()
    fit_exp = ec.fit_gpd(z_exp)
    exp_time = time.perf_counter() - start
    assert abs(fit_exp.xi_hat) <= 0.05
    assert exp_time < 1.0
    print(
        f"\n[criterion 3] xi_hat={fit.xi_hat:.4f} sigma_hat={fit.sigma_hat:.4f} "
        f"({heavy_time * 1e3:.0f} ms); exponential xi_hat={fit_exp.xi_hat:+.4f}"
    )


# ---------------------------------------------------------------------------
# criterion 4: analytic derivatives vs central finite differences
# ---------------------------------------------------------------------------

def _fd_derivs(xi, sigma, z):
    """Richardson-extrapolated central differences of the log-density."""

    def f(x, s):
        return gpd_loglik(x, s, [z])

    def central(g, x, h):
        return (g(x + h) - g(x - h)) / (2 * h)

    def second(g, x, h):
        return (g(x + h) - 2 * g(x) + g(x - h)) / h**2

    def rich(g, h):
        return (4 * g(h / 2) - g(h)) / 3.0

    edge = abs(sigma + xi * z) / max(z, 1e-9)
    hx = 1e-3 * min(1.0, edge)
    hs = 1e-3 * sigma
    d_x = rich(lambda h: central(lambda x: f(x, sigma), xi, h), hx)
    d_s = rich(lambda h: central(lambda s: f(xi, s), sigma, h), hs)
    d_xx = rich(lambda h: second(lambda x: f(x, sigma), xi, h), 3 * hx)
    d_ss = rich(lambda h: second(lambda s: f(xi, s), sigma, h), 3 * hs)

    def mixed(h):
        return (
            f(xi + h, sigma + h)
            - f(xi + h, sigma - h)
            - f(xi - h, sigma + h)
            + f(xi - h, sigma - h)
        ) / (4 * h * h)

    d_sx = rich(mixed, 3 * min(hx, hs))
    return d_s, d_x, d_ss, d_sx, d_xx


def test_c04_second_derivative_correctness():
    rng = np.random.default_rng(MASTER_SEED)
    worst = 0.0
    for _ in range(20):
        xi = float(rng.uniform(-0.4, 0.9))
        if abs(xi) < 0.02:
            xi += 0.05
        sigma = float(rng.uniform(0.5, 2.0))
        zmax = (-sigma / xi * 0.85) if xi < 0 else 3.0 * sigma
        z = float(rng.uniform(0.1, zmax))
        ours = ec.gpd_loglik_derivs(xi, sigma, z)
        ref = _fd_derivs(xi, sigma, z)
        for a, b in zip(ours, ref):
            rel = abs(a - b) / max(1e-9, abs(b))
            worst = max(worst, rel)
            assert rel <= 1e-6, f"(xi={xi}, sigma={sigma}, z={z}): {ours} vs {ref}"
    print(f"\n[criterion 4] worst rel error vs finite differences {worst:.2e}")


# ---------------------------------------------------------------------------
# criterion 5: AD statistic and ForwardStop vs brute-force oracles
# ---------------------------------------------------------------------------

def _ad_oracle(z_sorted, xi, sigma):
    n = len(z_sorted)
    u = stats.genpareto.cdf(np.asarray(z_sorted), c=xi, scale=sigma)
    u = np.clip(u, 1e-12, 1 - 1e-12)
    total = 0.0
    for j in range(1, n + 1):
        total += (2 * j - 1) * (math.log(u[j - 1]) + math.log(1.0 - u[n - j]))
    return -n - total / n


def _forward_stop_oracle(p, gamma):
    best = None
    for k in range(1, len(p) + 1):
        clipped = np.clip(p[:k], 1e-3, 0.999)
        if -np.mean(np.log1p(-clipped)) <= gamma:
            best = k
    return best


def test_c05_brute_force_equivalence():
    rng = np.random.default_rng(MASTER_SEED)
    n_fixtures = 10_000
    worst = 0.0
    for _ in range(n_fixtures):
        n = int(rng.integers(1, 40))
        xi = float(rng.uniform(-0.5, 0.9))
        sigma = float(rng.uniform(0.5, 2.0))
        u = np.sort(rng.uniform(0.005, 0.995, size=n))
        z = np.asarray(ec.gpd_quantile(xi, sigma, u))
        fit = ec.GpdFit(xi, sigma, n, 0.0, True)
        diff = abs(ec.ad_statistic(z, fit) - _ad_oracle(z, xi, sigma))
        worst = max(worst, diff)
        assert diff <= 1e-12
    for _ in range(n_fixtures):
        length = int(rng.integers(1, 30))
        p = rng.uniform(0.0, 1.0, size=length)
        gamma = float(rng.uniform(0.02, 0.5))
        assert ec.forward_stop(p, gamma) == _forward_stop_oracle(p, gamma)
    print(f"\n[criterion 5] {2 * n_fixtures} fixtures, worst AD deviation {worst:.1e}")


# ---------------------------------------------------------------------------
# criterion 6: bootstrap coverage on the unit exponential
# ---------------------------------------------------------------------------

def test_c06_bootstrap_coverage():
    start = time.perf_counter()
    dist = ec.GeneralizedPareto(0.0, 1.0)  # unit exponential
    truth = ec.cvar_exact(dist, 0.95)
    hits = 0
    reps = 200
    for rep in range(reps):
        y = ec.sample_iid(dist, 5000, ec.RngStream(600, rep))
        ci = ec.bootstrap_cvar_ci(
            ec.Sample(y), 0.95, level=0.9, m=1000, rng=ec.RngStream(601, rep)
        )
        hits += ci.contains(truth)
    coverage = hits / reps
    elapsed = time.perf_counter() - start
    assert 0.80 <= coverage <= 0.97
    assert elapsed < 120.0
    print(f"\n[criterion 6] coverage {coverage:.3f} over {reps} reps, {elapsed:.0f}s")


# ---------------------------------------------------------------------------
# criteria 7 + 9: single-arm desk-scale reproduction and its determinism
# ---------------------------------------------------------------------------

def _single_arm_config(workers):
    return ExperimentConfig(
        kind="single_arm",
        distributions=(ec.GeneralizedPareto(0.8, 1.0),),
        alpha=0.999,
        runs=100,
        horizon=5000,
        stride=10,
        record_start=100,
        seed=MASTER_SEED,
        workers=workers,
    )


@pytest.fixture(scope="session")
def single_arm_runs(tmp_path_factory):
    out = {}
    base = tmp_path_factory.mktemp("single_arm")
    for workers in WORKER_COUNTS:
        start = time.perf_counter()
        rows = ec.run_single_arm(_single_arm_config(workers))
        elapsed = time.perf_counter() - start
        path = base / f"metrics_w{workers}.csv"
        ec.write_metrics_csv(rows, str(path))
        out[workers] = {"rows": rows, "bytes": path.read_bytes(), "elapsed": elapsed}
    return out


def test_c07_single_arm_reproduction(single_arm_runs):
    run = single_arm_runs[WORKER_COUNTS[0]]
    rows, elapsed = run["rows"], run["elapsed"]
    final = rows[-1]
    assert final.t == 5000
    assert final.rmse_evt < final.rmse_sa
    assert final.fraction_closer > 0.55
    assert elapsed < 900.0
    print(
        f"\n[criterion 7] t=5000: rmse_sa={final.rmse_sa:.1f} "
        f"rmse_evt={final.rmse_evt:.1f} fraction_closer={final.fraction_closer:.2f} "
        f"({elapsed:.0f}s at {WORKER_COUNTS[0]} workers)"
    )


# ---------------------------------------------------------------------------
# criteria 8 + 9: bandit desk-scale reproduction and its determinism
# ---------------------------------------------------------------------------

def _bandit_config(workers):
    return ExperimentConfig(
        kind="bandit",
        distributions=tuple(
            ec.GeneralizedPareto(x, 1.0) for x in (0.4, 0.5, 0.6, 0.7, 0.8)
        ),
        alpha=0.999,
        runs=100,
        horizon=5000,
        schedule=ec.Schedule(((1000, 1.0), (5000, 0.1))),
        seed=MASTER_SEED,
        workers=workers,
    )


@pytest.fixture(scope="session")
def bandit_runs(tmp_path_factory):
    out = {}
    base = tmp_path_factory.mktemp("bandit")
    for workers in WORKER_COUNTS:
        start = time.perf_counter()
        rows = ec.run_bandit_testbed(_bandit_config(workers))
        elapsed = time.perf_counter() - start
        path = base / f"metrics_w{workers}.csv"
        ec.write_metrics_csv(rows, str(path))
        out[workers] = {"rows": rows, "bytes": path.read_bytes(), "elapsed": elapsed}
    return out


def test_c08_bandit_reproduction(bandit_runs):
    run = bandit_runs[WORKER_COUNTS[0]]
    rows, elapsed = run["rows"], run["elapsed"]
    evt = np.array([r.pct_best_evt for r in rows])
    sa = np.array([r.pct_best_sa for r in rows])
    early = evt[1000:1500].mean()  # stages 1001..1500
    late = evt[4499:5000].mean()  # stages 4500..5000
    late_sa = sa[4499:5000].mean()
    assert late > early
    assert late > 0.2
    assert late >= late_sa - 0.05
    assert elapsed < 1200.0
    print(
        f"\n[criterion 8] pct_best_evt: early={early:.3f} late={late:.3f}; "
        f"pct_best_sa late={late_sa:.3f} ({elapsed:.0f}s at {WORKER_COUNTS[0]} workers)"
    )


def test_c09_determinism_across_worker_counts(single_arm_runs, bandit_runs):
    a, b = (single_arm_runs[w]["bytes"] for w in WORKER_COUNTS)
    assert a == b, "single-arm CSVs differ across worker counts"
    c, d = (bandit_runs[w]["bytes"] for w in WORKER_COUNTS)
    assert c == d, "bandit CSVs differ across worker counts"
    print(
        f"\n[criterion 9] bit-identical CSVs at {WORKER_COUNTS[0]} vs "
        f"{WORKER_COUNTS[1]} workers ({len(a)} and {len(c)} bytes)"
    )


# ---------------------------------------------------------------------------
# criterion 10: the property suites, condensed
# ---------------------------------------------------------------------------

def test_c10_property_suites():
    rng = np.random.default_rng(MASTER_SEED)

    # quantile/CDF round-trips across the shape range
    for xi in (-0.9, -0.5, 0.0, 0.4, 0.8, 0.95):
        p = rng.uniform(0.0, 0.999999, size=500)
        q = ec.gpd_quantile(xi, 1.3, p)
        assert np.max(np.abs(ec.gpd_cdf(xi, 1.3, q) - p)) <= 1e-12

    # excess-stability: exceedances of a GPD sample follow the shifted GPD
    xi, sigma = 0.4, 1.0
    u = ec.gpd_quantile(xi, sigma, 0.7)
    y = ec.sample_iid(ec.GeneralizedPareto(xi, sigma), 1_000_000, ec.RngStream(10, 0))
    exc = np.sort(y[y > u] - u)
    exi, esig = ec.gpd_excess_params(xi, sigma, u)
    emp = np.arange(1, exc.size + 1) / exc.size
    ks = np.max(np.abs(ec.gpd_cdf(exi, esig, exc) - emp))
    assert ks < 0.02

    # policy probabilities: simplex + argmin shift-invariance
    for _ in range(300):
        k = int(rng.integers(1, 10))
        values = rng.integers(-100, 100, size=k).astype(float)
        eps = float(rng.uniform(0.0, 1.0))
        probs = ec.policy_probabilities(values, eps)
        assert abs(probs.sum() - 1.0) < 1e-12 and np.all(probs >= 0)
        shifted = ec.policy_probabilities(values + 7.0, eps)
        np.testing.assert_array_equal(probs, shifted)

    # SA estimator: permutation invariance and CVaR >= VaR dominance
    for _ in range(200):
        n = int(rng.integers(1, 80))
        values = rng.normal(size=n) * 10.0
        alpha = float(rng.uniform(0.05, 0.95))
        s1 = ec.Sample(values)
        perm = values.copy()
        rng.shuffle(perm)
        s2 = ec.Sample(perm)
        est1 = ec.sample_cvar(s1, alpha)
        est2 = ec.sample_cvar(s2, alpha)
        assert est1.value == est2.value
        assert est1.value >= ec.naive_quantile(s1, alpha)

    print("\n[criterion 10] round-trip, excess-stability, policy, SA properties ok")
