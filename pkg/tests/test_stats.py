import math

import numpy as np
import pytest
import scipy.stats

from dsikit.errors import ConstantSeriesError, DomainError, RankError
from dsikit.stats import (
    assign_bins,
    build_design,
    chisq_cdf,
    effect_percent,
    f_cdf,
    grouped_correlation,
    jarque_bera,
    levene,
    log10p1,
    normal_quantile,
    ols_fit,
    pearson,
    qq_points,
    rank_average_ties,
    spearman,
    standardize,
    student_t_cdf,
)

# Frozen 50-digit reference values (mpmath; regularized incomplete beta /
# gamma evaluated independently of scipy).
PEARSON_X = [1.2, 3.4, 2.2, 5.1, 4.8, 0.7, 2.9, 3.3, 4.1, 1.8,
             2.5, 3.9, 0.9, 4.4, 3.0, 1.5, 2.0, 4.9, 3.6, 2.7]
PEARSON_Y = [2.1, 5.9, 3.8, 9.0, 8.1, 1.0, 5.2, 5.5, 7.4, 3.1,
             4.0, 7.1, 1.9, 7.7, 5.6, 2.4, 3.2, 8.8, 6.0, 4.3]
PEARSON_R = 0.99490806867715080831
PEARSON_P = 2.1454495811181588666e-19
T_CDF_1_10 = 0.82955343384897006366
F_CDF_15_3_12 = 0.73540516367825102144
NORMAL_Q_975 = 1.9599639845400542355


class TestTransforms:
    @pytest.mark.parametrize("x,expected", [(0, 0.0), (9, 1.0), (99, 2.0)])
    def test_log10p1_values(self, x, expected):
        assert log10p1(x) == pytest.approx(expected, abs=1e-15)

    def test_log10p1_negative_rejected(self):
        with pytest.raises(DomainError):
            log10p1(-0.5)

    def test_standardize_simple(self):
        np.testing.assert_allclose(standardize([1, 2, 3]), [-1, 0, 1], atol=1e-15)

    def test_standardize_constant_rejected(self):
        with pytest.raises(ConstantSeriesError):
            standardize([4, 4, 4])

    def test_standardize_postcondition(self):
        rng = np.random.default_rng(0)
        z = standardize(rng.normal(3, 7, size=1000))
        assert abs(z.mean()) < 1e-12
        assert abs(z.std(ddof=1) - 1.0) < 1e-12

    @pytest.mark.parametrize("beta,expected,tol", [
        (0.0259, 6.14, 0.05), (0.0, 0.0, 1e-12), (1.0, 900.0, 1e-9),
    ])
    def test_effect_percent(self, beta, expected, tol):
        assert effect_percent(beta) == pytest.approx(expected, abs=tol)


class TestDistributionFunctions:
    def test_normal_quantile_median(self):
        assert normal_quantile(0.5) == 0.0

    def test_normal_quantile_reference(self):
        assert normal_quantile(0.975) == pytest.approx(NORMAL_Q_975, abs=1e-10)

    def test_chisq_closed_form(self):
        assert chisq_cdf(2.0, 2) == pytest.approx(1 - math.exp(-1), abs=1e-12)

    def test_t_cdf_reference(self):
        assert student_t_cdf(1.0, 10) == pytest.approx(T_CDF_1_10, abs=1e-10)

    def test_f_cdf_reference(self):
        assert f_cdf(1.5, 3, 12) == pytest.approx(F_CDF_15_3_12, abs=1e-10)

    def test_grids_against_mpmath(self):
        mp = pytest.importorskip("mpmath")
        mp.mp.dps = 40
        for t in (-4.0, -1.3, -0.2, 0.0, 0.7, 2.5, 6.0):
            for dof in (1, 5, 30, 200):
                ib = mp.betainc(mp.mpf(dof) / 2, mp.mpf(1) / 2, 0,
                                dof / (dof + mp.mpf(t) ** 2), regularized=True)
                expected = float(1 - ib / 2 if t >= 0 else ib / 2)
                assert student_t_cdf(t, dof) == pytest.approx(expected, abs=1e-10)
        for x in (0.1, 1.0, 3.7, 12.0):
            for k in (1, 2, 7, 40):
                expected = float(mp.gammainc(mp.mpf(k) / 2, 0, mp.mpf(x) / 2,
                                             regularized=True))
                assert chisq_cdf(x, k) == pytest.approx(expected, abs=1e-10)
        for x in (0.2, 1.0, 2.8):
            for d1, d2 in ((1, 1), (3, 12), (10, 40)):
                expected = float(mp.betainc(mp.mpf(d1) / 2, mp.mpf(d2) / 2, 0,
                                            d1 * mp.mpf(x) / (d1 * mp.mpf(x) + d2),
                                            regularized=True))
                assert f_cdf(x, d1, d2) == pytest.approx(expected, abs=1e-10)
        for p in (0.001, 0.1, 0.5, 0.9, 0.999):
            expected = float(mp.sqrt(2) * mp.erfinv(2 * mp.mpf(repr(p)) - 1))
            assert normal_quantile(p) == pytest.approx(expected, abs=1e-10)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            normal_quantile(0.0)
        with pytest.raises(DomainError):
            student_t_cdf(1.0, 0)
        with pytest.raises(DomainError):
            chisq_cdf(1.0, -1)
        with pytest.raises(DomainError):
            f_cdf(1.0, 0, 5)


class TestPearson:
    def test_perfect_positive_affine(self):
        x = np.arange(10.0)
        r, p = pearson(x, 2 * x + 1)
        assert r == pytest.approx(1.0, abs=1e-12)
        assert p == pytest.approx(0.0, abs=1e-12)

    def test_perfect_negative(self):
        x = np.arange(10.0)
        r, _ = pearson(x, -x)
        assert r == pytest.approx(-1.0, abs=1e-12)

    def test_frozen_fixture_matches_high_precision_oracle(self):
        r, p = pearson(PEARSON_X, PEARSON_Y)
        assert r == pytest.approx(PEARSON_R, abs=1e-12)
        assert p == pytest.approx(PEARSON_P, rel=1e-6)

    def test_constant_rejected(self):
        with pytest.raises(ConstantSeriesError):
            pearson([1, 1, 1, 1], [1, 2, 3, 4])

    def test_symmetry_and_affine_invariance(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=40)
        y = rng.normal(size=40)
        r_xy, _ = pearson(x, y)
        r_yx, _ = pearson(y, x)
        assert r_xy == pytest.approx(r_yx, abs=1e-14)
        r_scaled, _ = pearson(3.5 * x - 2.0, y)
        assert r_scaled == pytest.approx(r_xy, abs=1e-12)


class TestSpearman:
    def test_monotone_transform_gives_one(self):
        x = np.array([0.3, 1.9, 2.2, 5.0, 7.7])
        rho, _ = spearman(x, np.exp(x))
        assert rho == pytest.approx(1.0, abs=1e-14)

    def test_tie_consistent_example(self):
        rho, _ = spearman([1, 2, 2, 3], [10, 20, 20, 30])
        assert rho == pytest.approx(1.0, abs=1e-14)

    def test_rank_assignment_average_ties(self):
        np.testing.assert_allclose(
            rank_average_ties([10, 20, 20, 30]), [1.0, 2.5, 2.5, 4.0])

    def test_tie_heavy_fixture_matches_explicit_rank_oracle(self):
        rng = np.random.default_rng(2)
        x = rng.integers(0, 5, size=60).astype(float)
        y = rng.integers(0, 4, size=60).astype(float)

        def brute_ranks(vals):
            out = []
            svals = sorted(vals)
            for v in vals:
                positions = [i + 1 for i, s in enumerate(svals) if s == v]
                out.append(sum(positions) / len(positions))
            return out

        expected_rho, _ = pearson(brute_ranks(list(x)), brute_ranks(list(y)))
        rho, _ = spearman(x, y)
        assert rho == pytest.approx(expected_rho, abs=1e-12)
        ref = scipy.stats.spearmanr(x, y)
        assert rho == pytest.approx(ref.statistic, abs=1e-12)

    def test_monotone_invariance_property(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=30)
        y = rng.normal(size=30)
        base, _ = spearman(x, y)
        transformed, _ = spearman(np.exp(x / 3), y)
        assert transformed == pytest.approx(base, abs=1e-14)


class TestLevene:
    def test_shifted_groups_have_zero_statistic(self):
        w, p = levene([[1.0, 2.0, 3.0, 4.0], [11.0, 12.0, 13.0, 14.0]])
        assert w == pytest.approx(0.0, abs=1e-12)
        assert p == pytest.approx(1.0, abs=1e-12)

    def test_detects_unequal_variance(self):
        rng = np.random.default_rng(4)
        a = rng.normal(0, 1, size=200)
        b = rng.normal(0, 3, size=200)
        _, p = levene([a, b])
        assert p < 0.01

    def test_equal_variance_rarely_flagged(self):
        hits = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            groups = [rng.normal(0, 1, size=150) for _ in range(3)]
            _, p = levene(groups)
            hits += p > 0.05
        assert hits >= 18

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(5)
        groups = [rng.normal(0, s, size=80) for s in (1.0, 1.5, 0.7)]
        w, p = levene(groups)
        ref_w, ref_p = scipy.stats.levene(*groups, center="mean")
        assert w == pytest.approx(ref_w, abs=1e-10)
        assert p == pytest.approx(ref_p, abs=1e-10)

    def test_median_centering_variant(self):
        rng = np.random.default_rng(6)
        groups = [rng.exponential(s, size=60) for s in (1.0, 2.0)]
        w, _ = levene(groups, center="median")
        ref_w, _ = scipy.stats.levene(*groups, center="median")
        assert w == pytest.approx(ref_w, abs=1e-10)

    def test_degenerate_groups_undefined(self):
        w, p = levene([[5.0, 5.0, 5.0], [7.0, 7.0]])
        assert math.isnan(w) and math.isnan(p)

    def test_validation(self):
        with pytest.raises(ValueError):
            levene([[1.0, 2.0]])
        with pytest.raises(ValueError):
            levene([[1.0], [2.0, 3.0]])


class TestJarqueBera:
    def test_symmetric_two_point_sample(self):
        # Skewness vanishes; kurtosis is 1, so JB reduces to n/6 * (2^2/4).
        resid = [-1.0, 1.0] * 8
        jb, _ = jarque_bera(resid)
        assert jb == pytest.approx(len(resid) / 6.0, abs=1e-12)

    def test_normal_sample_usually_passes(self):
        hits = 0
        for seed in range(100):
            rng = np.random.default_rng(seed)
            _, p = jarque_bera(rng.normal(size=10_000))
            hits += p > 0.01
        assert hits >= 95

    def test_exponential_sample_fails(self):
        rng = np.random.default_rng(7)
        jb, p = jarque_bera(rng.exponential(size=1000))
        assert jb > 100
        assert p < 0.001

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(8)
        resid = rng.standard_t(df=5, size=500)
        jb, p = jarque_bera(resid)
        ref = scipy.stats.jarque_bera(resid)
        assert jb == pytest.approx(ref.statistic, abs=1e-10)
        assert p == pytest.approx(ref.pvalue, abs=1e-10)


def _hand_sandwich_hc3(x, y):
    """Explicit HC3 sandwich via matrix inversion, independent of the QR
    fitting path."""
    xtx_inv = np.linalg.inv(x.T @ x)
    beta = xtx_inv @ x.T @ y
    resid = y - x @ beta
    h = np.diag(x @ xtx_inv @ x.T)
    meat = x.T @ np.diag((resid / (1 - h)) ** 2) @ x
    cov = xtx_inv @ meat @ xtx_inv
    return beta, np.sqrt(np.diag(cov))


class TestOlsFit:
    def test_noiseless_line_recovered_exactly(self):
        x = np.array([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])
        res = ols_fit(build_design([("x", x)]), 1.0 + 2.0 * x)
        assert res.coefficient("intercept") == pytest.approx(1.0, abs=1e-10)
        assert res.coefficient("x") == pytest.approx(2.0, abs=1e-10)
        assert res.r2 == pytest.approx(1.0, abs=1e-12)
        assert res.mse == pytest.approx(0.0, abs=1e-20)

    def test_hc3_matches_hand_sandwich_n6(self):
        x_col = np.array([0.5, 1.0, 1.5, 2.5, 3.0, 4.0])
        y = np.array([1.1, 1.9, 3.4, 4.1, 6.2, 7.8])
        design = build_design([("x", x_col)])
        res = ols_fit(design, y, cov_type="hc3")
        beta, se = _hand_sandwich_hc3(design.data, y)
        np.testing.assert_allclose(res.coefficients, beta, atol=1e-10)
        np.testing.assert_allclose(res.se_hc3, se, atol=1e-10)

    def test_matches_statsmodels(self):
        sm = pytest.importorskip("statsmodels.api")
        rng = np.random.default_rng(9)
        x = rng.normal(size=(120, 3))
        y = 0.5 + x @ np.array([1.0, -2.0, 0.3]) + rng.normal(size=120) * (
            1 + 0.5 * np.abs(x[:, 0]))
        design = build_design([(f"x{i}", x[:, i]) for i in range(3)])
        res = ols_fit(design, y, cov_type="hc3")
        ref = sm.OLS(y, sm.add_constant(x)).fit(cov_type="HC3")
        np.testing.assert_allclose(res.coefficients, ref.params, atol=1e-10)
        np.testing.assert_allclose(res.se_hc3, ref.bse, atol=1e-10)
        np.testing.assert_allclose(res.se_classic,
                                   sm.OLS(y, sm.add_constant(x)).fit().bse,
                                   atol=1e-10)
        assert res.r2 == pytest.approx(ref.rsquared, abs=1e-12)
        assert res.f_stat == pytest.approx(
            sm.OLS(y, sm.add_constant(x)).fit().fvalue, abs=1e-8)

    def test_rank_deficiency_names_columns(self):
        x = np.arange(12.0)
        design = build_design([("a", x), ("b", 2 * x)])
        with pytest.raises(RankError) as exc_info:
            ols_fit(design, x)
        assert exc_info.value.columns

    def test_residuals_orthogonal_to_design(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(200, 4))
        y = rng.normal(size=200)
        design = build_design([(f"x{i}", x[:, i]) for i in range(4)])
        res = ols_fit(design, y)
        gram = np.abs(design.data.T @ res.residuals)
        assert gram.max() < 1e-8 * max(1.0, np.abs(y).sum())

    def test_r2_equals_squared_correlation_of_fit(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(150, 2))
        y = x @ np.array([1.0, 2.0]) + rng.normal(size=150)
        design = build_design([("a", x[:, 0]), ("b", x[:, 1])])
        res = ols_fit(design, y)
        r_fit, _ = pearson(res.fitted, y)
        assert res.r2 == pytest.approx(r_fit**2, abs=1e-10)

    def test_standardizing_regressor_preserves_fit_statistics(self):
        rng = np.random.default_rng(12)
        x = rng.normal(2.0, 5.0, size=300)
        z = rng.normal(size=300)
        y = 1.0 + 0.3 * x - 0.7 * z + rng.normal(size=300)
        raw = ols_fit(build_design([("x", x), ("z", z)]), y)
        std = ols_fit(build_design([("x", standardize(x)), ("z", z)]), y)
        sd = x.std(ddof=1)
        assert std.coefficient("x") == pytest.approx(raw.coefficient("x") * sd,
                                                     rel=1e-9)
        for name in ("x", "z"):
            i_raw, i_std = raw.names.index(name), std.names.index(name)
            assert std.t_stats[i_std] == pytest.approx(raw.t_stats[i_raw], rel=1e-9)
            assert std.p_values[i_std] == pytest.approx(raw.p_values[i_raw],
                                                        abs=1e-9)
        assert std.r2 == pytest.approx(raw.r2, abs=1e-9)
        assert std.f_stat == pytest.approx(raw.f_stat, rel=1e-9)

    def test_hc3_close_to_classic_when_homoskedastic(self):
        rng = np.random.default_rng(13)
        x = rng.normal(size=1000)
        y = 2.0 + x + rng.normal(size=1000)
        res = ols_fit(build_design([("x", x)]), y, cov_type="hc3")
        ratios = res.se_hc3 / res.se_classic
        assert np.all((ratios > 0.8) & (ratios < 1.25))

    def test_ci99_symmetric_and_ordered(self):
        rng = np.random.default_rng(14)
        x = rng.normal(size=50)
        res = ols_fit(build_design([("x", x)]), 3 * x + rng.normal(size=50))
        mid = res.ci99.mean(axis=1)
        np.testing.assert_allclose(mid, res.coefficients, atol=1e-12)
        assert np.all(res.ci99[:, 0] < res.ci99[:, 1])

    def test_categorical_dummies_reference_level(self):
        labels = ["b", "a", "c", "a", "b", "c", "a", "b"]
        design = build_design([], [("grp", labels)])
        assert design.names == ["intercept", "grp[b]", "grp[c]"]
        assert design.data[:, 1].sum() == 3  # three b rows

    def test_monte_carlo_ci_coverage(self):
        # Planted coefficients with dummy groups; 95% CI coverage pooled
        # over coefficients and seeds stays near nominal.
        truth = {"intercept": 0.4, "x1": 1.0, "x2": -0.5,
                 "grp[g1]": 0.8, "grp[g2]": -0.3}
        hits = total = 0
        for seed in range(40):
            rng = np.random.default_rng(seed)
            n = 400
            x1 = rng.normal(size=n)
            x2 = rng.normal(size=n)
            grp = rng.choice(["g0", "g1", "g2"], size=n)
            y = (truth["intercept"] + truth["x1"] * x1 + truth["x2"] * x2
                 + truth["grp[g1]"] * (grp == "g1")
                 + truth["grp[g2]"] * (grp == "g2") + rng.normal(size=n))
            design = build_design([("x1", x1), ("x2", x2)], [("grp", grp)])
            res = ols_fit(design, y)
            ci = res.ci(0.95)
            for i, name in enumerate(res.names):
                total += 1
                hits += ci[i, 0] <= truth[name] <= ci[i, 1]
        assert hits / total >= 0.93


class TestGroupedCorrelation:
    def test_identity_relation_in_every_bin(self):
        rng = np.random.default_rng(15)
        x = rng.normal(size=90)
        labels = np.repeat(["a", "b", "c"], 30)
        cells = grouped_correlation(x, x, labels)
        assert [c.group for c in cells] == ["a", "b", "c"]
        for cell in cells:
            assert cell.coefficient == pytest.approx(1.0, abs=1e-12)

    def test_small_groups_emit_null(self):
        cells = grouped_correlation([1, 2, 3, 4], [1, 2, 3, 4],
                                    ["a", "a", "a", "b"])
        lookup = {c.group: c for c in cells}
        assert lookup["b"].coefficient is None
        assert lookup["a"].coefficient is not None

    def test_order_parameter_controls_rows(self):
        cells = grouped_correlation([1, 2, 3], [1, 2, 3], ["z", "z", "z"],
                                    order=["z", "missing"])
        assert [c.group for c in cells] == ["z", "missing"]
        assert cells[1].n == 0

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            grouped_correlation([], [], [])

    def test_bin_assignment_tally(self):
        values = list(range(1, 26))
        edges = [(1.0, 1.0), (2.0, 2.0), (3.0, 5.0), (6.0, 10.0), (11.0, None)]
        labels = assign_bins(values, edges)
        expected = {"1": 1, "2": 1, "3-5": 3, "6-10": 5, "11+": 15}
        for label, count in expected.items():
            assert labels.count(label) == count

    def test_year_range_tally(self):
        years = [1994, 1999, 2000, 2005, 2011, 2017, 2023, 2024, 2025]
        edges = [(1994.0, 1999.0), (2000.0, 2005.0), (2006.0, 2011.0),
                 (2012.0, 2017.0), (2018.0, 2023.0), (2024.0, 2025.0)]
        labels = assign_bins(years, edges,
                             [f"{int(a)}-{int(b)}" for a, b in edges])
        assert labels == ["1994-1999", "1994-1999", "2000-2005", "2000-2005",
                          "2006-2011", "2012-2017", "2018-2023", "2024-2025",
                          "2024-2025"]


class TestQqPoints:
    def test_positions_and_standardization(self):
        pts = qq_points([-1.0, 0.0, 1.0])
        assert pts[1][0] == pytest.approx(0.0, abs=1e-12)
        assert pts[1][1] == pytest.approx(0.0, abs=1e-12)
        assert pts[0][0] == pytest.approx(normal_quantile(0.5 / 3), abs=1e-12)

    def test_normal_sample_hugs_diagonal(self):
        rng = np.random.default_rng(16)
        pts = qq_points(rng.normal(size=10_000))
        mid = len(pts) // 2
        assert abs(pts[mid][0] - pts[mid][1]) < 0.1

    def test_zero_inflated_lower_tail_sits_above_diagonal(self):
        rng = np.random.default_rng(17)
        sample = np.concatenate([np.zeros(600), rng.exponential(2.0, size=400)])
        pts = qq_points(sample)
        lower = pts[: len(pts) // 10]
        assert np.all(lower[:, 1] > lower[:, 0])

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            qq_points([1.0, 2.0])
