import io
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rftlattice.errors import DomainError
from rftlattice.stats import normal_cdf
from rftlattice.survey import (
    CENTENO_QUANTILES,
    PUBLISHED_RATIO_MODEL,
    SURVEY_HEADER,
    MalformedHeaderError,
    RatioModel,
    ResidualQuantiles,
    StudyRecord,
    adjust_model,
    compare_rft_users,
    fail_percentage,
    fit_ratio_model,
    ingest,
    load_synthetic_survey,
    prob_meets_assumption,
    smoothness_ratio,
    summarize,
    synthetic_survey,
    write_survey_csv,
)

HEADER = ",".join(SURVEY_HEADER)


def record(fwhm=6.0, voxel=(3.0, 3.0, 3.0), method="corrected_parametric", sid="x"):
    return StudyRecord(sid, *voxel, fwhm, "SPM", method, method == "corrected_parametric")


class TestIngest:
    def test_three_rows(self):
        text = HEADER + "\n" + "\n".join(
            [
                "a,3,3,3,8,SPM,corrected_parametric,true",
                "b,2,2,2.5,6,FSL,fdr,false",
                "c,3.5,3.5,4,0,AFNI,not_reported,false",
            ]
        )
        rep = ingest(io.StringIO(text))
        assert len(rep.records) == 3 and rep.rejects == []
        assert rep.records[1] == StudyRecord("b", 2.0, 2.0, 2.5, 6.0, "FSL", "fdr", False)

    def test_bad_row_line_number(self):
        text = HEADER + "\n" + "\n".join(
            [
                "a,3,3,3,8,SPM,corrected_parametric,true",
                "b,3,3,3,8,SPM,corrected_parametric,true",
                "c,-3,3,3,8,SPM,corrected_parametric,true",
                "d,3,3,3,8,SPM,fdr,false",
            ]
        )
        rep = ingest(io.StringIO(text))
        assert [r.study_id for r in rep.records] == ["a", "b", "d"]
        assert len(rep.rejects) == 1 and rep.rejects[0].line == 4

    @pytest.mark.parametrize(
        "row",
        [
            "a,3,3,3,8,SPM,corrected_parametric,false",
            "a,3,3,3,8,SPM,wizardry,false",
            "a,3,3,3,-1,SPM,fdr,false",
            "a,3,3,x,8,SPM,fdr,false",
            "a,3,3,3,8,SPM,fdr,maybe",
            "a,3,3,3,8,SPM,fdr",
        ],
    )
    def test_rejects(self, row):
        rep = ingest(io.StringIO(HEADER + "\n" + row + "\n"))
        assert rep.records == [] and rep.rejects[0].line == 2

    def test_empty_body(self):
        rep = ingest(io.StringIO(HEADER + "\n"))
        assert rep.records == [] and rep.rejects == []

    @pytest.mark.parametrize("text", ["", "study,voxel\n", HEADER.replace("uses_rft", "rft") + "\n"])
    def test_malformed_header(self, text):
        with pytest.raises(MalformedHeaderError):
            ingest(io.StringIO(text))

    def test_round_trip(self):
        recs = synthetic_survey() + [record(sid='odd, "quoted" id', fwhm=0.0)]
        buf = io.StringIO()
        write_survey_csv(recs, buf)
        buf.seek(0)
        assert ingest(buf).records == recs

    def test_shipped_fixture_matches_generator(self):
        assert load_synthetic_survey().records == synthetic_survey()


class TestRatio:
    @pytest.mark.parametrize("mode", ["in_plane", "geometric_mean"])
    def test_isotropic(self, mode):
        assert smoothness_ratio(record(6, (3, 3, 3)), mode) == pytest.approx(2.0)

    def test_geometric(self):
        assert smoothness_ratio(record(8, (2, 2, 4)), "geometric_mean") == pytest.approx(8 / 16 ** (1 / 3))
        assert 8 / 16 ** (1 / 3) == pytest.approx(3.1748, abs=1e-4)

    def test_survey_means(self):
        assert smoothness_ratio(record(6.12, (3.01, 3.01, 3.53))) == pytest.approx(2.033, abs=1e-3)

    def test_unsmoothed(self):
        with pytest.raises(DomainError):
            smoothness_ratio(record(0.0))

    def test_unknown_mode(self):
        with pytest.raises(DomainError):
            smoothness_ratio(record(), "harmonic")


class TestModel:
    def test_fit_by_hand(self):
        m = fit_ratio_model([1, 2, 3])
        assert m.mean == pytest.approx(2.0)
        assert m.sd == pytest.approx(math.sqrt(2 / 3))

    @pytest.mark.parametrize("ratios", [[2, 2, 2], [1.5]])
    def test_fit_errors(self, ratios):
        with pytest.raises(DomainError):
            fit_ratio_model(ratios)

    def test_published_probability(self):
        assert prob_meets_assumption(PUBLISHED_RATIO_MODEL, 3.5) == pytest.approx(0.009, abs=1e-3)

    def test_probability_edges(self):
        m = RatioModel(2.0, 0.5)
        assert prob_meets_assumption(m, 2.0) == pytest.approx(0.5)
        assert prob_meets_assumption(m, 1e6) == 0.0

    def test_adjust(self):
        m = adjust_model(PUBLISHED_RATIO_MODEL, 1.36)
        assert (m.mean, m.sd) == pytest.approx((2.7064, 0.8704))
        m = adjust_model(PUBLISHED_RATIO_MODEL, 1.77)
        assert (m.mean, m.sd) == pytest.approx((3.5223, 1.1328))
        assert adjust_model(PUBLISHED_RATIO_MODEL, 1.0) == PUBLISHED_RATIO_MODEL

    @pytest.mark.parametrize("m", [0.0, -1.0])
    def test_adjust_domain(self, m):
        with pytest.raises(DomainError):
            adjust_model(PUBLISHED_RATIO_MODEL, m)

    def test_quantile_order_enforced(self):
        with pytest.raises(DomainError):
            ResidualQuantiles(1.5, 1.36, 1.77)

    def test_published_bounds(self):
        low, med, high = fail_percentage(PUBLISHED_RATIO_MODEL, CENTENO_QUANTILES, 3.5)
        assert low == pytest.approx(49, abs=1)
        assert med == pytest.approx(82, abs=1)
        assert high == pytest.approx(89, abs=1)

    def test_zero_critical(self):
        values = fail_percentage(PUBLISHED_RATIO_MODEL, CENTENO_QUANTILES, 0.0)
        assert all(v == pytest.approx(0.0, abs=0.1) for v in values)

    def test_unit_quantiles(self):
        values = fail_percentage(PUBLISHED_RATIO_MODEL, ResidualQuantiles(1, 1, 1), 3.5)
        expected = 100 * (1 - prob_meets_assumption(PUBLISHED_RATIO_MODEL, 3.5))
        assert values == pytest.approx((expected,) * 3)

    def test_bound_ordering(self):
        low, med, high = fail_percentage(PUBLISHED_RATIO_MODEL, CENTENO_QUANTILES, 3.5)
        assert low <= med <= high

    def test_probability_monotone(self):
        m = PUBLISHED_RATIO_MODEL
        ps = [prob_meets_assumption(m, 0.5 + 0.1 * i) for i in range(50)]
        assert all(a > b for a, b in zip(ps, ps[1:]))
        wider = [prob_meets_assumption(RatioModel(m.mean, sd), 3.5) for sd in (0.3, 0.5, 0.7, 0.9)]
        assert all(a < b for a, b in zip(wider, wider[1:]))

    @given(
        st.floats(0.1, 10), st.floats(0.5, 5), st.floats(0.05, 3), st.floats(0.2, 5),
    )
    def test_adjust_preserves_z(self, r, mean, sd, mult):
        base = RatioModel(mean, sd)
        adj = adjust_model(base, mult)
        z0 = (r - base.mean) / base.sd
        z1 = (r * mult - adj.mean) / adj.sd
        assert z1 == pytest.approx(z0, rel=1e-9, abs=1e-9)
        assert normal_cdf(z1) == pytest.approx(normal_cdf(z0), abs=1e-12)


class TestCompareRftUsers:
    def _group(self, ratios, method):
        return [record(fwhm=3.0 * r, method=method, sid=f"{method}{i}") for i, r in enumerate(ratios)]

    def test_equal_groups(self):
        recs = self._group([1.5, 2.0, 2.5], "corrected_parametric") + self._group([1.5, 2.0, 2.5], "fdr")
        c = compare_rft_users(recs)
        assert c.welch.p_two_sided == pytest.approx(1.0)

    def test_flip_negates(self):
        a, b = [1.5, 2.2, 2.9, 2.0], [1.0, 1.6, 2.1]
        c1 = compare_rft_users(self._group(a, "corrected_parametric") + self._group(b, "fdr"))
        c2 = compare_rft_users(self._group(b, "corrected_parametric") + self._group(a, "fdr"))
        assert c1.welch.t == pytest.approx(-c2.welch.t)

    def test_fixture_by_formula(self):
        c = compare_rft_users(synthetic_survey())
        assert (c.n_rft, c.n_other) == (68, 69)
        # Welch formula with the fixture's design values
        se = math.sqrt(0.64 ** 2 / 68 + 0.64 ** 2 / 69)
        assert c.welch.t == pytest.approx((2.05 - 1.94) / se, abs=0.01)
        assert 0.8 <= abs(c.welch.t) <= 1.3 and 0.2 <= c.welch.p_two_sided <= 0.45

    def test_too_few(self):
        with pytest.raises(DomainError):
            compare_rft_users(self._group([1, 2], "corrected_parametric") + self._group([1], "fdr"))

    def test_unsmoothed_excluded(self):
        recs = synthetic_survey() + [record(fwhm=0.0, sid="raw")]
        s = summarize(ingest(_csv(recs)))
        assert s.n_unsmoothed == 1 and s.n_studies == 138
        assert s.comparison.n_rft == 68


def _csv(records):
    buf = io.StringIO()
    write_survey_csv(records, buf)
    buf.seek(0)
    return buf


def test_fixture_summary_matches_published_statistics():
    s = summarize(load_synthetic_survey(), 3.5)
    assert s.model.mean == pytest.approx(1.99, abs=0.01)
    assert s.model.sd == pytest.approx(0.64, abs=0.01)
    assert s.prob_meets == pytest.approx(0.009, abs=1e-3)
    assert "P(ratio > 3.5)" in s.to_text()
