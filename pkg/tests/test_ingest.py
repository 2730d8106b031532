import logging

import numpy as np
import pytest

from credit_mlp.errors import DataError
from credit_mlp.ingest import (
    CompanyYearRecord,
    FeatureManifest,
    filter_complete,
    join_labels,
    load_financials,
    write_financials,
    write_labels,
)
from credit_mlp.rating_scale import RatingScale
from credit_mlp.synth import SynthConfig, generate

MANIFEST = FeatureManifest((("Revenue", "income"), ("NetIncome", "income"), ("TotalAssets", "balance")))


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def features(tmp_path):
    return write(
        tmp_path / "features.csv",
        "company_id,fiscal_year,TotalAssets,Revenue,NetIncome\n"
        "C1,2010,10,1,0.5\n"
        "C1,2011,11,2,0.6\n"
        "C1,2012,12,3,0.7\n"
        "C2,2010,20,4,NA\n"
        "C2,2011,21,5,0.9\n"
        "C2,2012,22,6,1.0\n",
    )


class TestManifest:
    def test_default_has_43_fields_in_three_groups(self):
        m = FeatureManifest.default()
        assert len(m) == 43
        assert {g for _, g in m.entries} == {"income", "balance", "cashflow"}
        assert "NetIncome" in m.names

    def test_round_trip(self, tmp_path):
        MANIFEST.write(tmp_path / "m.csv")
        assert FeatureManifest.load(tmp_path / "m.csv") == MANIFEST


class TestLoadFinancials:
    def test_all_cells_present(self, tmp_path):
        path = write(
            tmp_path / "f.csv",
            "company_id,fiscal_year,Revenue,NetIncome,TotalAssets\n"
            + "".join(f"C{c},{y},1,2,3\n" for c in (1, 2) for y in (2010, 2011, 2012)),
        )
        records = load_financials(path, MANIFEST)
        assert len(records) == 6
        assert sum(int(np.isnan(r.values).sum()) for r in records) == 0

    def test_columns_bound_by_header_not_position(self, features):
        r = load_financials(features, MANIFEST)[0]
        np.testing.assert_array_equal(r.values, [1.0, 0.5, 10.0])

    @pytest.mark.parametrize("token", ["", "NA", "n/a", "abc", "nan"])
    def test_missing_tokens(self, tmp_path, token):
        path = write(
            tmp_path / "f.csv",
            "company_id,fiscal_year,Revenue,NetIncome,TotalAssets\n"
            "C1,2010,1,2,3\nC1,2011,1,2,3\nC1,2012,1,2,3\n"
            f"C2,2010,1,{token},3\n",
        )
        records = load_financials(path, MANIFEST)
        assert np.isnan(records[3].values[1])
        assert not np.isnan(records[3].values[[0, 2]]).any()

    def test_zero_is_not_missing(self, tmp_path):
        path = write(tmp_path / "f.csv", "company_id,fiscal_year,Revenue,NetIncome,TotalAssets\nC1,2010,0,0,0\n")
        assert load_financials(path, MANIFEST)[0].complete

    def test_missing_header_column_named(self, tmp_path):
        path = write(tmp_path / "f.csv", "company_id,fiscal_year,Revenue,TotalAssets\nC1,2010,1,2\n")
        with pytest.raises(DataError, match="NetIncome"):
            load_financials(path, MANIFEST)

    def test_malformed_row_reports_row_number(self, tmp_path):
        path = write(tmp_path / "f.csv", "company_id,fiscal_year,Revenue,NetIncome,TotalAssets\nC1,2010,1,2,3\nC1,2011,1,2\n")
        with pytest.raises(DataError, match="row 3"):
            load_financials(path, MANIFEST)

    def test_bad_year_rejected(self, tmp_path):
        path = write(tmp_path / "f.csv", "company_id,fiscal_year,Revenue,NetIncome,TotalAssets\nC1,20x0,1,2,3\n")
        with pytest.raises(DataError, match="row 2"):
            load_financials(path, MANIFEST)


class TestJoinLabels:
    def test_key_match_and_outer_join(self, features, tmp_path):
        labels = write(tmp_path / "l.csv", "company_id,fiscal_year,rating\nC1,2012,BB+\n")
        records = join_labels(load_financials(features, MANIFEST), labels, RatingScale())
        by_key = {(r.company_id, r.fiscal_year): r.label for r in records}
        assert by_key[("C1", 2012)] == "BB+"
        assert by_key[("C1", 2011)] is None

    def test_duplicate_label_rejected(self, features, tmp_path):
        labels = write(tmp_path / "l.csv", "company_id,fiscal_year,rating\nC1,2012,BB+\nC1,2012,A+\n")
        with pytest.raises(DataError, match="duplicate"):
            join_labels(load_financials(features, MANIFEST), labels, RatingScale())

    def test_grade_outside_scale_rejected(self, features, tmp_path):
        labels = write(tmp_path / "l.csv", "company_id,fiscal_year,rating\nC1,2012,C\n")
        with pytest.raises(DataError, match="'C'"):
            join_labels(load_financials(features, MANIFEST), labels, RatingScale())


def _records(companies, years, missing=()):
    out = []
    for c in range(companies):
        for y in years:
            values = np.full(3, float(c + y))
            if (c, y) in missing:
                values[1] = np.nan
            out.append(CompanyYearRecord(f"C{c}", y, values, "BB+" if c % 2 else "A-"))
    return out


class TestFilterComplete:
    def test_one_gap_drops_whole_company(self):
        years = range(2010, 2017)
        ds = filter_complete(_records(3, years, missing={(1, 2013)}), (2010, 2016), MANIFEST)
        assert ds.companies == ["C0", "C2"]
        assert len(ds) == 14

    def test_missing_year_drops_company(self):
        records = [r for r in _records(2, range(2010, 2017)) if not (r.company_id == "C0" and r.fiscal_year == 2012)]
        assert filter_complete(records, (2010, 2016), MANIFEST).companies == ["C1"]

    def test_unlabeled_year_drops_company(self):
        records = _records(2, range(2010, 2013))
        records[0].label = None
        assert filter_complete(records, (2010, 2012), MANIFEST).companies == ["C1"]

    def test_years_outside_period_ignored(self):
        ds = filter_complete(_records(2, range(2008, 2014)), (2010, 2012), MANIFEST)
        assert len(ds) == 6
        assert set(ds.years.tolist()) == {2010, 2011, 2012}

    def test_empty_input_warns(self, caplog):
        with caplog.at_level(logging.WARNING):
            ds = filter_complete([], (2010, 2016), MANIFEST)
        assert len(ds) == 0
        assert "no companies" in caplog.text

    def test_default_panel_arithmetic(self):
        """306 companies, 70 with a gap somewhere -> 236 x 7 = 1652 samples."""
        panel = generate(SynthConfig())
        ds = panel.dataset()
        assert len(ds.companies) == 236
        assert len(ds) == 1652
        assert np.isfinite(ds.X).all()

    def test_count_is_multiple_of_period(self, rng):
        missing = {(int(c), int(y)) for c, y in zip(rng.integers(0, 40, 15), rng.integers(2010, 2015, 15))}
        ds = filter_complete(_records(40, range(2010, 2015), missing), (2010, 2014), MANIFEST)
        assert len(ds) % 5 == 0
        assert len(ds) == 5 * (40 - len({c for c, _ in missing}))


class TestRoundTrip:
    def test_synthetic_panel_round_trips_bit_for_bit(self, tmp_path):
        panel = generate(SynthConfig(companies=12, incomplete_companies=3, seed=5))
        features, labels = panel.write(tmp_path)
        loaded = join_labels(load_financials(features, panel.manifest), labels)
        assert len(loaded) == len(panel.records)
        for a, b in zip(panel.records, loaded):
            assert (a.company_id, a.fiscal_year, a.label) == (b.company_id, b.fiscal_year, b.label)
            np.testing.assert_array_equal(a.values, b.values)

    def test_write_is_deterministic(self, tmp_path):
        panel = generate(SynthConfig(companies=5, incomplete_companies=0))
        write_financials(tmp_path / "a.csv", panel.records, panel.manifest)
        write_financials(tmp_path / "b.csv", panel.records, panel.manifest)
        write_labels(tmp_path / "la.csv", panel.records)
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
