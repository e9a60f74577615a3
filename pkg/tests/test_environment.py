import datetime as dt

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vectorsched.environment import (
    RateCurve,
    SeasonalTemperature,
    TemperatureError,
    TemperatureSeries,
    load_temperature_series,
    rate_at,
    seasonal_profile,
    temperature_at,
)


def _series(start: dt.date, temps) -> TemperatureSeries:
    dates = tuple(start + dt.timedelta(days=i) for i in range(len(temps)))
    return TemperatureSeries(dates, np.asarray(temps, dtype=float))


class TestLoad:
    def test_three_rows(self, tmp_csv):
        s = load_temperature_series(tmp_csv("date,temp_c\n2023-01-01,20\n2023-01-02,21\n2023-01-03,22\n"))
        assert len(s) == 3
        np.testing.assert_array_equal(s.temps, [20, 21, 22])

    def test_rows_sorted_by_date(self, tmp_csv):
        s = load_temperature_series(tmp_csv("date,temp_c\n2023-01-03,22\n2023-01-01,20\n2023-01-02,21\n"))
        assert [d.day for d in s.dates] == [1, 2, 3]
        np.testing.assert_array_equal(s.temps, [20, 21, 22])

    def test_duplicate_date(self, tmp_csv):
        with pytest.raises(TemperatureError, match="duplicate date 2023-01-01"):
            load_temperature_series(tmp_csv("date,temp_c\n2023-01-01,20\n2023-01-01,21\n"))

    def test_parse_error_names_line(self, tmp_csv):
        with pytest.raises(TemperatureError, match=r":3: cannot parse"):
            load_temperature_series(tmp_csv("date,temp_c\n2023-01-01,20\n2023-01-02,abc\n"))

    def test_sanity_bound(self, tmp_csv):
        with pytest.raises(TemperatureError, match="outside"):
            load_temperature_series(tmp_csv("date,temp_c\n2023-01-01,75\n"))

    def test_missing_column(self, tmp_csv):
        with pytest.raises(TemperatureError, match="missing column"):
            load_temperature_series(tmp_csv("day,temp\n2023-01-01,20\n"))


class TestSeasonalProfile:
    def test_constant(self):
        prof = seasonal_profile(_series(dt.date(2023, 1, 1), np.full(365, 25.0)), 7)
        np.testing.assert_allclose(prof.day_of_year_temp, 25.0, rtol=0, atol=1e-12)

    def test_two_year_mean(self):
        temps = np.concatenate([np.full(365, 20.0), np.full(365, 24.0)])
        prof = seasonal_profile(_series(dt.date(2022, 1, 1), temps), 1)
        np.testing.assert_allclose(prof.day_of_year_temp[:365], 22.0)

    def test_smoothed_sinusoid(self):
        # a centered 7-day mean of cos(w(d+k)) is cos(wd) * mean_k cos(wk)
        w = 2 * np.pi / 365
        days = np.arange(1, 366)
        raw = 25.0 - 4.0 * np.cos(w * (days - 20))
        prof = seasonal_profile(_series(dt.date(2023, 1, 1), raw), 7)
        damping = np.mean(np.cos(w * np.arange(-3, 4)))
        expected = 25.0 - 4.0 * damping * np.cos(w * (days - 20))
        np.testing.assert_allclose(prof.day_of_year_temp[:365], expected, rtol=0, atol=1e-9)

    def test_leap_day_copied(self):
        temps = np.linspace(10, 30, 365)
        prof = seasonal_profile(_series(dt.date(2023, 1, 1), temps), 1)
        assert prof.day_of_year_temp[365] == prof.day_of_year_temp[364]

    def test_isolated_gap_imputed(self):
        s = _series(dt.date(2023, 1, 1), 10 + 0.1 * np.arange(365))
        keep = [i for i in range(365) if i != 100]
        s = TemperatureSeries(tuple(s.dates[i] for i in keep), s.temps[keep])
        prof = seasonal_profile(s, 1)
        assert prof.day_of_year_temp[100] == pytest.approx(20.0)

    def test_long_gap_listed(self):
        s = _series(dt.date(2023, 1, 1), np.full(365, 20.0))
        keep = [i for i in range(365) if not 99 <= i <= 101]
        s = TemperatureSeries(tuple(s.dates[i] for i in keep), s.temps[keep])
        with pytest.raises(TemperatureError, match="100, 101, 102"):
            seasonal_profile(s, 7)

    def test_even_window_rejected(self):
        with pytest.raises(ValueError):
            seasonal_profile(_series(dt.date(2023, 1, 1), np.full(365, 20.0)), 4)

    @given(st.lists(st.floats(-20, 45), min_size=366, max_size=366))
    def test_window_one_is_identity(self, values):
        prof = SeasonalTemperature(np.array(values))
        np.testing.assert_array_equal(prof.resmooth(1).day_of_year_temp, prof.day_of_year_temp)


class TestTemperatureAt:
    def _ramp(self):
        values = np.full(366, 25.0)
        values[0], values[1] = 20.0, 22.0
        return SeasonalTemperature(values)

    def test_start_entry(self):
        assert temperature_at(self._ramp(), 0.0, 1) == 20.0

    def test_wraps_after_a_year(self):
        assert temperature_at(self._ramp(), 365.0, 1) == 20.0

    def test_midpoint(self):
        assert temperature_at(self._ramp(), 0.5, 1) == pytest.approx(21.0)

    def test_start_day_offset(self):
        assert temperature_at(self._ramp(), 0.0, 2) == 22.0

    def test_continuous_across_year_end(self):
        prof = SeasonalTemperature(np.linspace(10, 30, 366))
        a = temperature_at(prof, 365 - 1e-9, 1)
        b = temperature_at(prof, 365 + 1e-9, 1)
        assert abs(a - b) < 1e-6

    @given(st.floats(0, 2000), st.integers(1, 366))
    def test_periodic(self, t, start):
        prof = SeasonalTemperature(20 + 5 * np.sin(np.arange(366)))
        assert temperature_at(prof, t, start) == pytest.approx(temperature_at(prof, t + 365, start), abs=1e-9)

    @given(st.floats(0, 1000), st.integers(0, 364))
    def test_continuous_at_entry_boundaries(self, _, d):
        prof = SeasonalTemperature(20 + 5 * np.sin(np.arange(366)))
        eps = 1e-7
        assert abs(temperature_at(prof, d + eps) - temperature_at(prof, d - eps if d else 365 - eps)) < 1e-5


class TestRateCurve:
    curve = RateCurve.from_pairs([(20, 0.1), (30, 0.3)])

    def test_midpoint(self):
        assert rate_at(self.curve, 25) == pytest.approx(0.2)

    def test_clamp_low(self):
        assert rate_at(self.curve, 10) == pytest.approx(0.1)

    def test_clamp_high(self):
        assert rate_at(self.curve, 35) == pytest.approx(0.3)

    def test_rejects_negative_rate(self):
        with pytest.raises(ValueError):
            RateCurve.from_pairs([(20, -0.1)])

    def test_rejects_unsorted_grid(self):
        with pytest.raises(ValueError):
            RateCurve.from_pairs([(30, 0.1), (20, 0.2)])

    @given(
        st.lists(st.tuples(st.floats(-10, 50), st.floats(0, 10)), min_size=1, max_size=8,
                 unique_by=lambda p: round(p[0], 3)),
        st.floats(-100, 100),
    )
    def test_nonnegative(self, pairs, temp):
        pairs = sorted(pairs)
        if any(b[0] - a[0] < 1e-3 for a, b in zip(pairs, pairs[1:])):
            return
        assert rate_at(RateCurve.from_pairs(pairs), temp) >= 0
