from datetime import date, datetime

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trafficpred.ingest import (
    BadTimestamp,
    CdrRecord,
    DailyAggregator,
    DEFAULT_LAYOUT,
    FieldLayout,
    IngestDiagnostics,
    MalformedLine,
    MissingCache,
    NegativeDuration,
    ObservationWindow,
    aggregate_daily,
    iter_cdr_records,
    parse_cdr_line,
    read_series_cache,
    write_series_cache,
)


def make_line(
    service="1001",
    opposite="2002",
    start="20141017154209",
    end="20141017154509",
    duration="180",
):
    fields = [""] * DEFAULT_LAYOUT.field_count
    fields[DEFAULT_LAYOUT.service_nbr] = service
    fields[DEFAULT_LAYOUT.opposite_no] = opposite
    fields[DEFAULT_LAYOUT.start_time] = start
    fields[DEFAULT_LAYOUT.end_time] = end
    fields[DEFAULT_LAYOUT.duration] = duration
    return ",".join(fields)


class TestParseCdrLine:
    def test_parses_timestamp_fields(self):
        record = parse_cdr_line(make_line())
        assert record.start_time == datetime(2014, 10, 17, 15, 42, 9)
        assert record.end_time == datetime(2014, 10, 17, 15, 45, 9)
        assert record.service_nbr == "1001"
        assert record.opposite_no == "2002"
        assert record.duration == 180

    def test_zero_duration_is_valid(self):
        record = parse_cdr_line(make_line(end="20141017154209", duration="0"))
        assert record.duration == 0

    def test_invalid_month_rejected(self):
        with pytest.raises(BadTimestamp):
            parse_cdr_line(make_line(start="20141399000000"))

    def test_short_timestamp_rejected(self):
        with pytest.raises(BadTimestamp):
            parse_cdr_line(make_line(start="2014101715420"))

    def test_wrong_field_count_rejected(self):
        with pytest.raises(MalformedLine):
            parse_cdr_line("a,b,c")

    def test_negative_duration_rejected(self):
        with pytest.raises(NegativeDuration):
            parse_cdr_line(make_line(duration="-5"))

    def test_end_before_start_rejected(self):
        with pytest.raises(BadTimestamp):
            parse_cdr_line(make_line(start="20141017154209", end="20141017100000"))

    def test_custom_delimiter(self):
        layout = FieldLayout(delimiter="|")
        line = make_line().replace(",", "|")
        assert parse_cdr_line(line, layout).duration == 180


class TestIterCdrRecords:
    def test_dirty_rows_are_counted_not_fatal(self):
        lines = [
            make_line(),
            "garbage",
            make_line(start="20141399000000"),
            make_line(duration="-1"),
            "",
            make_line(service="1002"),
        ]
        diag = IngestDiagnostics()
        records = list(iter_cdr_records(lines, diagnostics=diag))
        assert len(records) == 2
        assert diag.records_read == 5  # blank line ignored entirely
        assert diag.parsed == 2
        assert diag.malformed == 1
        assert diag.bad_timestamp == 1
        assert diag.negative_duration == 1
        assert diag.skipped == 3

    def test_duration_mismatch_counted(self):
        # reported duration disagrees with end - start but stays authoritative
        diag = IngestDiagnostics()
        line = make_line(end="20141017154210", duration="500")
        (record,) = list(iter_cdr_records([line], diagnostics=diag))
        assert record.duration == 500
        assert diag.duration_mismatch == 1


WINDOW = ObservationWindow(date(2014, 7, 1), date(2014, 7, 3))


def record_on(day: str, user="u1", duration=60):
    start = datetime.strptime(day, "%Y-%m-%d").replace(hour=9)
    return CdrRecord(
        service_nbr=user,
        opposite_no="x",
        start_time=start,
        end_time=start,
        duration=duration,
    )


class TestAggregateDaily:
    def test_same_day_durations_sum(self):
        out = aggregate_daily(
            [record_on("2014-07-01", duration=60), record_on("2014-07-01", duration=40)],
            WINDOW,
        )
        assert out["u1"].values.tolist() == [100, 0, 0]

    def test_quiet_days_zero_filled(self):
        out = aggregate_daily(
            [record_on("2014-07-01", duration=30), record_on("2014-07-03", duration=70)],
            WINDOW,
        )
        assert out["u1"].values.tolist() == [30, 0, 70]

    def test_empty_stream_empty_mapping(self):
        assert aggregate_daily([], WINDOW) == {}

    def test_out_of_window_records_counted(self):
        agg = DailyAggregator(WINDOW)
        aggregate_daily(
            [record_on("2014-06-30"), record_on("2014-07-02"), record_on("2014-07-04")],
            WINDOW,
            aggregator=agg,
        )
        assert agg.out_of_window == 2

    def test_series_span_the_window(self):
        out = aggregate_daily([record_on("2014-07-02", user="a")], WINDOW)
        assert len(out["a"].values) == WINDOW.day_count

    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 500)), max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_total_seconds_conserved(self, calls):
        days = ["2014-07-01", "2014-07-02", "2014-07-03"]
        records = [record_on(days[d], duration=dur) for d, dur in calls]
        out = aggregate_daily(records, WINDOW)
        total = sum(int(s.values.sum()) for s in out.values())
        assert total == sum(dur for _, dur in calls)

    @given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 500)), max_size=40), st.randoms())
    @settings(max_examples=50, deadline=None)
    def test_permutation_invariant(self, calls, rnd):
        days = ["2014-07-01", "2014-07-02", "2014-07-03"]
        records = [record_on(days[d], duration=dur) for d, dur in calls]
        shuffled = records[:]
        rnd.shuffle(shuffled)
        a = aggregate_daily(records, WINDOW)
        b = aggregate_daily(shuffled, WINDOW)
        assert a.keys() == b.keys()
        for user in a:
            assert a[user].values.tolist() == b[user].values.tolist()

    def test_parallel_fold_matches_serial(self):
        records = [
            record_on("2014-07-01", user=f"u{i % 4}", duration=10 * i) for i in range(20)
        ] + [record_on("2014-06-01", user="u0")]
        serial = DailyAggregator(WINDOW)
        for r in records:
            serial.add(r)
        shard_a, shard_b = DailyAggregator(WINDOW), DailyAggregator(WINDOW)
        for i, r in enumerate(records):
            (shard_a if i % 2 else shard_b).add(r)
        merged = shard_b.merge(shard_a)
        assert merged.out_of_window == serial.out_of_window
        left, right = merged.series(), serial.series()
        assert left.keys() == right.keys()
        for user in left:
            assert left[user].values.tolist() == right[user].values.tolist()


class TestSeriesCache:
    def test_round_trip(self, tmp_path):
        out = aggregate_daily(
            [record_on("2014-07-01", user="a", duration=5),
             record_on("2014-07-03", user="b", duration=9)],
            WINDOW,
        )
        write_series_cache(out, tmp_path / "cache")
        loaded = read_series_cache(tmp_path / "cache")
        assert loaded.keys() == out.keys()
        for user in out:
            assert loaded[user].values.tolist() == out[user].values.tolist()
            assert loaded[user].window == WINDOW

    def test_missing_cache_raises(self, tmp_path):
        with pytest.raises(MissingCache):
            read_series_cache(tmp_path / "nope")

    def test_write_is_deterministic(self, tmp_path):
        out = aggregate_daily([record_on("2014-07-02", user="z")], WINDOW)
        write_series_cache(out, tmp_path / "one")
        write_series_cache(out, tmp_path / "two")
        assert (tmp_path / "one" / "series.csv").read_bytes() == (
            tmp_path / "two" / "series.csv"
        ).read_bytes()


def test_window_day_count_validates():
    with pytest.raises(ValueError):
        ObservationWindow(date(2014, 7, 2), date(2014, 7, 1))
    assert ObservationWindow(date(2014, 7, 1), date(2014, 12, 31)).day_count == 184
