import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robofp import errors
from robofp.trace import (
    MTU,
    ActionLabel,
    Dataset,
    Trace,
    load_dataset,
    parse_trace_csv,
    quantize_time,
    read_trace,
    save_dataset,
    write_trace_csv,
)


def make_trace(rows, label=None):
    return Trace.from_records(rows, label=label)


class TestParse:
    def test_two_row_example(self):
        tr = parse_trace_csv("t,dir,size\n0.0,1,120\n0.01,-1,132\n")
        assert len(tr) == 2
        assert list(tr.times) == [0.0, 0.01]
        assert list(tr.dirs) == [1, -1]
        assert list(tr.sizes) == [120, 132]

    def test_header_only_is_empty_trace(self):
        tr = parse_trace_csv("t,dir,size\n")
        assert len(tr) == 0
        assert tr.duration == 0.0

    def test_bad_header(self):
        with pytest.raises(errors.MalformedHeader):
            parse_trace_csv("time,dir,size\n0.0,1,120\n")

    def test_empty_document(self):
        with pytest.raises(errors.MalformedHeader):
            parse_trace_csv("")

    def test_non_monotonic_time_reports_line(self):
        with pytest.raises(errors.NonMonotonicTime) as ei:
            parse_trace_csv("t,dir,size\n0.5,1,100\n0.4,1,100\n")
        assert ei.value.line == 3

    def test_bad_direction_reports_line(self):
        with pytest.raises(errors.BadDirection) as ei:
            parse_trace_csv("t,dir,size\n0.0,1,100\n0.1,2,100\n")
        assert ei.value.line == 3

    def test_size_zero_rejected(self):
        with pytest.raises(errors.SizeOutOfRange):
            parse_trace_csv("t,dir,size\n0.0,1,0\n")

    def test_size_above_mtu_rejected(self):
        with pytest.raises(errors.SizeOutOfRange) as ei:
            parse_trace_csv(f"t,dir,size\n0.0,1,{MTU + 1}\n")
        assert ei.value.line == 2

    def test_size_at_mtu_ok(self):
        tr = parse_trace_csv(f"t,dir,size\n0.0,1,{MTU}\n")
        assert tr.sizes[0] == MTU

    def test_garbage_row(self):
        with pytest.raises(errors.MalformedRow):
            parse_trace_csv("t,dir,size\nabc,1,100\n")
        with pytest.raises(errors.MalformedRow):
            parse_trace_csv("t,dir,size\n0.0,1\n")
        with pytest.raises(errors.MalformedRow):
            parse_trace_csv("t,dir,size\n0.0,1,12.5\n")

    def test_absolute_times_are_stripped(self):
        tr = parse_trace_csv("t,dir,size\n100.25,1,50\n100.35,-1,60\n")
        assert tr.times[0] == 0.0
        assert tr.times[1] == pytest.approx(0.1, abs=1e-9)

    def test_equal_timestamps_allowed(self):
        tr = parse_trace_csv("t,dir,size\n0.0,1,50\n0.0,-1,60\n")
        assert len(tr) == 2


class TestWrite:
    def test_six_decimal_fixed_notation(self):
        tr = make_trace([(0.0, 1, 120), (0.01, -1, 132)])
        out = write_trace_csv(tr).decode()
        assert out == "t,dir,size\n0.000000,1,120\n0.010000,-1,132\n"

    def test_empty_trace_writes_header_only(self):
        assert write_trace_csv(make_trace([])) == b"t,dir,size\n"

    @settings(max_examples=120, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.integers(min_value=0, max_value=30_000_000),  # microseconds
                st.sampled_from([1, -1]),
                st.integers(min_value=1, max_value=MTU),
            ),
            min_size=0,
            max_size=60,
        )
    )
    def test_round_trip_is_byte_identical(self, rows):
        rows.sort(key=lambda r: r[0])
        if rows:
            base = rows[0][0]
            rows = [((us - base) / 1e6, d, s) for us, d, s in rows]
        tr = make_trace(rows)
        blob = write_trace_csv(tr)
        tr2 = parse_trace_csv(blob)
        assert write_trace_csv(tr2) == blob
        assert np.array_equal(tr.times, tr2.times)
        assert np.array_equal(tr.dirs, tr2.dirs)
        assert np.array_equal(tr.sizes, tr2.sizes)

    def test_thousand_packet_round_trip(self):
        rng = np.random.default_rng(7)
        t = np.sort(rng.integers(0, 20_000_000, size=1000)) / 1e6
        t = t - t[0]
        tr = Trace(t, rng.choice([1, -1], 1000), rng.integers(1, MTU + 1, 1000))
        blob = write_trace_csv(tr)
        tr2 = parse_trace_csv(blob)
        assert write_trace_csv(tr2) == blob


class TestTraceType:
    def test_rejects_nonzero_start(self):
        with pytest.raises(ValueError):
            make_trace([(0.5, 1, 100)])

    def test_rejects_decreasing_times(self):
        with pytest.raises(ValueError):
            Trace(np.array([0.0, 0.2, 0.1]), np.array([1, 1, 1]), np.array([9, 9, 9]))

    def test_rejects_bad_direction(self):
        with pytest.raises(ValueError):
            make_trace([(0.0, 0, 100)])

    def test_rejects_bad_size(self):
        with pytest.raises(ValueError):
            make_trace([(0.0, 1, 0)])
        with pytest.raises(ValueError):
            make_trace([(0.0, 1, MTU + 1)])

    def test_duration_and_bytes(self):
        tr = make_trace([(0.0, 1, 100), (2.5, -1, 400)])
        assert tr.duration == 2.5
        assert tr.total_bytes == 500

    def test_arrays_read_only(self):
        tr = make_trace([(0.0, 1, 100)])
        with pytest.raises(ValueError):
            tr.sizes[0] = 5

    def test_quantize_time_microsecond_grid(self):
        assert quantize_time(0.1234567) == pytest.approx(0.123457)
        assert quantize_time(1.0000004) == 1.0


class TestManifest:
    def _dataset(self):
        labels = list(ActionLabel) * 2
        traces = [
            make_trace([(0.0, 1, 100 + i), (0.5, -1, 60)]).with_label(lab, f"tr_{i:03d}")
            for i, lab in enumerate(labels)
        ]
        return Dataset(traces)

    def test_save_load_round_trip(self, tmp_path):
        ds = self._dataset()
        manifest = save_dataset(ds, tmp_path / "data")
        ds2 = load_dataset(manifest)
        assert len(ds2) == len(ds)
        assert ds2.labels() == ds.labels()
        assert [t.trace_id for t in ds2] == [t.trace_id for t in ds]
        assert np.array_equal(ds2.traces[0].sizes, ds.traces[0].sizes)

    def test_unknown_label(self, tmp_path):
        d = tmp_path / "data"
        d.mkdir()
        (d / "a.csv").write_bytes(write_trace_csv(make_trace([(0.0, 1, 10)])))
        (d / "manifest.csv").write_text("path,label\na.csv,Wave\n")
        with pytest.raises(errors.UnknownLabel):
            load_dataset(d / "manifest.csv")

    def test_missing_trace_file(self, tmp_path):
        d = tmp_path / "data"
        d.mkdir()
        (d / "manifest.csv").write_text("path,label\nghost.csv,PressKey\n")
        with pytest.raises(errors.MissingFile):
            load_dataset(d / "manifest.csv")

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(errors.MissingFile):
            load_dataset(tmp_path / "nope.csv")

    def test_empty_manifest(self, tmp_path):
        d = tmp_path / "data"
        d.mkdir()
        (d / "manifest.csv").write_text("path,label\n")
        with pytest.raises(errors.EmptyDataset):
            load_dataset(d / "manifest.csv")

    def test_manifest_bad_header(self, tmp_path):
        d = tmp_path / "data"
        d.mkdir()
        (d / "manifest.csv").write_text("file,label\n")
        with pytest.raises(errors.MalformedHeader):
            load_dataset(d / "manifest.csv")

    def test_label_comes_from_manifest(self, tmp_path):
        d = tmp_path / "data"
        d.mkdir()
        (d / "a.csv").write_bytes(write_trace_csv(make_trace([(0.0, 1, 10)])))
        (d / "manifest.csv").write_text("path,label\na.csv,PourWater\n")
        ds = load_dataset(d / "manifest.csv")
        assert ds.traces[0].label is ActionLabel.POUR_WATER

    def test_read_trace_missing(self, tmp_path):
        with pytest.raises(errors.MissingFile):
            read_trace(tmp_path / "nothing.csv")
