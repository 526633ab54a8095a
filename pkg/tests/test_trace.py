"""Trace data model and JSONL serialization."""

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csi_dielectric import (
    CsiFrame,
    DielectricProperties,
    SubcarrierGrid,
    Trace,
    TraceFormatError,
    parse_trace,
    validate_trace,
    write_trace,
)

GRID = SubcarrierGrid()
N_SC = GRID.n_subcarriers


def make_frame(t=0.0, n_sc=N_SC, rssi_a=40.0, seed=0):
    rng = np.random.default_rng(seed)
    return CsiFrame(
        t=t,
        agc=30.0,
        csi_a=rng.normal(size=n_sc) + 1j * rng.normal(size=n_sc),
        csi_b=rng.normal(size=n_sc) + 1j * rng.normal(size=n_sc),
        rssi_a=rssi_a,
    )


def make_trace(frames=None, d_m=0.002):
    if frames is None:
        frames = [make_frame(t=0.05 * i, seed=i) for i in range(3)]
    return Trace(grid=GRID, d_m=d_m, material_label="demo", frames=tuple(frames))


class TestGrid:
    def test_default_grid_layout(self):
        assert N_SC == 30
        assert GRID.subcarrier_indices[0] == -28
        assert GRID.subcarrier_indices[-1] == 28
        # position 16 is index +1, one spacing above the center frequency
        assert GRID.subcarrier_indices[15] == 1
        assert GRID.frequency(16) == pytest.approx(5.32e9 + 312.5e3)
        assert GRID.frequency(1) == pytest.approx(5.32e9 - 8.75e6)

    def test_position_bounds(self):
        with pytest.raises(IndexError):
            GRID.frequency(0)
        with pytest.raises(IndexError):
            GRID.frequency(31)

    def test_grid_invariants(self):
        with pytest.raises(TraceFormatError):
            SubcarrierGrid(spacing_hz=0.0)
        with pytest.raises(TraceFormatError):
            SubcarrierGrid(subcarrier_indices=(1, 1, 2))
        with pytest.raises(TraceFormatError):
            SubcarrierGrid(subcarrier_indices=(-40, 0, 40))  # outside the band


class TestDielectricProperties:
    def test_accepts_physical_media(self):
        DielectricProperties(73.38, 6.41)
        DielectricProperties(1.0, 0.0)

    def test_sub_unity_eps_warns(self):
        with pytest.warns(UserWarning, match="non-physical"):
            DielectricProperties(0.5, 0.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            DielectricProperties(0.0, 1.0)
        with pytest.raises(ValueError):
            DielectricProperties(10.0, -0.1)


class TestValidate:
    def test_valid_trace_has_no_violations(self):
        assert validate_trace(make_trace()) == []

    def test_decreasing_timestamps(self):
        frames = [make_frame(t=1.0), make_frame(t=0.5)]
        problems = validate_trace(make_trace(frames=frames))
        assert any("t decreases" in p for p in problems)

    def test_zero_thickness(self):
        problems = validate_trace(make_trace(d_m=0.0))
        assert problems == ["d_m must be > 0"]

    def test_csi_length_mismatch(self):
        frames = [make_frame(n_sc=29)]
        problems = validate_trace(make_trace(frames=frames))
        assert any("length mismatch" in p for p in problems)

    def test_missing_rssi(self):
        frames = [make_frame(rssi_a=None)]
        problems = validate_trace(make_trace(frames=frames))
        assert any("no RSSI port" in p for p in problems)


class TestSerialization:
    def test_minimal_roundtrip(self):
        trace = make_trace(frames=[make_frame()])
        again = parse_trace(write_trace(trace))
        assert len(again.frames) == 1
        assert again.material_label == "demo"

    def test_header_plus_frame_line_count(self):
        data = write_trace(make_trace()).decode()
        lines = data.strip().split("\n")
        assert len(lines) == 1 + 3
        header = json.loads(lines[0])
        assert header["version"] == 1
        assert header["subcarrier_indices"] == list(GRID.subcarrier_indices)

    def test_short_csi_rejected(self):
        trace = make_trace(frames=[make_frame(n_sc=29)])
        with pytest.raises(TraceFormatError, match="length mismatch"):
            write_trace(trace)
        with pytest.raises(TraceFormatError, match="length mismatch"):
            parse_trace(_corrupt_csi_length())

    def test_nan_csi_rejected(self):
        frame = make_frame()
        bad = CsiFrame(
            t=0.0, agc=30.0, rssi_a=40.0,
            csi_a=frame.csi_a,
            csi_b=np.concatenate([frame.csi_b[:-1], [complex(math.nan, 0.0)]]),
        )
        with pytest.raises(TraceFormatError, match="non-finite"):
            write_trace(make_trace(frames=[bad]))

    def test_empty_frames_rejected(self):
        with pytest.raises(TraceFormatError, match="non-empty"):
            write_trace(make_trace(frames=[]))

    def test_missing_header(self):
        with pytest.raises(TraceFormatError, match="header"):
            parse_trace(b"")

    def test_malformed_line_reports_number(self):
        data = write_trace(make_trace()).decode().splitlines()
        data[2] = "{broken json"
        with pytest.raises(TraceFormatError, match="line 3"):
            parse_trace("\n".join(data))

    def test_absent_rssi_ports_roundtrip(self):
        frame = make_frame()
        rec = json.loads(write_trace(make_trace(frames=[frame])).decode().splitlines()[1])
        assert "rssi_b" not in rec and "rssi_c" not in rec
        again = parse_trace(write_trace(make_trace(frames=[frame])))
        assert again.frames[0].rssi_b is None


def _corrupt_csi_length() -> str:
    trace = make_trace(frames=[make_frame()])
    lines = write_trace(trace).decode().splitlines()
    rec = json.loads(lines[1])
    rec["csi_b"] = rec["csi_b"][:-1]
    lines[1] = json.dumps(rec)
    return "\n".join(lines)


finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)


@st.composite
def traces(draw):
    n_frames = draw(st.integers(1, 4))
    frames = []
    t = 0.0
    for i in range(n_frames):
        t += draw(st.floats(0.0, 1.0))
        re_a = draw(st.lists(finite, min_size=N_SC, max_size=N_SC))
        im_a = draw(st.lists(finite, min_size=N_SC, max_size=N_SC))
        re_b = draw(st.lists(finite, min_size=N_SC, max_size=N_SC))
        im_b = draw(st.lists(finite, min_size=N_SC, max_size=N_SC))
        frames.append(
            CsiFrame(
                t=t,
                agc=draw(finite),
                csi_a=np.array(re_a) + 1j * np.array(im_a),
                csi_b=np.array(re_b) + 1j * np.array(im_b),
                rssi_a=draw(finite),
                rssi_b=draw(st.none() | finite),
            )
        )
    return Trace(
        grid=GRID,
        d_m=draw(st.floats(1e-4, 0.1)),
        material_label=draw(st.text(alphabet=st.characters(codec="ascii", exclude_characters="\n\r"), max_size=12)),
        frames=tuple(frames),
    )


class TestRoundtripProperty:
    @settings(max_examples=60, deadline=None)
    @given(traces())
    def test_write_then_parse_is_identity(self, trace):
        again = parse_trace(write_trace(trace))
        assert again.grid == trace.grid
        assert again.d_m == trace.d_m
        assert again.material_label == trace.material_label
        assert again.packet_interval_s == trace.packet_interval_s
        assert len(again.frames) == len(trace.frames)
        for f1, f2 in zip(trace.frames, again.frames):
            assert f1.t == f2.t and f1.agc == f2.agc
            assert f1.rssi_ports == f2.rssi_ports
            assert np.array_equal(f1.csi_a, f2.csi_a)
            assert np.array_equal(f1.csi_b, f2.csi_b)

    @settings(max_examples=30, deadline=None)
    @given(traces())
    def test_serialization_deterministic(self, trace):
        assert write_trace(trace) == write_trace(trace)
