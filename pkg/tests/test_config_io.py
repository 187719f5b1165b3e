import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from he2coherence import __version__
from he2coherence.config import ConfigError, ConfigParseError, RunConfig, default_config_path, load_config
from he2coherence.io import (
    CSVParseError,
    provenance,
    read_csv,
    read_peaks,
    read_report,
    read_trace,
    write_csv,
    write_peaks,
    write_report,
    write_trace,
)
from he2coherence.signal import LDTrace, SpectralPeak


def test_shipped_file_equals_builtin_defaults():
    assert load_config(default_config_path()).digest() == RunConfig().digest()


def test_digest_tracks_content():
    a, b = RunConfig(), RunConfig()
    assert a.digest() == b.digest()
    b.set("bath.sigma_A2", "0.03")
    assert a.digest() != b.digest()


@pytest.mark.parametrize(
    "text,match",
    [
        ("[basis]\nfoo = 1\n", "unknown key 'foo' in \\[basis\\]"),
        ("[nope]\nx = 1\n", "unknown section"),
        ("[basis]\nn_max = 2.5\n", "n_max expects an integer"),
        ("[bath]\nsigma_A2 = -1.0\n", "sigma_A2 must be positive"),
        ("[signal]\nline_weights = []\n", "line_weights is empty"),
        ("[bath]\ntable = 'missing.csv'\n", "does not exist"),
        ("[basis]\nn_max = 10\n", "odd n_max"),
        ("[molecule]\nB_thz = [0.2, 0.3]\nD_thz = [0.0, 0.0]\n", "decrease"),
    ],
)
def test_invalid_configs_name_file_and_key(tmp_path, text, match):
    p = tmp_path / "c.toml"
    p.write_text(text)
    with pytest.raises(ConfigError, match=match) as exc:
        load_config(p)
    assert str(p) in str(exc.value)


def test_toml_syntax_error_is_a_parse_error(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("[basis\n")
    with pytest.raises(ConfigParseError):
        load_config(p)


def test_relative_table_path_resolved(tmp_path):
    import shutil

    from he2coherence import bath

    src = bath.resources.files("he2coherence") / "data/he_ii_svp.csv"
    shutil.copy(str(src), tmp_path / "t.csv")
    p = tmp_path / "c.toml"
    p.write_text("[bath]\ntable = 't.csv'\n")
    cfg = load_config(p)
    assert cfg.bath_table().violations() == []


def test_set_override_parses_toml_values():
    cfg = RunConfig()
    cfg.set("pulse.energies_uJ", "[1, 2]")
    assert cfg.pulse.energies_uJ == [1.0, 2.0]
    cfg.set("bath.variant", "integrated")
    assert cfg.bath.variant == "integrated"
    with pytest.raises(ConfigError):
        cfg.set("bath.variant", "cubic")
    with pytest.raises(ConfigError):
        cfg.set("novalue", "1")


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.lists(st.tuples(finite, finite, st.text("abcXYZ_0189", max_size=8)), max_size=20))
@settings(max_examples=60, deadline=None)
def test_csv_round_trip_lossless(rows):
    import tempfile
    from pathlib import Path

    with tempfile.TemporaryDirectory() as d:
        p = write_csv(Path(d) / "x.csv", ("a", "b", "label"), rows, provenance("abc", 3))
        meta, header, cols = read_csv(p, numeric=("a", "b"))
    assert header == ("a", "b", "label")
    assert meta["seed"] == "3" and meta["config_sha256"] == "abc"
    assert list(cols["a"]) == [r[0] for r in rows]
    assert list(cols["b"]) == [r[1] for r in rows]
    assert cols["label"] == [r[2] for r in rows]


def test_trace_and_peaks_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    tr = LDTrace(np.arange(100) * 0.05, rng.normal(size=100))
    back = read_trace(write_trace(tmp_path / "t.csv", tr, provenance("d", 1)))
    assert np.array_equal(back.times, tr.times) and np.array_equal(back.values, tr.values)
    assert back.meta["tool"] == f"he2coherence {__version__}"
    peaks = [SpectralPeak(2.2707, 0.41, "LD13_v0"), SpectralPeak(4.08, 0.02, "")]
    assert read_peaks(write_peaks(tmp_path / "p.csv", peaks)) == peaks


def test_report_round_trip(tmp_path):
    items = {"a": 1.5, "nested": {"b": True, "c": [1.0, 2.0]}, "s": "text"}
    back = read_report(write_report(tmp_path / "r.txt", items, {"seed": "0"}))
    assert back == {"a": "1.5", "nested.b": "true", "nested.c": "1.0, 2.0", "s": "text"}


@pytest.mark.parametrize(
    "body,match",
    [
        ("t_ps,ld\n0,1\n0.05,x\n", ":3: column 'ld'"),
        ("t_ps,ld\n0,1\n0.05\n", ":3: expected 2 fields"),
        ("time,ld\n0,1\n", ":1: header"),
        ("# only comments\n", "missing header"),
    ],
)
def test_malformed_csv_line_numbers(tmp_path, body, match):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(CSVParseError, match=match):
        read_trace(p)


def test_nonuniform_trace_file_rejected(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("t_ps,ld\n0,1\n1,2\n3,1\n")
    with pytest.raises(CSVParseError, match="uniform"):
        read_trace(p)
