import json

import numpy as np
import pytest

from factorfill.errors import DataValidationError
from factorfill.io import (
    CsvLayout,
    read_cov_binary,
    read_cov_csv,
    read_mask_csv,
    read_panel_csv,
    series_names,
    write_cov_binary,
    write_cov_csv,
    write_json_atomic,
    write_panel_csv,
)

_SAMPLE = """date,gdp,cpi,rate
2001Q1,1.25,0.50,NA
2001Q2,1.30,,2.0
2001Q3,-0.75,0.625,2.125
2001Q4,1e-3,0.875,2.25
"""


def _write(tmp_path, text, name="panel.csv"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


class TestReadPanel:
    def test_values_and_mask(self, tmp_path):
        panel, layout = read_panel_csv(_write(tmp_path, _SAMPLE))
        assert panel.T == 4 and panel.N == 3
        assert not panel.mask[0, 2] and not panel.mask[1, 1]
        assert panel.mask.sum() == 10
        assert panel.values[2, 1] == 0.625
        assert panel.values[3, 0] == 1e-3
        assert layout.index == ("2001Q1", "2001Q2", "2001Q3", "2001Q4")
        assert series_names(layout) == ("gdp", "cpi", "rate")

    def test_no_index_column_when_all_numeric(self, tmp_path):
        text = "a,b\n1,2\n3,4\n"
        panel, layout = read_panel_csv(_write(tmp_path, text))
        assert layout.index is None
        assert panel.N == 2
        assert series_names(layout) == ("a", "b")

    def test_blank_header_cell_forces_index(self, tmp_path):
        text = ",a,b\n0,1,2\n1,3,4\n"
        panel, layout = read_panel_csv(_write(tmp_path, text))
        assert layout.index == ("0", "1")
        assert panel.N == 2

    def test_custom_na_tokens(self, tmp_path):
        text = "a,b\n1,miss\n2,4\n"
        panel, _ = read_panel_csv(_write(tmp_path, text),
                                  na_tokens=("miss",))
        assert not panel.mask[0, 1]
        with pytest.raises(DataValidationError):
            read_panel_csv(_write(tmp_path, text, "q.csv"))

    def test_scientific_and_padded_tokens(self, tmp_path):
        text = "a,b\n 1.5E+2 , -3\n2,4\n"
        panel, layout = read_panel_csv(_write(tmp_path, text))
        assert panel.values[0, 0] == 150.0
        assert layout.tokens[0][0] == " 1.5E+2 "

    def test_bad_shapes(self, tmp_path):
        with pytest.raises(DataValidationError):
            read_panel_csv(_write(tmp_path, "a,b\n"))
        with pytest.raises(DataValidationError):
            read_panel_csv(_write(tmp_path, "a,b\n1,2\n3\n"))


class TestWritePanel:
    def test_observed_cells_echo_byte_exact(self, tmp_path):
        src = _write(tmp_path, _SAMPLE)
        panel, layout = read_panel_csv(src)
        filled = panel.filled(9.0)
        out = str(tmp_path / "out.csv")
        write_panel_csv(out, filled, layout, echo_mask=panel.mask)
        lines = open(out).read().splitlines()
        srcs = _SAMPLE.splitlines()
        assert lines[0] == srcs[0]
        for t, (got, want) in enumerate(zip(lines[1:], srcs[1:])):
            gtoks, wtoks = got.split(","), want.split(",")
            assert gtoks[0] == wtoks[0]
            for i in range(3):
                if panel.mask[t, i]:
                    # observed tokens byte-identical, "1.30" stays "1.30"
                    assert gtoks[i + 1] == wtoks[i + 1]
                else:
                    assert gtoks[i + 1] == "9.0"

    def test_round_trip_without_echo(self, tmp_path):
        src = _write(tmp_path, _SAMPLE)
        panel, layout = read_panel_csv(src)
        out = str(tmp_path / "rt.csv")
        write_panel_csv(out, panel.values, layout)
        back, _ = read_panel_csv(out)
        assert np.array_equal(back.mask, panel.mask)
        assert np.allclose(back.values[panel.mask], panel.values[panel.mask])

    def test_full_echo_reproduces_data_rows(self, tmp_path):
        src = _write(tmp_path, _SAMPLE)
        panel, layout = read_panel_csv(src)
        out = str(tmp_path / "echo.csv")
        write_panel_csv(out, panel.filled(0.0), layout,
                        echo_mask=np.ones_like(panel.mask))
        assert open(out).read() == _SAMPLE

    def test_shape_mismatch(self, tmp_path):
        panel, layout = read_panel_csv(_write(tmp_path, _SAMPLE))
        with pytest.raises(DataValidationError):
            write_panel_csv(str(tmp_path / "x.csv"), np.ones((2, 2)), layout)

    def test_custom_na_token_for_retained_missing(self, tmp_path):
        layout = CsvLayout(header=("a", "b"), index=None,
                           tokens=(("1", "2"), ("3", "4")),
                           na_tokens=("",))
        vals = np.array([[1.0, np.nan], [3.0, 4.0]])
        out = str(tmp_path / "na.csv")
        write_panel_csv(out, vals, layout, na_token="")
        assert open(out).read() == "a,b\n1.0,\n3.0,4.0\n"


class TestMask:
    def test_round_trip(self, tmp_path):
        p = tmp_path / "mask.csv"
        p.write_text("1,0,1\n0,1,1\n")
        mask = read_mask_csv(str(p))
        assert mask.dtype == bool
        assert np.array_equal(mask, [[True, False, True],
                                     [False, True, True]])

    def test_rejects_non_binary(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("1,2\n0,1\n")
        with pytest.raises(DataValidationError):
            read_mask_csv(str(p))
        p.write_text("1,x\n")
        with pytest.raises(DataValidationError):
            read_mask_csv(str(p))
        p.write_text("")
        with pytest.raises(DataValidationError):
            read_mask_csv(str(p))


class TestCov:
    def test_csv_round_trip_exact(self, tmp_path, rng):
        M = rng.standard_normal((4, 4))
        M = M @ M.T
        path = str(tmp_path / "cov.csv")
        write_cov_csv(path, M, names=["w", "x", "y", "z"])
        back, names = read_cov_csv(path)
        assert names == ("w", "x", "y", "z")
        assert np.array_equal(back, M)  # repr round-trips float64 exactly

    def test_csv_default_names_and_validation(self, tmp_path):
        path = str(tmp_path / "c.csv")
        write_cov_csv(path, np.eye(2))
        _, names = read_cov_csv(path)
        assert names == ("s0", "s1")
        with pytest.raises(DataValidationError):
            write_cov_csv(path, np.eye(2), names=["only"])
        (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
        with pytest.raises(DataValidationError):
            read_cov_csv(str(tmp_path / "bad.csv"))

    def test_binary_round_trip_bitwise(self, tmp_path, rng):
        M = rng.standard_normal((5, 5))
        path = str(tmp_path / "cov.bin")
        write_cov_binary(path, M)
        back = read_cov_binary(path)
        assert back.dtype == np.float64
        assert np.array_equal(back, M)

    def test_binary_header_layout(self, tmp_path):
        path = str(tmp_path / "h.bin")
        write_cov_binary(path, np.eye(3))
        blob = open(path, "rb").read()
        assert blob[:8] == b"FFCOVBIN"
        assert len(blob) == 16 + 9 * 8

    def test_binary_rejects_corruption(self, tmp_path):
        path = str(tmp_path / "c.bin")
        write_cov_binary(path, np.eye(2))
        blob = open(path, "rb").read()
        trunc = tmp_path / "t.bin"
        trunc.write_bytes(blob[:-8])
        with pytest.raises(DataValidationError):
            read_cov_binary(str(trunc))
        wrong = tmp_path / "w.bin"
        wrong.write_bytes(b"NOTMAGIC" + blob[8:])
        with pytest.raises(DataValidationError):
            read_cov_binary(str(wrong))
        with pytest.raises(DataValidationError):
            write_cov_binary(str(path), np.ones((2, 3)))


class TestJson:
    def test_atomic_json_round_trip(self, tmp_path):
        path = str(tmp_path / "r.json")
        obj = {"b": [1, 2.5], "a": {"k": "v"}}
        write_json_atomic(path, obj)
        text = open(path).read()
        assert json.loads(text) == obj
        assert text.index('"a"') < text.index('"b"')  # sorted keys
        assert text.endswith("\n")

    def test_rejects_nan(self, tmp_path):
        with pytest.raises(ValueError):
            write_json_atomic(str(tmp_path / "bad.json"), {"x": float("nan")})

    def test_no_temp_files_left(self, tmp_path):
        write_json_atomic(str(tmp_path / "a.json"), {"ok": 1})
        leftovers = [p for p in tmp_path.iterdir()
                     if p.name.startswith(".tmp-")]
        assert leftovers == []
