from dataclasses import replace

import numpy as np
import pytest

from conftest import REFERENCE_CAVITY, noisy_sweep
from opasqueeze.dataio import (
    dataset_to_csv,
    mw_text_to_w,
    parse_dataset_csv,
    read_dataset_csv,
    read_power_trace,
    rows_to_csv,
    w_to_mw_text,
    write_dataset_csv,
)
from opasqueeze.errors import InputError
from opasqueeze.quadrature import CavityConstants

HEADER = "pump_mW,sigma_pump_mW,frequency_Hz,quadrature,value_dB,sigma_dB\n"
CAVITY_LINES = "# cavity.T = 0.1\n# cavity.L = 0.001\n# cavity.round_trip_length_m = 0.0798\n"


def test_mw_conversion_is_exact():
    for w in (0.006, 0.180, 0.1234567890123, 1e-9, 2.2e-1, 0.0):
        assert mw_text_to_w(w_to_mw_text(w)) == w
    assert w_to_mw_text(0.180) == "180"
    assert w_to_mw_text(0.0054) == "5.4"


def test_dataset_round_trip_is_exact(tmp_path):
    ds = noisy_sweep(12)
    path = tmp_path / "sweep.csv"
    write_dataset_csv(ds, path, {"note": "test"})
    back = read_dataset_csv(path)
    assert back.points == ds.points
    assert back.cavity == ds.cavity
    assert back.metadata["note"] == "test"
    assert dataset_to_csv(back) == dataset_to_csv(replace(ds, metadata=back.metadata))


def test_config_cavity_overrides_header():
    other = CavityConstants(0.05, 0.002, 0.1)
    ds = parse_dataset_csv(dataset_to_csv(noisy_sweep(1)), cavity=other)
    assert ds.cavity == other


def test_missing_column_is_named():
    text = CAVITY_LINES + HEADER.replace(",sigma_dB", "") + "180,5.4,5e6,sqz,-12.4\n"
    with pytest.raises(InputError) as info:
        parse_dataset_csv(text)
    assert "sigma_dB" in str(info.value)
    assert info.value.field == "sigma_dB"


@pytest.mark.parametrize("bad_row", [
    "180,5.4,5e6,sqz,-12.4,abc",
    "180,5.4,5e6,rotated,-12.4,0.3",
    "180,5.4,5e6,sqz,-12.4",
    "180,5.4,5e6,sqz,-12.4,0",
    "-1,5.4,5e6,sqz,-12.4,0.3",
])
def test_bad_row_reports_line_number(bad_row):
    text = CAVITY_LINES + HEADER + "56,1.68,5e6,sqz,-8.0,0.3\n" + bad_row + "\n"
    with pytest.raises(InputError) as info:
        parse_dataset_csv(text, source="data.csv")
    assert info.value.line == 6
    assert "data.csv:6" in str(info.value)


def test_missing_cavity_constants():
    with pytest.raises(InputError):
        parse_dataset_csv(HEADER + "56,1.68,5e6,sqz,-8.0,0.3\n")
    ds = parse_dataset_csv(HEADER + "56,1.68,5e6,sqz,-8.0,0.3\n", cavity=REFERENCE_CAVITY)
    assert ds.points[0].pump_power == 0.056


def test_rows_to_csv_cells():
    text = rows_to_csv(("a", "b", "c", "d"), [(1, 0.1, True, "x")], {"k": "v"})
    assert text == "# k = v\na,b,c,d\n1,0.1,true,x\n"


def test_read_power_trace(tmp_path):
    p = tmp_path / "t.csv"
    p.write_text("# comment\nfrequency_Hz,power_dB\n1500,-10\n2000,0\n")
    name, xs, ps = read_power_trace(p)
    assert name == "frequency_Hz"
    assert xs == ["1500", "2000"]
    np.testing.assert_allclose(ps, [0.1, 1.0])
    q = tmp_path / "q.csv"
    q.write_text("time_s,level\n0,1\n")
    with pytest.raises(InputError):
        read_power_trace(q)
