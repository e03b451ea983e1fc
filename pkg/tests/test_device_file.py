import json
from pathlib import Path

import numpy as np
import pytest

from src.device_file import (
    DeviceFile,
    device_file_from_devices,
    emit_device_file,
    load_device_data,
    parse_device_file,
    to_array,
)
from src.errors import DeviceFileSyntaxError, NotPsd, SchemaError
from src.probability_engine import joint, retrodictive
from utils.config import DirPath
from utils.yaml_handler import YamlHandler

BASE = DirPath().base_dir
SHIPPED = sorted((BASE / "docs" / "devices").glob("*.json"))
CHECK_DEVICES = BASE / "test_data" / "checks" / "devices"


def _minimal(**overrides):
    data = {
        "format_version": 1,
        "dimension": 2,
        "preparation": {"1": [[1.0, 0.0], [0.0, 1.0]]},
        "measurement": {"1": [[1.0, 0.0], [0.0, 1.0]]},
    }
    data.update(overrides)
    return data


@pytest.mark.parametrize("path", SHIPPED, ids=lambda p: p.stem)
def test_shipped_files_parse_and_reemit(path, tmp_path):
    df = parse_device_file(path)
    prep, meas = df.devices()
    assert prep.dim == meas.dim == df.dimension
    again = tmp_path / path.name
    again.write_text(emit_device_file(df), encoding="utf-8")
    reparsed = parse_device_file(again)
    assert emit_device_file(reparsed) == emit_device_file(df)
    assert np.array_equal(joint(*reparsed.devices()).p, joint(prep, meas).p)


def test_complex_entries():
    assert to_array([[0.0, (0.0, -1.0)], [(0.0, 1.0), 0.0]]).tolist() == [[0, -1j], [1j, 0]]


def test_evolution_section():
    df = parse_device_file(BASE / "docs" / "devices" / "spin_half.json")
    ctx = df.evolution_context()
    assert (ctx.t_p, ctx.t_m) == (0.0, 1.0)
    assert df.belinfante() is None


def test_scenario_only_file_derives_devices():
    df = parse_device_file(BASE / "docs" / "devices" / "belinfante_d3.json")
    assert df.preparation is None and df.measurement is None
    prep, meas = df.devices()
    table = retrodictive(joint(prep, meas))
    assert table.row("1") == pytest.approx([0.2, 0.48, 0.32], abs=1e-12)


def test_unknown_key_is_rejected_in_strict_mode():
    with pytest.raises(SchemaError) as e:
        parse_device_file(CHECK_DEVICES / "unknown_key.json", lenient=False)
    assert e.value.field == "comment"
    assert e.value.exit_code == 4


def test_unknown_key_is_dropped_in_lenient_mode():
    df = parse_device_file(CHECK_DEVICES / "unknown_key.json", lenient=True)
    assert "comment" not in df.model_dump()
    nested = load_device_data(
        _minimal(evolution={"matrix": [[1, 0], [0, 1]], "note": "x"}), lenient=True
    )
    assert nested.evolution.t_m == 0.0


def test_syntax_error_has_position():
    with pytest.raises(DeviceFileSyntaxError) as e:
        parse_device_file(CHECK_DEVICES / "broken_syntax.json")
    assert e.value.line is not None and e.value.line >= 4
    assert e.value.column is not None
    assert e.value.exit_code == 3


def test_missing_file():
    with pytest.raises(DeviceFileSyntaxError) as e:
        parse_device_file(CHECK_DEVICES / "does_not_exist.json")
    assert e.value.line is None


@pytest.mark.parametrize(
    "data, field",
    [
        (_minimal(format_version=2), "format_version"),
        (_minimal(dimension=0), "dimension"),
        (_minimal(dimension=65), "dimension"),
        (_minimal(preparation={"1": [[1.0, 0.0]]}), "<root>"),
        (_minimal(measurement={"1": [["a", 0.0], [0.0, 1.0]]}), "measurement.1.0.0"),
        ({"format_version": 1, "dimension": 2, "preparation": {"1": [[1, 0], [0, 1]]}}, "<root>"),
        ([1, 2, 3], "<root>"),
    ],
)
def test_schema_errors(data, field):
    with pytest.raises(SchemaError) as e:
        load_device_data(data, lenient=False)
    assert e.value.field.startswith(field.split(".")[0])


def test_validation_happens_when_devices_are_built():
    df = parse_device_file(CHECK_DEVICES / "not_psd.json")
    with pytest.raises(NotPsd) as e:
        df.devices()
    assert e.value.exit_code == 5


def test_integer_labels_become_strings():
    text = json.dumps(_minimal())
    df = load_device_data(YamlHandler().load_text(text.replace('"1"', "1")), lenient=False)
    assert list(df.preparation) == ["1"]


def test_device_file_from_devices(biased_pair):
    df = device_file_from_devices(*biased_pair)
    assert isinstance(df, DeviceFile)
    prep, meas = df.devices()
    assert np.allclose(joint(prep, meas).p, joint(*biased_pair).p, atol=1e-15)
    emitted = json.loads(emit_device_file(df))
    assert list(emitted) == ["format_version", "dimension", "preparation", "measurement"]


def test_emit_is_stable(tmp_path: Path):
    df = load_device_data(_minimal(), lenient=False)
    assert emit_device_file(df) == emit_device_file(load_device_data(json.loads(emit_device_file(df))))
