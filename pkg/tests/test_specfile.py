import numpy as np
import pytest

from tensegrity_shape.model import builtin_prism, validate_spec
from tensegrity_shape.specfile import SpecFileError, dump_spec, load_spec, save_spec, spec_from_dict


def test_builtin_round_trip(tmp_path):
    spec = builtin_prism()
    path = tmp_path / "prism.yaml"
    save_spec(spec, path)
    back = load_spec(path)
    assert back == spec


def test_taut_builtin_round_trip(tmp_path):
    spec = load_spec("builtin:prism-taut")
    assert spec.has_rest_lengths
    path = tmp_path / "taut.yaml"
    save_spec(spec, path)
    np.testing.assert_array_equal(load_spec(path).rest_lengths, spec.rest_lengths)


def test_short_keys_written():
    text = dump_spec(builtin_prism())
    assert "b0:" in text and "stiffness" not in text


def test_json_and_long_names(tmp_path):
    path = tmp_path / "s.json"
    path.write_text('{"strut_lengths": [1.0], "cables": [{"node_a": 0, "node_b": 1, "stiffness": 5, "rest_length": 0.5}]}')
    spec = load_spec(path)
    assert spec.cables[0].rest_length == 0.5 and spec.cables[0].stiffness == 5.0


def test_rest_length_defaults_to_zero():
    spec = spec_from_dict({"strut_lengths": [1.0], "cables": [{"a": 0, "b": 1, "k": 1.0}]})
    assert spec.cables[0].rest_length == 0.0


@pytest.mark.parametrize("data", [
    [1, 2],
    {"cables": []},
    {"strut_lengths": [1.0], "cables": [{"a": 0, "b": 1}]},
    {"strut_lengths": [1.0], "cables": [{"a": 0, "b": 1, "k": 1, "colour": "red"}]},
    {"strut_lengths": ["x"]},
    {"strut_lengths": [1.0], "cables": ["0 1"]},
])
def test_malformed(data):
    with pytest.raises(SpecFileError):
        spec_from_dict(data)


def test_missing_file_and_bad_yaml(tmp_path):
    with pytest.raises(SpecFileError):
        load_spec(tmp_path / "none.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("strut_lengths: [1, 2\n")
    with pytest.raises(SpecFileError):
        load_spec(bad)


def test_loaded_spec_is_not_validated(tmp_path):
    path = tmp_path / "s.yaml"
    path.write_text("strut_lengths: [1.0]\ncables: [{a: 0, b: 7, k: 1}]\n")
    assert validate_spec(load_spec(path))
