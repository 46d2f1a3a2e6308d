import numpy as np
import pytest

from tierflow.checkpoint import (
    dumps,
    format_float,
    load_network,
    network_from_dict,
    network_to_dict,
    save_network,
)
from tierflow.engine import init_network
from tierflow.errors import DataError
from tierflow.rng import RngStream


def test_format_float_round_trips_exactly():
    for x in (1 / 3, 0.1, 2**-40, 1e300, -7.25, 0.0):
        assert float(format_float(x)) == x
        # idempotent rendering: parse then re-render gives the same string
        assert format_float(float(format_float(x))) == format_float(x)


def test_network_round_trip_exact(tmp_path):
    net = init_network([5, 3, 1], 4, rng=RngStream(17))
    path = tmp_path / "net.json"
    save_network(net, path)
    loaded = load_network(path)
    assert loaded.input_dim == net.input_dim
    for a, b in zip(net.layers, loaded.layers):
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.biases, b.biases)
        assert a.activation == b.activation


def test_write_read_write_byte_identical(tmp_path):
    net = init_network([6, 2], 3, rng=RngStream(8))
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    save_network(net, first)
    save_network(load_network(first), second)
    assert first.read_bytes() == second.read_bytes()


def test_malformed_checkpoints_rejected():
    doc = network_to_dict(init_network([2, 1], 2, rng=RngStream(0)))
    bad_act = {**doc, "layers": [{**doc["layers"][0], "activation": "tanh"}]}
    with pytest.raises(DataError):
        network_from_dict(bad_act)
    bad_count = {**doc, "layers": [{**doc["layers"][0], "weights": [1.0, 2.0, 3.0]}]}
    with pytest.raises(DataError):
        network_from_dict(bad_count)
    with pytest.raises(DataError):
        network_from_dict({"layers": []})


def test_load_rejects_invalid_json(tmp_path):
    path = tmp_path / "borked.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(DataError):
        load_network(path)


def test_dumps_matches_stdlib_structure():
    import json

    doc = {"a": 1, "b": [0.5, "x", None, True], "c": {"d": -2}}
    assert json.loads(dumps(doc)) == doc
