import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from discover.core import (
    Construction,
    InvariantViolation,
    Kind,
    MalformedInput,
    RunConfig,
    StepLog,
    decode_construction,
    encode_construction,
    read_jsonl,
    write_jsonl,
)

finite_nonneg = st.floats(min_value=0.0, max_value=1e300, allow_nan=False, allow_infinity=False)
finite = st.floats(allow_nan=False, allow_infinity=False)


def test_step_function_round_trip():
    c = Construction.step_function([0.5, 0.5])
    assert decode_construction(encode_construction(c)).heights == (0.5, 0.5)


def test_circle_round_trip():
    c = Construction.circle_packing([(0.5, 0.5, 0.5)])
    assert decode_construction(encode_construction(c)) == c


def test_encode_rejects_nan():
    bad = object.__new__(Construction)
    object.__setattr__(bad, "kind", Kind.STEP_FUNCTION)
    object.__setattr__(bad, "heights", (0.1, math.nan))
    object.__setattr__(bad, "circles", ())
    with pytest.raises(InvariantViolation):
        encode_construction(bad)


def test_constructor_rejects_nan():
    with pytest.raises(InvariantViolation):
        Construction.step_function([0.1, math.nan])


def test_decode_plain_array():
    assert decode_construction(b"[1.0]") == Construction.step_function([1.0])


def test_decode_negative_height():
    with pytest.raises(InvariantViolation, match="invariant violation"):
        decode_construction(b'{"kind": "step_function", "heights": [1.0, -0.5]}')


def test_decode_empty():
    with pytest.raises(InvariantViolation, match="non-empty required"):
        decode_construction(b"[]")


@pytest.mark.parametrize("text", [b"", b"{", b'{"kind": "nope"}', b'["a"]', b"[NaN]",
                                  b'{"kind": "circle_packing", "circles": [[1, 2]]}', b"\xff\xfe"])
def test_decode_malformed(text):
    with pytest.raises((MalformedInput, InvariantViolation)):
        decode_construction(text)


def test_encoding_is_text_with_17_digits():
    text = encode_construction(Construction.step_function([0.1])).decode()
    assert "0.10000000000000001" in text


@given(st.lists(finite_nonneg, min_size=1, max_size=50))
def test_round_trip_step_function_bit_exact(hs):
    c = Construction.step_function(hs)
    back = decode_construction(encode_construction(c))
    assert [h.hex() for h in back.heights] == [h.hex() for h in c.heights]


@given(st.lists(st.tuples(finite, finite, finite_nonneg), max_size=20))
def test_round_trip_circles_bit_exact(cs):
    c = Construction.circle_packing(cs)
    assert decode_construction(encode_construction(c)) == c


def test_run_config_invariants():
    with pytest.raises(InvariantViolation):
        RunConfig(rollouts_per_group=1)
    with pytest.raises(InvariantViolation):
        RunConfig(steps=0)
    with pytest.raises(InvariantViolation):
        RunConfig(beta_max=0)
    cfg = RunConfig(env="erdos", reuse_mode="none")
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_step_log_jsonl(tmp_path):
    logs = [StepLog(0, [0.1, 0.2], 0.2, 5.0, [1.0], [0]), StepLog(1, [0.3], 0.3, math.inf, [2.0], [1, 2])]
    path = tmp_path / "log.jsonl"
    write_jsonl(path, logs)
    assert read_jsonl(path) == logs
    import json
    keys = set(json.loads(path.read_text().splitlines()[0]))
    assert keys == {"step_index", "rewards", "best_reward_so_far", "best_bound_so_far", "betas", "selected_node_ids"}
