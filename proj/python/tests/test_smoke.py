import math
import random

import pytest

import fone


def test_circular_embed_on_unit_circle():
    c, s = fone.circular_embed(3.0, 10.0)
    assert c == pytest.approx(math.cos(2 * math.pi * 0.3))
    assert s == pytest.approx(math.sin(2 * math.pi * 0.3))


def test_encode_recover_roundtrip():
    rng = random.Random(4)
    for _ in range(2000):
        x = f"{rng.randrange(10**6)}.{rng.randrange(1000):03d}"
        v = fone.fone_encode(x, 6, 3)
        assert len(v) == 18
        assert fone.recover_digits(v, 6, 3) == x


def test_zero_pad_keeps_prefix():
    raw = fone.fone_encode("4.17", 1, 2)
    padded = fone.fone_encode("4.17", 1, 2, dim=16)
    assert padded[:6] == raw
    assert padded[6:] == [0.0] * 10


def test_anchor_head_predicts_its_label():
    h = fone.anchor_encode([5, 0, 2], 3, 0)
    assert fone.final_predict(h, 3, 0) == "502"
    scaled = [100 * x for x in h]
    assert fone.final_loss(scaled, "502", 3, 0) < 1e-6


def test_chunked_long_numbers():
    digits = "".join(random.Random(9).choice("0123456789") for _ in range(60)).lstrip("0")
    v = fone.chunk_encode(digits)
    assert len(v) == 120
    assert fone.chunk_decode(v) == digits


def test_generate_matches_python_arithmetic():
    for line in fone.generate("int-mul-3", 200, seed=1):
        lhs, answer = line.split("=")
        a, b = lhs.split("*")
        assert int(a) * int(b) == int(answer)


def test_token_counts():
    assert fone.numeric_token_count("fone", "99980001") == 1
    assert fone.numeric_token_count("digitwise", "99980001") == 8
    assert fone.numeric_token_count("subword", "99980001") == 3


def test_metrics():
    assert fone.r_squared([1, 2, 3, 4], [1, 2, 3, 4]) == 1.0
    assert fone.r_squared([1, 2, 3, 4], [2.5] * 4) == 0.0
    assert fone.exact_match(["1", "2"], ["1", "3"]) == 0.5


def test_errors_carry_a_kind():
    with pytest.raises(fone.FoneError) as info:
        fone.fone_encode("-3", 2, 0)
    assert info.value.kind == "unsupported-sign"
    with pytest.raises(fone.FoneError) as info:
        fone.train(bogus=1)
    assert info.value.kind == "config-error"


def test_tiny_training_run():
    summary = fone.train(task="int-add-1", train_size=40, val_size=5, test_size=10, epochs=2, batch_size=16, seed=3)
    assert summary["failure"] == ""
    assert summary["epochs_run"] == 2
    assert len(summary["history"]) == 2
    assert summary["test"]["count"] == 10
    assert 0.0 <= summary["test"]["exact_match"] <= 1.0
