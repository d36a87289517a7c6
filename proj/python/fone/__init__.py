"""Fourier number embeddings: encoding, recovery, data generation and training."""

import json

from ._fone import (
    FoneError,
    anchor_encode,
    chunk_decode,
    chunk_encode,
    circular_embed,
    exact_answer,
    exact_match,
    final_loss,
    final_predict,
    fone_encode,
    generate,
    numeric_token_count,
    r_squared,
    recover_digits,
)


def train(**options):
    """Train one run; keyword names match the run config keys (task, scheme,
    preset, lr, batch_size, epochs, train_size, val_size, test_size, seed,
    out, periods, adapter, early_stop, verbose). Returns the summary dict."""
    from ._fone import train_json

    return json.loads(train_json(**options))


__all__ = [
    "FoneError",
    "anchor_encode",
    "chunk_decode",
    "chunk_encode",
    "circular_embed",
    "exact_answer",
    "exact_match",
    "final_loss",
    "final_predict",
    "fone_encode",
    "generate",
    "numeric_token_count",
    "r_squared",
    "recover_digits",
    "train",
]
