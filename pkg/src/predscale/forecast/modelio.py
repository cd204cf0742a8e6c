"""Plain-text model files.

Layout: a header line, then one block per weight array (row-major decimal
floats, one matrix row per line), blocks separated by a blank line. Vectors
are written as a single row.

    rnn,H,I,O                      -> blocks W_s, b_s, W_o, b_o
    mlp,20-32-32-1,relu-relu-identity -> blocks W_1, b_1, W_2, b_2, ...
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .nets import Layer, MlpParams, RnnParams


class ModelFormatError(ValueError):
    pass


def _format_block(arr: np.ndarray) -> str:
    rows = np.atleast_2d(arr)
    return "\n".join(" ".join(repr(float(v)) for v in row) for row in rows)


def dumps(params) -> str:
    if isinstance(params, RnnParams):
        header = f"rnn,{params.H},{params.I},{params.O}"
    elif isinstance(params, MlpParams):
        widths = "-".join(str(w) for w in params.widths)
        acts = "-".join(layer.activation for layer in params.layers)
        header = f"mlp,{widths},{acts}"
    else:
        raise TypeError(f"cannot serialise {type(params).__name__}")
    blocks = [_format_block(a) for a in params.arrays]
    return header + "\n" + "\n\n".join(blocks) + "\n"


def loads(text: str):
    try:
        return _parse(text)
    except ModelFormatError:
        raise
    except ValueError as exc:  # bad ints, reshape failures, inconsistent shapes
        raise ModelFormatError(f"malformed model file: {exc}") from None


def _parse(text: str):
    header, _, body = text.partition("\n")
    parts = header.strip().split(",")
    blocks = [b for b in body.strip().split("\n\n") if b.strip()]
    try:
        arrays = [np.array([[float(x) for x in line.split()] for line in b.strip().splitlines()]) for b in blocks]
    except ValueError as exc:
        raise ModelFormatError(f"bad number in model file: {exc}") from None

    if parts[0] == "rnn":
        if len(parts) != 4 or len(arrays) != 4:
            raise ModelFormatError(f"rnn file needs header rnn,H,I,O and 4 blocks, got {header!r} / {len(arrays)}")
        H, I, O = (int(p) for p in parts[1:])  # noqa: E741
        W_s, b_s, W_o, b_o = arrays
        params = RnnParams(W_s, b_s.reshape(-1), W_o, b_o.reshape(-1))
        if (params.H, params.I, params.O) != (H, I, O):
            raise ModelFormatError(f"header {header!r} disagrees with stored shapes")
        return params
    if parts[0] == "mlp":
        if len(parts) != 3:
            raise ModelFormatError(f"mlp header must be mlp,<widths>,<activations>: {header!r}")
        widths = [int(w) for w in parts[1].split("-")]
        acts = parts[2].split("-")
        if len(acts) != len(widths) - 1 or len(arrays) != 2 * len(acts):
            raise ModelFormatError(f"mlp header {header!r} does not match {len(arrays)} blocks")
        layers = []
        for k, act in enumerate(acts):
            W = arrays[2 * k].reshape(widths[k + 1], widths[k])
            layers.append(Layer(W, arrays[2 * k + 1].reshape(-1), act))
        return MlpParams(layers)
    raise ModelFormatError(f"unknown model kind {parts[0]!r}")


def save(params, path: str | Path) -> None:
    Path(path).write_text(dumps(params))


def load(path: str | Path):
    return loads(Path(path).read_text())
