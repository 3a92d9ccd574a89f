"""Random binary signature matrices for the shared-bandwidth uplink.

Entries take the two values +-1/sqrt(N) with equal probability, so every
column (one sensor's signature waveform) has unit norm.  Generation is a
pure function of (N, Ns, seed): a counter-based Philox stream is consumed
one draw per entry, sensor by sensor, so enlarging Ns under a fixed seed
keeps all earlier columns unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParam, InvalidSpreadingMatrix, ParseError

GENERATOR_ID = "philox4x64-colmajor-v1"

_SEED_MAX = 2**64
_NORM_TOL = 1e-12
_ENTRY_RTOL = 1e-12


@dataclass(frozen=True)
class SpreadingMatrix:
    """An N x Ns signature matrix with entries +-1/sqrt(N).

    entries is read-only; seed records the generator seed when the matrix
    was drawn by generate(), and is None for externally supplied matrices.
    """

    entries: np.ndarray = field(repr=False)
    N: int
    Ns: int
    seed: int | None = None

    def column(self, n: int) -> np.ndarray:
        """Signature of sensor n (0-based)."""
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or not 0 <= n < self.Ns:
            raise InvalidParam("n", n, f"sensor index must be an integer in [0, {self.Ns})")
        return self.entries[:, n]


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


def generate(N: int, Ns: int, seed: int) -> SpreadingMatrix:
    """Draw an N x Ns signature matrix from the frozen Philox stream.

    One uniform draw per entry, consumed in sensor-major order: the first
    N draws fill column 0, the next N fill column 1, and so on.  Identical
    (N, Ns, seed) triples give bit-identical matrices, and
    generate(N, Ns + k, seed) extends generate(N, Ns, seed) by k columns.
    """
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool) or N < 1:
        raise InvalidParam("N", N, "spreading length must be an integer >= 1")
    if not isinstance(Ns, (int, np.integer)) or isinstance(Ns, bool) or Ns < 1:
        raise InvalidParam("Ns", Ns, "sensor count must be an integer >= 1")
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool) or not 0 <= seed < _SEED_MAX:
        raise InvalidParam("seed", seed, "seed must be an integer in [0, 2**64)")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    # one double per entry keeps the stream position independent of dtype
    # buffering, which is what makes the column-extension property hold
    draws = rng.random(size=(int(Ns), int(N)))
    signs = np.where(draws < 0.5, -1.0, 1.0)
    entries = signs.T / math.sqrt(N)
    return SpreadingMatrix(entries=_freeze(entries), N=int(N), Ns=int(Ns), seed=int(seed))


def load(matrix, seed: int | None = None) -> SpreadingMatrix:
    """Wrap an externally supplied matrix after checking the alphabet.

    Every entry must equal +1/sqrt(N) or -1/sqrt(N) up to relative
    rounding of 1e-12, and every column norm must be 1 within 1e-12.
    """
    arr = np.asarray(matrix, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise InvalidSpreadingMatrix(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
    N, Ns = arr.shape
    scale = 1.0 / math.sqrt(N)
    # comparisons against NaN are False, so non-finite entries need their own check
    bad = ~np.isfinite(arr) | (np.abs(np.abs(arr) - scale) > _ENTRY_RTOL * scale)
    if bad.any():
        i, j = map(int, np.argwhere(bad)[0])
        raise InvalidSpreadingMatrix(
            f"entry ({i}, {j}) = {arr[i, j]!r} is not +-1/sqrt({N})", row=i, col=j
        )
    norms2 = np.sum(arr * arr, axis=0)
    off = np.abs(norms2 - 1.0) > _NORM_TOL
    if off.any():
        j = int(np.argwhere(off)[0][0])
        raise InvalidSpreadingMatrix(
            f"column {j} has squared norm {norms2[j]!r}, expected 1", col=j
        )
    return SpreadingMatrix(entries=_freeze(arr), N=int(N), Ns=int(Ns), seed=seed)


def save_csv(sm: SpreadingMatrix, path) -> None:
    """Write a signature matrix as CSV with a metadata comment header.

    Entries are printed with 17 significant digits, so load_csv recovers
    the exact doubles.
    """
    lines = [
        f"# N={sm.N} Ns={sm.Ns} seed={'none' if sm.seed is None else sm.seed} generator={GENERATOR_ID}"
    ]
    for row in sm.entries:
        lines.append(",".join(f"{v:.17g}" for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def load_csv(path) -> SpreadingMatrix:
    """Read a signature matrix written by save_csv (or compatible CSV).

    The metadata header is optional; when present its seed is restored.
    The matrix passes through the same validation as load().
    """
    seed: int | None = None
    rows: list[list[float]] = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("seed=") and tok != "seed=none":
                        try:
                            seed = int(tok[len("seed="):])
                        except ValueError as exc:
                            raise ParseError(f"{path}: bad seed token {tok!r} on line {lineno}") from exc
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise ParseError(f"{path}: non-numeric entry on line {lineno}") from exc
    if not rows:
        raise ParseError(f"{path}: no matrix rows found")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ParseError(f"{path}: ragged rows, expected {width} columns throughout")
    return load(np.asarray(rows, dtype=np.float64), seed=seed)
