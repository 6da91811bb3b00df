"""Construction of the binary basis matrix, switching patterns and precoders.

Transmitters, receivers and time slots are 1-based wherever they cross the
public surface (coalition labels, JSON files); arrays are 0-based internally.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

Coalition = tuple[int, ...]


class ParameterError(ValueError):
    """Invalid (K, r) or coalition arguments."""


class ConstructionError(ValueError):
    """The requested (K, r) cannot be built with the chosen B-block mode."""


def _check_kr(K: int, r: int) -> None:
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    if not 1 <= r <= K:
        raise ParameterError(f"r must satisfy 1 <= r <= K={K}, got r={r}")


def optimal_r(K: int) -> int:
    """Smallest integer r with r >= (sqrt(1+4K)-1)/2, i.e. r(r+1) >= K."""
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    r = max(1, (math.isqrt(4 * K + 1) - 1) // 2)
    while r * (r + 1) < K:
        r += 1
    while r > 1 and (r - 1) * r >= K:
        r -= 1
    return r


def sum_dof_formula(K: int, r: int) -> Fraction:
    _check_kr(K, r)
    return Fraction(K * r, r * r - r + K)


def block_length(K: int, r: int) -> int:
    _check_kr(K, r)
    return math.comb(K - 1, r) + r * math.comb(K - 1, r - 1)


def coalitions(K: int, r: int) -> Iterator[Coalition]:
    """All r-subsets of {1..K} in lexicographic order."""
    return combinations(range(1, K + 1), r)


@dataclass(frozen=True)
class SchemeParams:
    K: int
    r: int
    n: int
    M: int
    pad_b: bool = False

    @classmethod
    def create(cls, K: int, r: int | None = None, pad_b: bool = False) -> "SchemeParams":
        if r is None:
            r = optimal_r(K)
        _check_kr(K, r)
        n = block_length(K, r)
        b = n - (r - 1) * K
        lo, hi = math.comb(K - 1, r - 1), math.comb(K, r)
        if b > hi:
            raise ConstructionError(
                f"K={K}, r={r}: B block needs {b} rows but only C(K,r)={hi} distinct "
                f"rows with K-r ones exist (b <= C(K,K-r) violated)"
            )
        if pad_b:
            n = (r - 1) * K + hi
        elif b < lo:
            raise ConstructionError(
                f"K={K}, r={r}: B block has {b} rows, fewer than C(K-1,r-1)={lo} "
                f"(b >= C(K-1,r-1) violated); use pad_b"
            )
        return cls(K=K, r=r, n=n, M=r, pad_b=pad_b)

    @property
    def b(self) -> int:
        """Number of rows in the B block."""
        return self.n - (self.r - 1) * self.K

    @property
    def d(self) -> int:
        """Symbols (basic vectors) per transmitter."""
        return math.comb(self.K - 1, self.r - 1)


def _b_rows(params: SchemeParams) -> np.ndarray:
    K, r = params.K, params.r
    order = list(coalitions(K, r))
    if params.pad_b:
        # lexicographic by the ones-set, which reproduces the printed K=4, r=3 matrix
        order.reverse()
    rows = np.ones((len(order), K), dtype=np.uint8)
    for i, Q in enumerate(order):
        rows[i, [q - 1 for q in Q]] = 0
    return rows[: params.b]


def _a_block(K: int) -> np.ndarray:
    return (np.ones((K, K), dtype=np.uint8) - np.eye(K, dtype=np.uint8))


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def build_basis_matrix(params: SchemeParams) -> np.ndarray:
    """The n x K binary matrix F: (r-1) stacked A blocks over the B block."""
    blocks = [_a_block(params.K)] * (params.r - 1) + [_b_rows(params)]
    F = np.vstack(blocks).astype(np.uint8)
    assert F.shape == (params.n, params.K)
    return _frozen(F)


def build_switch_matrix(params: SchemeParams, F: np.ndarray) -> np.ndarray:
    """Mode matrix S; column p is receiver p's switching pattern.

    The j-th A block (j >= 2) gets mode j on its diagonal, the first A block
    and the B block are copied from F.
    """
    K, r = params.K, params.r
    if F.shape != (params.n, K):
        raise ValueError(f"F has shape {F.shape}, expected {(params.n, K)}")
    S = F.astype(np.int64)
    for j in range(2, r):
        start = (j - 1) * K
        idx = np.arange(K)
        S[start + idx, idx] = j
    return _frozen(S)


def coalition_shared_vector(F: np.ndarray, Q: Sequence[int], r: int | None = None) -> np.ndarray:
    """Hadamard product of the columns of F outside Q (all-ones if none).

    ``r`` defaults to the coalition size implied by F's last row, which is
    always a B row with K - r ones.
    """
    K = F.shape[1]
    Q = tuple(Q)
    if len(set(Q)) != len(Q) or any(not 1 <= q <= K for q in Q):
        raise ParameterError(f"invalid coalition {Q} for K={K}")
    if r is None:
        r = K - int(F[-1].sum())
    if len(Q) != r:
        raise ParameterError(f"coalition {Q} has size {len(Q)}, expected r={r}")
    outside = [c for c in range(K) if c + 1 not in Q]
    if not outside:
        return _frozen(np.ones(F.shape[0], dtype=np.uint8))
    return _frozen(np.prod(F[:, outside], axis=1, dtype=np.uint8))


@dataclass(frozen=True)
class PrecoderSet:
    owner: int
    vectors: tuple[np.ndarray, ...]
    labels: tuple[Coalition, ...]

    def matrix(self) -> np.ndarray:
        """n x d precoder with the basic vectors as columns."""
        return np.column_stack(self.vectors)


def build_precoders(params: SchemeParams, F: np.ndarray) -> list[PrecoderSet]:
    shared = {Q: coalition_shared_vector(F, Q, params.r) for Q in coalitions(params.K, params.r)}
    sets = []
    for p in range(1, params.K + 1):
        labels = tuple(Q for Q in shared if p in Q)
        sets.append(PrecoderSet(owner=p, vectors=tuple(shared[Q] for Q in labels), labels=labels))
    return sets


@dataclass(frozen=True)
class BiaScheme:
    params: SchemeParams
    F: np.ndarray
    S: np.ndarray
    precoders: tuple[PrecoderSet, ...]

    @property
    def n_modes(self) -> int:
        """Modes a channel table must provide (r=1 uses modes {0, 1})."""
        return max(self.params.M, int(self.S.max()) + 1)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "params": {"K": p.K, "r": p.r, "n": p.n, "M": p.M, "pad_b": p.pad_b},
            "F": self.F.tolist(),
            "S": self.S.tolist(),
            "precoders": [
                {
                    "owner": ps.owner,
                    "vectors": [
                        {"coalition": list(Q), "vector": v.tolist()}
                        for Q, v in zip(ps.labels, ps.vectors)
                    ],
                }
                for ps in self.precoders
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BiaScheme":
        try:
            raw = data["params"]
            params = SchemeParams(
                K=int(raw["K"]), r=int(raw["r"]), n=int(raw["n"]), M=int(raw["M"]),
                pad_b=bool(raw.get("pad_b", False)),
            )
            F = _frozen(np.array(data["F"], dtype=np.uint8).reshape(params.n, params.K))
            S = _frozen(np.array(data["S"], dtype=np.int64).reshape(params.n, params.K))
            precoders = []
            for entry in data["precoders"]:
                labels = tuple(tuple(int(q) for q in v["coalition"]) for v in entry["vectors"])
                vectors = tuple(
                    _frozen(np.array(v["vector"], dtype=np.uint8)) for v in entry["vectors"]
                )
                if any(v.shape != (params.n,) for v in vectors):
                    raise ValueError("precoder vector length differs from n")
                precoders.append(PrecoderSet(int(entry["owner"]), vectors, labels))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed scheme document: {exc}") from exc
        if len(precoders) != params.K:
            raise ValueError(f"expected {params.K} precoder sets, got {len(precoders)}")
        return cls(params, F, S, tuple(precoders))

    def to_json(self, **meta) -> str:
        doc = self.to_dict()
        if meta:
            doc = {"meta": meta, **doc}
        return json.dumps(doc, indent=1)

    def save(self, path: str | Path, **meta) -> None:
        Path(path).write_text(self.to_json(**meta) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "BiaScheme":
        return cls.from_dict(json.loads(Path(path).read_text()))

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps(self.to_dict(), sort_keys=True).encode())
        return h.hexdigest()


def build_scheme(K: int, r: int | None = None, pad_b: bool = False) -> BiaScheme:
    params = SchemeParams.create(K, r, pad_b=pad_b)
    F = build_basis_matrix(params)
    S = build_switch_matrix(params, F)
    return BiaScheme(params, F, S, tuple(build_precoders(params, F)))
