"""Rank-based checking of a scheme's independence, alignment and decodability.

Channel values are replaced by uniform nonzero elements of GF(2^61 - 1).  A
polynomial rank condition that holds for generic channels then holds for a
random evaluation except with probability at most n / (2^61 - 1), so every
verdict is repeated under several independent seeds and must agree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .fieldrank import PRIME, mulmod, rank_mod_p, rank_rational
from .scheme import BiaScheme, Coalition


class SchemaError(ValueError):
    pass


class VerificationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenericChannelAssignment:
    """values[p-1, q-1, m] is the gain from transmitter q to receiver p in mode m."""

    values: np.ndarray
    seed: int

    @classmethod
    def from_seed(cls, seed: int, K: int, n_modes: int) -> "GenericChannelAssignment":
        rng = np.random.default_rng(seed)
        vals = rng.integers(1, PRIME, size=(K, K, n_modes), dtype=np.int64).astype(np.uint64)
        vals.setflags(write=False)
        return cls(vals, seed)

    def rescaled(self, p: int, q: int, m: int, factor: int) -> "GenericChannelAssignment":
        factor %= PRIME
        if factor == 0:
            raise ValueError("factor must be nonzero in the field")
        vals = self.values.copy()
        vals[p - 1, q - 1, m] = int(vals[p - 1, q - 1, m]) * factor % PRIME
        vals.setflags(write=False)
        return GenericChannelAssignment(vals, self.seed)


def realize_diagonal(assignment: GenericChannelAssignment, p: int, q: int, S: np.ndarray) -> np.ndarray:
    """Diagonal of the n x n channel matrix from q to p under pattern S[:, p-1]."""
    pattern = np.asarray(S)[:, p - 1]
    n_modes = assignment.values.shape[2]
    if pattern.min() < 0 or pattern.max() >= n_modes:
        raise SchemaError(
            f"receiver {p} uses mode {int(pattern.max())}, only {n_modes} modes available"
        )
    return assignment.values[p - 1, q - 1, pattern]


def _received(assignment, S, p, q, v) -> np.ndarray:
    v = np.asarray(v)
    diag = realize_diagonal(assignment, p, q, S)
    if v.dtype == np.uint8 and v.max(initial=0) <= 1:
        return np.where(v == 1, diag, np.uint64(0))
    return mulmod(diag, v.astype(np.uint64) % np.uint64(PRIME))


def coalition_copies(scheme: BiaScheme) -> dict[Coalition, dict[int, np.ndarray]]:
    """For every coalition label, each labelling owner's copy of the vector."""
    table: dict[Coalition, dict[int, np.ndarray]] = {}
    for ps in scheme.precoders:
        for Q, v in zip(ps.labels, ps.vectors):
            table.setdefault(tuple(Q), {})[ps.owner] = v
    return dict(sorted(table.items()))


def check_intra_tx_independence(scheme: BiaScheme, assignment=None) -> dict[int, tuple[bool, int]]:
    """Per transmitter: (precoder has full column rank over Q, its rank)."""
    out = {}
    for ps in scheme.precoders:
        if not ps.vectors:
            out[ps.owner] = (True, 0)
            continue
        rank = rank_rational(ps.matrix())
        out[ps.owner] = (rank == len(ps.vectors), rank)
    return out


def check_alignment(scheme: BiaScheme, assignment: GenericChannelAssignment) -> dict[tuple[Coalition, int], bool]:
    K = scheme.params.K
    out = {}
    for Q, copies in coalition_copies(scheme).items():
        complete = set(copies) == set(Q)
        for p in range(1, K + 1):
            if p in Q:
                continue
            if not complete:
                out[(Q, p)] = False
                continue
            cols = np.column_stack([_received(assignment, scheme.S, p, q, copies[q]) for q in Q])
            out[(Q, p)] = rank_mod_p(cols) == 1
    return out


def check_coalition_separability(scheme: BiaScheme, assignment: GenericChannelAssignment) -> dict[tuple[Coalition, int], bool]:
    """At each member receiver, the r images of a shared vector are independent."""
    out = {}
    for Q, copies in coalition_copies(scheme).items():
        complete = set(copies) == set(Q)
        for p in Q:
            if not complete:
                out[(Q, p)] = False
                continue
            cols = np.column_stack([_received(assignment, scheme.S, p, q, copies[q]) for q in Q])
            out[(Q, p)] = rank_mod_p(cols) == len(Q)
    return out


@dataclass
class ReceiverRanks:
    columns: int
    desired: int
    interference: int
    total: int
    passed: bool
    deficient: list[Coalition] = field(default_factory=list)


def _receiver_groups(scheme: BiaScheme, assignment, p: int):
    """Column groups at receiver p: desired first, then one group per coalition."""
    S = scheme.S
    own = scheme.precoders[p - 1]
    desired = [_received(assignment, S, p, p, v) for v in own.vectors]
    groups: list[tuple[Coalition, list[np.ndarray]]] = []
    for Q, copies in coalition_copies(scheme).items():
        if p in Q:
            cols = [_received(assignment, S, p, q, copies[q]) for q in Q if q != p and q in copies]
        else:
            q = min(copies)
            cols = [_received(assignment, S, p, q, copies[q])]
        groups.append((Q, cols))
    return desired, groups


def _rank(cols: list[np.ndarray], n: int) -> int:
    return rank_mod_p(np.column_stack(cols)) if cols else 0


def check_decodability(scheme: BiaScheme, assignment: GenericChannelAssignment) -> dict[int, ReceiverRanks]:
    n = scheme.params.n
    out = {}
    for p in range(1, scheme.params.K + 1):
        desired, groups = _receiver_groups(scheme, assignment, p)
        interference = [c for _, cols in groups for c in cols]
        r_des = _rank(desired, n)
        r_int = _rank(interference, n)
        total = _rank(desired + interference, n)
        columns = len(desired) + len(interference)
        res = ReceiverRanks(columns, r_des, r_int, total, r_des == len(desired) and total == columns)
        if not res.passed:
            # localize: coalitions whose columns fail to add their full count
            acc = list(desired)
            rank = r_des
            for Q, cols in groups:
                acc = acc + cols
                new = _rank(acc, n)
                if new - rank < len(cols):
                    res.deficient.append(Q)
                rank = new
        out[p] = res
    return out


def verify_counting_inequality(scheme: BiaScheme) -> dict[int, tuple[bool, int, int]]:
    """Per receiver: (lhs <= n, lhs, slack).

    Shared dimensions are the actual intersection sizes of the precoder sets.
    """
    K, r, n = scheme.params.K, scheme.params.r, scheme.params.n
    sets = [{v.tobytes() for v in ps.vectors} for ps in scheme.precoders]
    total = sum(len(ps.vectors) for ps in scheme.precoders)
    out = {}
    for p in range(1, K + 1):
        others = [q for q in range(1, K + 1) if q != p]
        shared = sum(len(set.intersection(*(sets[q - 1] for q in Q))) for Q in combinations(others, r))
        lhs = total - (r - 1) * shared
        out[p] = (lhs <= n, lhs, n - lhs)
    return out


def derive_seeds(master_seed: int, count: int) -> list[int]:
    state = np.random.SeedSequence(master_seed).generate_state(count, dtype=np.uint64)
    return [int(s) for s in state]


def _key(Q: Coalition, p: int) -> str:
    return f"{','.join(map(str, Q))}@{p}"


@dataclass
class VerificationReport:
    K: int
    r: int
    n: int
    seeds: list[int]
    lemma2: dict[int, bool]
    lemma2_rank: dict[int, int]
    lemma3: dict[tuple[Coalition, int], bool]
    lemma4: dict[tuple[Coalition, int], bool]
    decodability: dict[int, bool]
    ranks: dict[int, ReceiverRanks]
    counting: dict[int, bool]
    counting_lhs: dict[int, int]
    counting_slack: dict[int, int]
    disagreements: list[str]
    per_user_dof: dict[int, Fraction] | None = None
    sum_dof: Fraction | None = None

    @property
    def total_rank(self) -> dict[int, int]:
        return {p: r.total for p, r in self.ranks.items()}

    @property
    def passed(self) -> bool:
        return (
            not self.disagreements
            and all(self.lemma2.values())
            and all(self.lemma3.values())
            and all(self.lemma4.values())
            and all(self.decodability.values())
            and all(self.counting.values())
        )

    def failures(self) -> list[str]:
        out = [f"lemma2 tx{p}" for p, ok in self.lemma2.items() if not ok]
        out += [f"lemma3 {_key(Q, p)}" for (Q, p), ok in self.lemma3.items() if not ok]
        out += [f"lemma4 {_key(Q, p)}" for (Q, p), ok in self.lemma4.items() if not ok]
        for p, ok in self.decodability.items():
            if not ok:
                bad = ";".join(",".join(map(str, Q)) for Q in self.ranks[p].deficient)
                out.append(f"decodability rx{p}" + (f" coalitions {bad}" if bad else ""))
        out += [f"counting rx{p}" for p, ok in self.counting.items() if not ok]
        out += [f"seed disagreement {d}" for d in self.disagreements]
        return out

    def to_dict(self) -> dict:
        def by_rx(d):
            return {str(p): v for p, v in d.items()}

        return {
            "passed": self.passed,
            "params": {"K": self.K, "r": self.r, "n": self.n},
            "seeds": self.seeds,
            "lemma2": {str(p): {"pass": ok, "rank": self.lemma2_rank[p]} for p, ok in self.lemma2.items()},
            "lemma3": {_key(Q, p): ok for (Q, p), ok in self.lemma3.items()},
            "lemma4": {_key(Q, p): ok for (Q, p), ok in self.lemma4.items()},
            "decodability": {
                str(p): {
                    "pass": self.decodability[p],
                    "columns": rr.columns,
                    "desired_rank": rr.desired,
                    "interference_rank": rr.interference,
                    "total_rank": rr.total,
                    "deficient_coalitions": [list(Q) for Q in rr.deficient],
                }
                for p, rr in self.ranks.items()
            },
            "counting": {
                str(p): {"pass": ok, "lhs": self.counting_lhs[p], "slack": self.counting_slack[p]}
                for p, ok in self.counting.items()
            },
            "total_rank": by_rx(self.total_rank),
            "disagreements": self.disagreements,
            "failures": self.failures(),
            "achieved_dof": None
            if self.sum_dof is None
            else {
                "per_user": {str(p): str(f) for p, f in self.per_user_dof.items()},
                "sum": str(self.sum_dof),
            },
        }


def _merge(results: list[dict], label: str, disagreements: list[str]) -> dict:
    merged = {}
    for key in results[0]:
        verdicts = [res[key] for res in results]
        if len(set(verdicts)) > 1:
            disagreements.append(f"{label} {key}")
        merged[key] = all(verdicts)
    return merged


def verify(scheme: BiaScheme, seeds: int | list[int] = 3, master_seed: int = 0) -> VerificationReport:
    """Run every check; rank verdicts under each seed must coincide."""
    if isinstance(seeds, int):
        if seeds < 1:
            raise ValueError("need at least one seed")
        seeds = derive_seeds(master_seed, seeds)
    K, n_modes = scheme.params.K, scheme.n_modes
    assignments = [GenericChannelAssignment.from_seed(s, K, n_modes) for s in seeds]
    disagreements: list[str] = []

    intra = check_intra_tx_independence(scheme)
    lemma3 = _merge([check_alignment(scheme, a) for a in assignments], "lemma3", disagreements)
    lemma4 = _merge([check_coalition_separability(scheme, a) for a in assignments], "lemma4", disagreements)
    dec_runs = [check_decodability(scheme, a) for a in assignments]
    ranks = {}
    for p in dec_runs[0]:
        per_seed = [(d[p].total, d[p].desired, d[p].interference, d[p].passed) for d in dec_runs]
        if len(set(per_seed)) > 1:
            disagreements.append(f"decodability rx{p}")
        # report the weakest seed
        ranks[p] = min((d[p] for d in dec_runs), key=lambda rr: (rr.passed, rr.total))
    counting = verify_counting_inequality(scheme)

    report = VerificationReport(
        K=K, r=scheme.params.r, n=scheme.params.n, seeds=list(seeds),
        lemma2={p: ok for p, (ok, _) in intra.items()},
        lemma2_rank={p: rk for p, (_, rk) in intra.items()},
        lemma3=lemma3, lemma4=lemma4,
        decodability={p: rr.passed for p, rr in ranks.items()},
        ranks=ranks,
        counting={p: ok for p, (ok, _, _) in counting.items()},
        counting_lhs={p: lhs for p, (_, lhs, _) in counting.items()},
        counting_slack={p: s for p, (_, _, s) in counting.items()},
        disagreements=disagreements,
    )
    if report.passed:
        n = scheme.params.n
        report.per_user_dof = {ps.owner: Fraction(len(ps.vectors), n) for ps in scheme.precoders}
        report.sum_dof = sum(report.per_user_dof.values(), Fraction(0))
    return report


def achieved_dof(scheme: BiaScheme, report: VerificationReport | None = None) -> tuple[dict[int, Fraction], Fraction]:
    """Per-user and sum DoF of a scheme that passes every check."""
    if report is None:
        report = verify(scheme)
    if not report.passed:
        raise VerificationError("scheme failed verification: " + ", ".join(report.failures()))
    return report.per_user_dof, report.sum_dof
