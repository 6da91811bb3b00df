"""Monte-Carlo link simulation: precoding, mode-switched diagonal channels,
AWGN and zero-forcing recovery at every receiver."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np

from .scheme import BiaScheme
from .verify import VerificationError, coalition_copies, verify

COND_LIMIT = 1e12


class UnverifiedSchemeError(VerificationError):
    pass


class IllConditionedError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ChannelModeTable:
    """gains[p-1, q-1, m]: i.i.d. CN(0, 1), constant over the supersymbol."""

    gains: np.ndarray
    seed: int | None = None

    @classmethod
    def draw(cls, K: int, n_modes: int, rng: np.random.Generator | int) -> "ChannelModeTable":
        seed = rng if isinstance(rng, (int, np.integer)) else None
        rng = np.random.default_rng(rng)
        g = (rng.standard_normal((K, K, n_modes)) + 1j * rng.standard_normal((K, K, n_modes))) / math.sqrt(2)
        return cls(g, seed)

    def diagonal(self, p: int, q: int, S: np.ndarray) -> np.ndarray:
        return self.gains[p - 1, q - 1, S[:, p - 1]]


@dataclass(frozen=True)
class TransmitBlock:
    """symbols[q-1] are the amplitudes transmitter q puts on its basic vectors."""

    symbols: np.ndarray
    power: float

    @classmethod
    def from_unit_symbols(cls, unit: np.ndarray, power: float) -> "TransmitBlock":
        unit = np.asarray(unit, dtype=complex)
        return cls(unit * math.sqrt(power / unit.shape[1]), power)

    @classmethod
    def gaussian(cls, K: int, d: int, power: float, rng: np.random.Generator) -> "TransmitBlock":
        unit = (rng.standard_normal((K, d)) + 1j * rng.standard_normal((K, d))) / math.sqrt(2)
        return cls.from_unit_symbols(unit, power)

    @classmethod
    def qpsk(cls, K: int, d: int, power: float, rng: np.random.Generator) -> "TransmitBlock":
        re = rng.choice([-1.0, 1.0], size=(K, d))
        im = rng.choice([-1.0, 1.0], size=(K, d))
        return cls.from_unit_symbols((re + 1j * im) / math.sqrt(2), power)


_VERIFIED: dict[str, bool] = {}


def ensure_verified(scheme: BiaScheme) -> None:
    key = scheme.fingerprint
    if key not in _VERIFIED:
        _VERIFIED[key] = verify(scheme).passed
    if not _VERIFIED[key]:
        raise UnverifiedSchemeError(
            f"scheme K={scheme.params.K}, r={scheme.params.r}, n={scheme.params.n} "
            "fails verification; decoding guarantees do not hold"
        )


@dataclass(frozen=True)
class _Layout:
    precoders: list[np.ndarray]  # float n x d per transmitter
    interferers: list[np.ndarray]  # per receiver: transmitter index of each column
    interference_cols: list[np.ndarray]  # per receiver: binary n x m


def _layout(scheme: BiaScheme) -> _Layout:
    cached = scheme.__dict__.get("_link_layout")
    if cached is not None:
        return cached
    K, n = scheme.params.K, scheme.params.n
    copies = coalition_copies(scheme)
    qs, cols = [], []
    for p in range(1, K + 1):
        pairs = [(q, c[q]) for Q, c in copies.items() for q in Q if q != p and q in c]
        qs.append(np.array([q for q, _ in pairs], dtype=int))
        cols.append(np.column_stack([v for _, v in pairs]).astype(float) if pairs else np.zeros((n, 0)))
    layout = _Layout([ps.matrix().astype(float) for ps in scheme.precoders], qs, cols)
    scheme.__dict__["_link_layout"] = layout
    return layout


def _precoder(scheme: BiaScheme, q: int) -> np.ndarray:
    return _layout(scheme).precoders[q - 1]


def simulate_supersymbol(
    scheme: BiaScheme,
    table: ChannelModeTable,
    block: TransmitBlock,
    noise_seed: int | None = None,
    *,
    allow_unverified: bool = False,
) -> np.ndarray:
    """Received vectors, one row per receiver; ``noise_seed=None`` is noiseless."""
    if not allow_unverified:
        ensure_verified(scheme)
    K, n = scheme.params.K, scheme.params.n
    tx = [_precoder(scheme, q) @ block.symbols[q - 1] for q in range(1, K + 1)]
    y = np.zeros((K, n), dtype=complex)
    for p in range(1, K + 1):
        for q in range(1, K + 1):
            y[p - 1] += table.diagonal(p, q, scheme.S) * tx[q - 1]
    if noise_seed is not None:
        rng = np.random.default_rng(noise_seed)
        y += (rng.standard_normal((K, n)) + 1j * rng.standard_normal((K, n))) / math.sqrt(2)
    return y


def interference_matrix(p: int, scheme: BiaScheme, table: ChannelModeTable) -> np.ndarray:
    """Every interfering image at receiver p (aligned copies included)."""
    layout = _layout(scheme)
    qs, cols = layout.interferers[p - 1], layout.interference_cols[p - 1]
    gains = table.gains[p - 1][qs - 1][:, scheme.S[:, p - 1]]  # (m, n)
    return gains.T * cols


@dataclass
class ReceiverFilter:
    U: np.ndarray  # orthonormal basis of the interference-free subspace
    G: np.ndarray  # U^H H^[pp] V^[p]
    cond: float


def receiver_filter(p: int, scheme: BiaScheme, table: ChannelModeTable) -> ReceiverFilter:
    n = scheme.params.n
    J = interference_matrix(p, scheme, table)
    if J.shape[1]:
        u, sv, _ = np.linalg.svd(J, full_matrices=True)
        rank = int(np.sum(sv > 1e-10 * sv[0])) if sv.size and sv[0] > 0 else 0
        U = u[:, rank:]
    else:
        U = np.eye(n, dtype=complex)
    desired = table.diagonal(p, p, scheme.S)[:, None] * _precoder(scheme, p)
    G = U.conj().T @ desired
    if G.size == 0 or G.shape[0] < G.shape[1]:
        cond = math.inf
    else:
        cond = float(np.linalg.cond(G))
    return ReceiverFilter(U, G, cond)


def zf_decode(p: int, y: np.ndarray, scheme: BiaScheme, table: ChannelModeTable) -> np.ndarray:
    """Project out interference at receiver p and solve for its symbols."""
    f = receiver_filter(p, scheme, table)
    if not f.cond < COND_LIMIT:
        raise IllConditionedError(f"receiver {p}: projected desired matrix has condition {f.cond:.3g}")
    x, *_ = np.linalg.lstsq(f.G, f.U.conj().T @ y, rcond=None)
    return x


def qpsk_slice(x: np.ndarray) -> np.ndarray:
    return (np.sign(x.real) + 1j * np.sign(x.imag)) / math.sqrt(2)


def fit_slope(snr_db: np.ndarray, rates: np.ndarray) -> float:
    """Least-squares slope of rate against log2(snr)."""
    x = np.asarray(snr_db, dtype=float) * math.log2(10) / 10
    x = x - x.mean()
    return float(np.dot(x, rates - np.mean(rates)) / np.dot(x, x))


def top_decade(snr_db: np.ndarray) -> np.ndarray:
    snr_db = np.asarray(snr_db, dtype=float)
    return snr_db >= snr_db.max() - 10.0 - 1e-9


@dataclass
class RateCurve:
    snr_db: list[float]
    per_user_rate: np.ndarray  # (len(snr_db), K), bits per channel use
    sum_rate: np.ndarray
    sum_rate_se: np.ndarray
    dof_slope: float
    ci: float
    trials: int
    discarded: int
    seed: int
    trial_slopes: np.ndarray = field(repr=False, default=None)

    @property
    def discard_rate(self) -> float:
        return self.discarded / self.trials

    def csv_rows(self):
        K = self.per_user_rate.shape[1]
        for i, snr in enumerate(self.snr_db):
            for p in range(K):
                yield snr, p + 1, float(self.per_user_rate[i, p]), float(self.sum_rate[i])

    def summary(self) -> dict:
        return {
            "dof_slope": self.dof_slope,
            "ci": self.ci,
            "discard_rate": self.discard_rate,
            "trials": self.trials,
            "discarded": self.discarded,
            "seeds": {"master": self.seed, "per_trial": "default_rng([master, trial])"},
            "channel_model": "i.i.d. CN(0,1) gain per (receiver, transmitter, mode)",
        }


def estimate_rates(
    scheme: BiaScheme,
    snr_db_list,
    trials: int,
    seed: int,
    *,
    allow_unverified: bool = False,
    discard_ill_conditioned: bool = True,
) -> RateCurve:
    """Average per-user log-det rates over channel draws and fit the DoF slope.

    Per trial and receiver p the rate is (1/n) log2 det(I + (rho/d) G^H G)
    with G the interference-nulled desired matrix.  The slope is fitted on the
    top decade of the SNR grid.
    """
    snr_db = np.asarray(list(snr_db_list), dtype=float)
    if snr_db.size == 0:
        raise ValueError("empty SNR list")
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
    mask = top_decade(snr_db)
    if mask.sum() < 2:
        raise ValueError("fewer than 2 SNR points in the top decade for the slope fit")
    if not allow_unverified:
        ensure_verified(scheme)
    K, n, n_modes = scheme.params.K, scheme.params.n, scheme.n_modes
    rho = 10.0 ** (snr_db / 10.0)

    kept = []
    discarded = 0
    for t in range(trials):
        table = ChannelModeTable.draw(K, n_modes, np.random.default_rng([seed, t]))
        filters = [receiver_filter(p, scheme, table) for p in range(1, K + 1)]
        if discard_ill_conditioned and any(not f.cond < COND_LIMIT for f in filters):
            discarded += 1
            continue
        rates = np.zeros((snr_db.size, K))
        for p, f in enumerate(filters):
            d = f.G.shape[1]
            if f.G.size == 0:
                continue
            gram = f.G.conj().T @ f.G
            eig = np.clip(np.linalg.eigvalsh(gram), 0.0, None)
            rates[:, p] = np.log2(1.0 + np.outer(rho / d, eig)).sum(axis=1) / n
        kept.append(rates)
    if not kept:
        raise IllConditionedError("every trial was discarded as ill-conditioned")

    stack = np.stack(kept)  # (trials, snr, K)
    per_user = stack.mean(axis=0)
    sums = stack.sum(axis=2)
    sum_rate = sums.mean(axis=0)
    se = sums.std(axis=0, ddof=1) / math.sqrt(len(kept)) if len(kept) > 1 else np.zeros_like(sum_rate)
    slopes = np.array([fit_slope(snr_db[mask], s[mask]) for s in sums])
    ci = 1.96 * float(slopes.std(ddof=1)) / math.sqrt(len(slopes)) if len(slopes) > 1 else 0.0
    return RateCurve(
        snr_db=[float(s) for s in snr_db],
        per_user_rate=per_user,
        sum_rate=sum_rate,
        sum_rate_se=se,
        dof_slope=fit_slope(snr_db[mask], sum_rate[mask]),
        ci=ci,
        trials=trials,
        discarded=discarded,
        seed=seed,
        trial_slopes=slopes,
    )


def symbol_error_rate(
    scheme: BiaScheme, snr_db: float, trials: int, seed: int, *, allow_unverified: bool = False
) -> tuple[float, int]:
    """QPSK symbol error rate of ZF decoding over all users; returns (ser, discarded)."""
    if not allow_unverified:
        ensure_verified(scheme)
    K, d = scheme.params.K, scheme.params.d
    rho = 10.0 ** (snr_db / 10.0)
    errors = total = discarded = 0
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        table = ChannelModeTable.draw(K, scheme.n_modes, rng)
        block = TransmitBlock.qpsk(K, d, rho, rng)
        y = simulate_supersymbol(scheme, table, block, noise_seed=int(rng.integers(2**63)), allow_unverified=True)
        try:
            est = [zf_decode(p, y[p - 1], scheme, table) for p in range(1, K + 1)]
        except IllConditionedError:
            discarded += 1
            continue
        sent = qpsk_slice(block.symbols)
        got = qpsk_slice(np.array(est))
        errors += int(np.sum(~np.isclose(sent, got)))
        total += sent.size
    return (errors / total if total else math.nan), discarded
