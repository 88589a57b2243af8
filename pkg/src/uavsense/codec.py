"""Expanding-window random linear coding over GF(256).

Layer ``l`` of a viewpoint's scalable representation holds ``counts[l]``
source symbols.  Window ``w`` covers layers ``1..w``, i.e. the first
``K_w`` source symbols.  Every coded symbol picks a window from the
distribution ``lambda`` and carries a uniform random GF(256) combination of
that window's source symbols.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from . import gf256

_HALL, _RANK = "hall", "rank"
_CHUNK_BYTES = 1 << 25


class CodecError(ValueError):
    pass


@dataclass(frozen=True)
class LayerAllocation:
    """Per-layer rates and the source-symbol counts they quantize to.

    ``counts[l] = floor(rate_l * rate_unit * frame_interval / symbol_size)``;
    fractional symbols are simply not sent.
    """

    layer_rates: tuple[float, ...]
    symbol_size: int = 256
    frame_interval: float = 1.0
    rate_unit: float = 1e6
    counts: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        rates = tuple(float(r) for r in self.layer_rates)
        object.__setattr__(self, "layer_rates", rates)
        if not rates:
            raise CodecError("need at least one layer")
        if any(r < 0 or not np.isfinite(r) for r in rates):
            raise CodecError("layer rates must be finite and non-negative")
        if self.symbol_size < 1 or not self.frame_interval > 0 or not self.rate_unit > 0:
            raise CodecError("symbol_size, frame_interval and rate_unit must be positive")
        per = self.rate_unit * self.frame_interval / self.symbol_size
        counts = tuple(int(np.floor(r * per + 1e-9)) for r in rates)
        object.__setattr__(self, "counts", counts)
        if sum(counts) < 1:
            raise CodecError("allocation carries no source symbols")

    @classmethod
    def from_counts(cls, counts, symbol_size: int = 256, frame_interval: float = 1.0,
                    rate_unit: float = 1e6) -> "LayerAllocation":
        step = symbol_size / (rate_unit * frame_interval)
        return cls(tuple(int(c) * step for c in counts), symbol_size, frame_interval, rate_unit)

    @property
    def n_layers(self) -> int:
        return len(self.layer_rates)

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.counts)

    @property
    def symbol_rate(self) -> float:
        """Rate carried by one source symbol per frame."""
        return self.symbol_size / (self.rate_unit * self.frame_interval)

    def prefix_rates(self) -> np.ndarray:
        """``x_l``: rate decoded when the first ``l`` layers are recovered (``x_0 = 0``)."""
        return np.concatenate([[0.0], np.cumsum(self.layer_rates)])


@dataclass(frozen=True)
class WindowDistribution:
    lam: tuple[float, ...]

    def __post_init__(self):
        lam = tuple(float(x) for x in self.lam)
        object.__setattr__(self, "lam", lam)
        if not lam:
            raise CodecError("empty window distribution")
        if any(x < 0 or x > 1 for x in lam):
            raise CodecError("lambda entries must lie in [0, 1]")
        if abs(sum(lam) - 1.0) > 1e-12:
            raise CodecError("lambda must sum to 1")

    @classmethod
    def first_window(cls, n_layers: int) -> "WindowDistribution":
        return cls((1.0,) + (0.0,) * (n_layers - 1))

    def as_array(self) -> np.ndarray:
        return np.array(self.lam)

    def check_windows(self, cumulative) -> None:
        cumulative = np.asarray(cumulative)
        if len(cumulative) != len(self.lam):
            raise CodecError("lambda length does not match the layer count")
        for w, (p, k) in enumerate(zip(self.lam, cumulative), start=1):
            if p > 0 and k == 0:
                raise CodecError(f"window {w} has zero source symbols")


def _cumulative(source_counts) -> np.ndarray:
    k = np.asarray(source_counts, dtype=np.int64)
    if k.ndim != 1 or len(k) == 0 or np.any(np.diff(k) < 0) or k[0] < 0 or k[-1] < 1:
        raise CodecError("cumulative source counts must be non-decreasing with K_L >= 1")
    return k


@dataclass
class CodedSymbolBatch:
    """Coded symbols encoded against cumulative source counts ``source_counts``.

    ``coefficients`` is stored zero-padded to ``K_L`` columns; the meaningful
    part of row ``r`` is its first ``K_{windows[r]}`` entries.
    """

    windows: np.ndarray
    coefficients: np.ndarray
    payloads: np.ndarray
    source_counts: np.ndarray

    def __post_init__(self):
        self.windows = np.asarray(self.windows, dtype=np.int64)
        self.coefficients = np.asarray(self.coefficients, dtype=np.uint8)
        self.payloads = np.asarray(self.payloads, dtype=np.uint8)
        self.source_counts = _cumulative(self.source_counts)
        n = len(self.windows)
        if self.coefficients.shape != (n, self.source_counts[-1]) or self.payloads.ndim != 2 \
                or len(self.payloads) != n:
            raise CodecError("malformed coded symbol batch")
        L = len(self.source_counts)
        if n and (self.windows.min() < 1 or self.windows.max() > L):
            raise CodecError("window index out of range")
        for r, w in enumerate(self.windows):
            if np.any(self.coefficients[r, self.source_counts[w - 1]:]):
                raise CodecError(f"symbol {r} has coefficients outside window {w}")

    def __len__(self) -> int:
        return len(self.windows)

    @property
    def symbol_size(self) -> int:
        return self.payloads.shape[1]

    @property
    def symbols(self) -> list[tuple[int, np.ndarray, np.ndarray]]:
        return [(int(w), self.coefficients[r, :self.source_counts[w - 1]], self.payloads[r])
                for r, w in enumerate(self.windows)]

    def select(self, keep) -> "CodedSymbolBatch":
        keep = np.asarray(keep)
        if keep.dtype != np.bool_:
            keep = keep.astype(np.intp)
        return CodedSymbolBatch(self.windows[keep], self.coefficients[keep], self.payloads[keep],
                                self.source_counts)

    def to_bytes(self) -> bytes:
        """Per symbol: u16 LE window, u16 LE coefficient count, coefficients, payload."""
        out = bytearray()
        for w, c, p in self.symbols:
            out += struct.pack("<HH", w, len(c))
            out += c.tobytes()
            out += p.tobytes()
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes, source_counts, symbol_size: int) -> "CodedSymbolBatch":
        k = _cumulative(source_counts)
        windows, rows, payloads = [], [], []
        pos = 0
        while pos < len(data):
            if pos + 4 > len(data):
                raise CodecError("truncated symbol header")
            w, n = struct.unpack_from("<HH", data, pos)
            pos += 4
            if not 1 <= w <= len(k) or n != k[w - 1]:
                raise CodecError(f"bad header at byte {pos - 4}: window {w}, {n} coefficients")
            if pos + n + symbol_size > len(data):
                raise CodecError("truncated symbol body")
            row = np.zeros(k[-1], dtype=np.uint8)
            row[:n] = np.frombuffer(data, np.uint8, n, pos)
            pos += n
            payloads.append(np.frombuffer(data, np.uint8, symbol_size, pos))
            pos += symbol_size
            windows.append(w)
            rows.append(row)
        if not windows:
            return cls(np.zeros(0, np.int64), np.zeros((0, k[-1]), np.uint8),
                       np.zeros((0, symbol_size), np.uint8), k)
        return cls(np.array(windows), np.stack(rows), np.stack(payloads), k)


@dataclass
class DecodeReport:
    max_decodable_prefix: int
    rank: int
    decoded_symbols: int
    prefix_decodable: list[bool]


def _draw_windows(rng, lam: np.ndarray, shape) -> np.ndarray:
    # inverse-CDF draw so rank and hall estimators can share the stream
    cdf = np.cumsum(lam)
    # pin the top so rounding never exposes trailing zero-probability windows
    cdf[np.flatnonzero(lam)[-1]:] = 1.0
    u = rng.random(shape)
    return np.searchsorted(cdf, u, side="right") + 1


def _random_rows(rng, windows: np.ndarray, cumulative: np.ndarray) -> np.ndarray:
    coefs = rng.integers(0, 256, size=windows.shape + (int(cumulative[-1]),), dtype=np.uint8)
    limit = cumulative[windows - 1]
    coefs[np.arange(cumulative[-1]) >= limit[..., None]] = 0
    return coefs


def encode(source, lam: WindowDistribution, count: int, seed, source_counts=None) -> CodedSymbolBatch:
    """Emit ``count`` coded symbols from ``source``.

    ``source`` is a list of per-layer arrays of shape ``(counts[l], symbol_size)``
    (a layer may be empty).  Deterministic given ``seed``.
    """
    if count < 1:
        raise CodecError("count must be at least 1")
    layers = [np.atleast_2d(np.asarray(s, dtype=np.uint8)) for s in source]
    sizes = {s.shape[1] for s in layers if s.size}
    if len(sizes) != 1:
        raise CodecError("source symbols must share one non-zero size")
    P = sizes.pop()
    layers = [s if s.size else np.zeros((0, P), np.uint8) for s in layers]
    k = np.cumsum([len(s) for s in layers])
    if source_counts is not None and not np.array_equal(_cumulative(source_counts), k):
        raise CodecError("source layer sizes do not match the source counts")
    k = _cumulative(k)
    lam.check_windows(k)
    rng = np.random.default_rng(seed)
    windows = _draw_windows(rng, lam.as_array(), count)
    coefs = _random_rows(rng, windows, k)
    payloads = gf256.combine(coefs, np.concatenate(layers))
    return CodedSymbolBatch(windows, coefs, payloads, k)


def _prefix_from_clean(clean, cumulative: np.ndarray):
    """Largest ``l`` with ``K_l <= clean`` (``K_0 = 0``)."""
    return np.searchsorted(cumulative, clean, side="right")


def decode(batch: CodedSymbolBatch) -> tuple[DecodeReport, list[np.ndarray]]:
    """Gaussian elimination over the received symbols.

    Prefix ``l`` is decodable iff every unit vector of source symbols
    ``1..K_l`` lies in the received row space.  Returns the report and the
    recovered layers of the largest decodable prefix.
    """
    k = batch.source_counts
    L = len(k)
    if len(batch) == 0:
        return DecodeReport(0, 0, 0, [False] * L), []
    M = np.hstack([batch.coefficients, batch.payloads])
    W, rk, piv = gf256.row_reduce(M, int(k[-1]))
    clean = int(gf256._clean_prefix(W, int(k[-1]), rk, piv))
    prefix = int(_prefix_from_clean(clean, k))
    solved = W[:clean, k[-1]:]
    bounds = np.concatenate([[0], k[:prefix]])
    layers = [solved[a:b].copy() for a, b in zip(bounds[:-1], bounds[1:])]
    return DecodeReport(prefix, rk, clean, [bool(kk <= clean) for kk in k]), layers


def hall_prefix(received_per_window, source_counts) -> np.ndarray:
    """Largest prefix satisfying the nested counting condition.

    With ``F_m = sum_{t<=m} N_t - K_m`` (``F_0 = 0``), window ``m`` passes iff
    ``F_m >= F_t`` for every ``t < m``; the result is the largest passing
    ``m`` (0 if none).  Accepts leading batch axes.
    """
    N = np.asarray(received_per_window, dtype=np.int64)
    k = _cumulative(source_counts)
    F = np.cumsum(N, axis=-1) - k
    before = np.maximum.accumulate(np.concatenate([np.zeros(N.shape[:-1] + (1,), np.int64), F[..., :-1]],
                                                  axis=-1), axis=-1)
    ok = F >= before
    idx = np.arange(1, len(k) + 1)
    return np.max(np.where(ok, idx, 0), axis=-1)


def hall_decodable(received_per_window, source_counts, prefix: int) -> bool:
    """True iff some ``m >= prefix`` has, for all ``j <= m``,
    ``sum_{t=j..m} N_t >= K_m - K_{j-1}``."""
    if prefix == 0:
        return True
    return bool(hall_prefix(received_per_window, source_counts) >= prefix)


def counting_bound(received_per_window, source_counts) -> np.ndarray:
    """Largest prefix ``l`` for which ``sum_{t>=j} N_t >= K_l - K_{j-1}`` for all ``j <= l``.

    Symbols from windows beyond ``l`` may help, so this bound holds for every
    coefficient draw: no prefix beyond it can be decodable.
    """
    N = np.asarray(received_per_window, dtype=np.int64)
    k = _cumulative(source_counts)
    L = len(k)
    tail = np.cumsum(N[..., ::-1], axis=-1)[..., ::-1]  # tail[j-1] = sum_{t>=j} N_t
    kprev = np.concatenate([[0], k[:-1]])
    best = np.zeros(N.shape[:-1], dtype=np.int64)
    for l in range(1, L + 1):
        ok = np.all(tail[..., :l] >= k[l - 1] - kprev[:l], axis=-1)
        best = np.where(ok, l, best)
    return best


@dataclass
class PrefixSample:
    """Per-trial outcomes of one Monte-Carlo estimator run."""

    prefix: np.ndarray
    received_per_window: np.ndarray


def sample_prefixes(lam: WindowDistribution, source_counts, sent: int, erasure: float, trials: int,
                    seed, mode: str = _RANK) -> PrefixSample:
    """Draw ``trials`` channel realizations and classify each one's decodable prefix.

    Only the received symbols matter, so each trial draws the surviving count
    ``Binomial(sent, 1 - erasure)`` and splits it over windows by
    ``Multinomial(lambda)``; this is the same law as per-symbol window and
    erasure draws.  Both modes consume the stream identically up to that
    point, so ``rank`` and ``hall`` runs at one seed see the same counts.
    """
    if trials < 1:
        raise CodecError("trials must be at least 1")
    if not 0 <= erasure < 1:
        raise CodecError("erasure rate must lie in [0, 1)")
    if sent < 0:
        raise CodecError("sent symbol count must be non-negative")
    if mode not in (_RANK, _HALL):
        raise CodecError(f"unknown estimator mode {mode!r}")
    k = _cumulative(source_counts)
    lam.check_windows(k)
    rng = np.random.default_rng(seed)
    total = rng.binomial(sent, 1.0 - erasure, size=trials)
    counts = rng.multinomial(total, lam.as_array())
    if mode == _HALL:
        return PrefixSample(hall_prefix(counts, k), counts)
    prefix = np.zeros(trials, dtype=np.int64)
    if sent == 0:
        return PrefixSample(prefix, counts)
    ends = np.cumsum(counts, axis=1)
    slot = np.arange(sent)
    step = max(1, _CHUNK_BYTES // max(1, sent * int(k[-1])))
    for a in range(0, trials, step):
        b = min(trials, a + step)
        # received symbols first, grouped by window; the tail rows are erased
        windows = np.minimum((slot[None, :, None] >= ends[a:b, None, :]).sum(axis=2) + 1, len(k))
        received = slot[None, :] < total[a:b, None]
        coefs = _random_rows(rng, windows, k)
        clean = gf256.batch_decodable_columns(coefs, received)
        prefix[a:b] = _prefix_from_clean(clean, k)
    return PrefixSample(prefix, counts)


def _close_sum(p: np.ndarray) -> np.ndarray:
    """Perturb ``p`` by a few ulps so that ``p.sum() == 1.0`` in floating point."""
    for _ in range(3):
        if p.sum() == 1.0:
            return p
        # short arrays sum left to right, so the last entry can absorb the slack
        last = 1.0 - p[:-1].sum()
        if 0.0 <= last <= 1.0:
            q = p.copy()
            q[-1] = last
            if q.sum() == 1.0:
                return q
        for i in np.argsort(-p, kind="stable"):
            for k in range(6):
                for direction in (np.inf, -np.inf):
                    v = p[i] + (1.0 - p.sum())
                    for _ in range(k):
                        v = np.nextafter(v, direction)
                    if 0.0 <= v <= 1.0:
                        q = p.copy()
                        q[i] = v
                        if q.sum() == 1.0:
                            return q
    return p


def estimate_prefix_probabilities(lam: WindowDistribution, source_counts, sent: int, erasure: float,
                                  trials: int, seed, mode: str = _RANK) -> np.ndarray:
    """Empirical ``P_l = Pr(max decodable prefix = l)`` for ``l = 0..L``."""
    s = sample_prefixes(lam, source_counts, sent, erasure, trials, seed, mode)
    hist = np.bincount(s.prefix, minlength=len(np.atleast_1d(source_counts)) + 1)
    return _close_sum(hist / trials)


def cumulative_decode_probabilities(p) -> np.ndarray:
    """``Q_l = sum_{m >= l} P_m`` for ``l = 1..L``."""
    p = np.asarray(p, dtype=float)
    return np.cumsum(p[::-1])[::-1][1:]


__all__ = [
    "CodecError", "LayerAllocation", "WindowDistribution", "CodedSymbolBatch", "DecodeReport",
    "encode", "decode", "hall_prefix", "hall_decodable", "counting_bound", "sample_prefixes",
    "estimate_prefix_probabilities", "cumulative_decode_probabilities",
]
