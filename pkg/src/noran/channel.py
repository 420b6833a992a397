"""Complex MIMO channel model.

Matrices are ``numpy`` complex128 arrays shaped ``(n_rx, n_tx)`` so that
``z = H @ x`` type-checks with ``x`` of length ``n_tx``. Receivers combine
with MRC, which is why the scalar gain of a precoded channel is the
squared norm ``||H p||^2``.
"""

from dataclasses import dataclass

import numpy as np

from noran.errors import NoValidPrecoderError

__all__ = [
    "ChannelRealization",
    "Precoder",
    "as_matrix",
    "sample_rayleigh_channel",
    "select_precoder",
    "effective_gain",
    "transmit",
    "transmit_block",
    "PRECODER_MODES",
]

PRECODER_MODES = ("max-gain", "random-unit")

# below this, H p is treated as zero
MIN_PROJECTION = 1e-9


def as_matrix(h, name="h"):
    """Validate and return ``h`` as a 2-D finite complex128 array."""
    m = np.asarray(h, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """One draw of the legitimate (``h``) and eavesdropper (``g``) channels."""

    h: np.ndarray
    g: np.ndarray
    sigma_n2: float
    sigma_e2: float

    def __post_init__(self):
        h = as_matrix(self.h, "h")
        g = as_matrix(self.g, "g")
        if h.shape[1] != g.shape[1]:
            raise ValueError(
                f"h and g must share the transmitter: {h.shape[1]} vs {g.shape[1]} columns"
            )
        if self.sigma_n2 < 0 or self.sigma_e2 < 0:
            raise ValueError("noise variances must be nonnegative")
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)

    @property
    def n_tx(self):
        return self.h.shape[1]

    @property
    def n_rx(self):
        return self.h.shape[0]

    @property
    def n_eve(self):
        return self.g.shape[0]


@dataclass(frozen=True, eq=False)
class Precoder:
    """Unit-norm transmit direction."""

    p: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, Precoder):
            return NotImplemented
        return self.p.shape == other.p.shape and bool(np.all(self.p == other.p))

    __hash__ = None

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.complex128).reshape(-1)
        if p.size == 0 or not np.all(np.isfinite(p)):
            raise ValueError("precoder must be a finite non-empty vector")
        if abs(np.linalg.norm(p) - 1.0) > 1e-12:
            raise ValueError(f"precoder must have unit norm, got {np.linalg.norm(p)!r}")
        object.__setattr__(self, "p", p)

    def __len__(self):
        return self.p.size


def sample_rayleigh_channel(n_rx, n_tx, rng):
    """Draw an ``n_rx x n_tx`` matrix of i.i.d. CN(0, 1) entries, row-major."""
    if n_rx < 1 or n_tx < 1:
        raise ValueError(f"channel dimensions must be >= 1, got {n_rx}x{n_tx}")
    return rng.complex_normal(n_rx * n_tx).reshape(n_rx, n_tx)


def _fix_phase(v):
    # rotate so the largest-magnitude entry is real positive; makes SVD output
    # reproducible up to LAPACK's own rounding
    i = int(np.argmax(np.abs(v)))
    return v * (np.conj(v[i]) / abs(v[i]))


def select_precoder(h, mode="max-gain", rng=None):
    """Choose a unit precoder for channel ``h``.

    ``max-gain`` returns the dominant right singular vector, which
    maximizes ``||H p||^2``. ``random-unit`` draws isotropic unit vectors
    from ``rng`` until the projection onto ``h`` is nonzero.
    """
    h = as_matrix(h)
    if not np.any(h):
        raise NoValidPrecoderError("all-zero channel has no valid precoder")
    if mode == "max-gain":
        _, _, vh = np.linalg.svd(h)
        p = _fix_phase(vh[0].conj())
        p = p / np.linalg.norm(p)
    elif mode == "random-unit":
        if rng is None:
            raise ValueError("random-unit precoding needs an RngStream")
        for _ in range(1000):
            v = rng.complex_normal(h.shape[1])
            norm = np.linalg.norm(v)
            if norm == 0.0:
                continue
            p = v / norm
            if np.linalg.norm(h @ p) > MIN_PROJECTION:
                break
        else:
            raise NoValidPrecoderError("no random direction with nonzero projection after 1000 draws")
    else:
        raise ValueError(f"unknown precoder mode {mode!r}; expected one of {PRECODER_MODES}")
    if np.linalg.norm(h @ p) <= MIN_PROJECTION:
        raise NoValidPrecoderError("channel projection of the selected precoder vanishes")
    return Precoder(p)


def effective_gain(h, p):
    """Squared norm ``||H p||^2`` of the precoded channel."""
    h = as_matrix(h)
    vec = p.p if isinstance(p, Precoder) else np.asarray(p, dtype=np.complex128).reshape(-1)
    if vec.size != h.shape[1]:
        raise ValueError(f"precoder length {vec.size} does not match {h.shape[1]} transmit antennas")
    hp = h @ vec
    return float(np.real(np.vdot(hp, hp)))


def transmit_block(ch, p, symbols, noran_symbols, rng):
    """Send a block of symbols through both channels.

    Returns ``(z, y)`` with shapes ``(n_sym, n_rx)`` and ``(n_sym, n_eve)``.
    All of Bob's noise is drawn before Eve's, symbol-major.
    """
    s = np.atleast_1d(np.asarray(symbols, dtype=np.complex128))
    t = np.atleast_1d(np.asarray(noran_symbols, dtype=np.complex128))
    if s.shape != t.shape or s.ndim != 1:
        raise ValueError("symbols and noran_symbols must be 1-D and the same length")
    vec = p.p if isinstance(p, Precoder) else np.asarray(p, dtype=np.complex128)
    if vec.size != ch.n_tx:
        raise ValueError(f"precoder length {vec.size} does not match {ch.n_tx} transmit antennas")
    n = s.size
    n_noise = rng.complex_normal(n * ch.n_rx).reshape(n, ch.n_rx)
    e_noise = rng.complex_normal(n * ch.n_eve).reshape(n, ch.n_eve)
    tx = np.outer(s + t, vec)  # (n, n_tx), each row is x + w
    z = tx @ ch.h.T + np.sqrt(ch.sigma_n2) * n_noise
    y = tx @ ch.g.T + np.sqrt(ch.sigma_e2) * e_noise
    return z, y


def transmit(ch, p, symbol, noran_symbol, rng):
    """Single-use version of :func:`transmit_block`."""
    z, y = transmit_block(ch, p, [symbol], [noran_symbol], rng)
    return z[0], y[0]
