"""The r-round refinement protocol between Alice (X) and Bob (Y).

Two engines share one message law:

* :func:`run_session` is the literal protocol.  Both parties hold a
  :class:`SharedRandomness`, the sender searches for the first codeword that
  is zero on its zero set, the index travels as an Elias gamma codeword, and
  each side rebuilds ``U_i`` from the shared array.  Cost is
  ``O(E[j] * |zero set|)`` with ``E[j] = alpha ** |zero set|``, so it is only
  usable for small blocks.
* :func:`simulate_session` draws the same joint law of ``(U^r, j_1..j_r)``
  directly: the index is geometric with success probability
  ``alpha ** -|zero set|`` and, given the index, the remaining live samples
  are fresh ``Bern(1 - 1/alpha)`` draws.  This is what Monte Carlo uses.

Shared randomness
-----------------
``V[i, j](l)`` is derived from a 64-bit seed by SplitMix64 finalizers on
unsigned 64-bit words (wrap-around arithmetic, no endianness dependence)::

    k_seed = mix(seed + G)
    k_i    = mix(k_seed + i * G)
    k_ij   = mix(k_i ^ mix(j))
    w      = mix(k_ij ^ ((l + 1) * G))
    V      = 1  iff  (w >> 11) * 2**-53 < 1 - 1/alpha_i

with ``G = 0x9E3779B97F4A7C15``; ``i`` and ``l`` are 1-based and 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coding import Transcript
from .schedules import Schedule

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MAX_INDEX = (1 << 63) - 1

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


class CodewordOverflowError(OverflowError):
    pass


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class SharedRandomness:
    """Lazily evaluated shared codebooks ``V[i, j](l) ~ Bern(1 - 1/alpha_i)``."""

    seed: int
    alphas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & MASK64)
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))

    def _round_key(self, i: int) -> int:
        return mix64(mix64(self.seed + GOLDEN) + i * GOLDEN)

    def _threshold(self, i: int) -> float:
        return 1.0 - 1.0 / self.alphas[i - 1]

    def bits_block(self, i: int, j0: int, count: int, ls) -> np.ndarray:
        """Bits for codewords ``j0 .. j0+count-1`` at positions ``ls``; shape ``(count, len(ls))``."""
        ls = np.asarray(ls, dtype=np.uint64)
        js = np.arange(j0, j0 + count, dtype=np.uint64)
        kij = np.uint64(self._round_key(i)) ^ _mix_array(js)
        lk = (ls + np.uint64(1)) * np.uint64(GOLDEN)
        w = _mix_array(kij[:, None] ^ lk[None, :])
        u = (w >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        return (u < self._threshold(i)).astype(np.uint8)

    def bits(self, i: int, j: int, ls) -> np.ndarray:
        return self.bits_block(i, j, 1, ls)[0]


def select_codeword(rand: SharedRandomness, i: int, zero_set, max_index: int = MAX_INDEX,
                    block: int = 512) -> int:
    """Smallest ``j >= 1`` whose codeword is all-zero on ``zero_set``."""
    zero_set = np.asarray(zero_set, dtype=np.int64)
    if zero_set.size == 0:
        return 1
    j0 = 1
    while j0 <= max_index:
        count = min(block, max_index - j0 + 1)
        hit = ~rand.bits_block(i, j0, count, zero_set).any(axis=1)
        if hit.any():
            return j0 + int(np.argmax(hit))
        j0 += count
    raise CodewordOverflowError(f"no codeword below {max_index} for round {i}")


@dataclass
class SessionState:
    """One party's view: its own bits and the message vectors so far."""

    party: str
    samples: np.ndarray
    u_vectors: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.samples)

    @property
    def active_set(self) -> np.ndarray:
        if not self.u_vectors:
            return np.arange(self.n)
        return np.flatnonzero(self.u_vectors[-1] == 0)

    def zero_set(self) -> np.ndarray:
        act = self.active_set
        return act[self.samples[act] == 0]

    def u_matrix(self) -> np.ndarray:
        return np.array(self.u_vectors, dtype=np.uint8).reshape(len(self.u_vectors), self.n)


def apply_codeword(state: SessionState, i: int, j: int, rand: SharedRandomness) -> SessionState:
    act = state.active_set
    u = np.ones(state.n, dtype=np.uint8)
    if act.size:
        u[act] = rand.bits(i, j, act)
    return SessionState(state.party, state.samples, state.u_vectors + [u])


def _reconstruct(n: int, indices, rand: SharedRandomness) -> np.ndarray:
    state = SessionState("?", np.zeros(n, dtype=np.uint8))
    for i, j in enumerate(indices, start=1):
        state = apply_codeword(state, i, j, rand)
    return state.u_matrix()


def run_session(x, y, schedule: Schedule, rand: SharedRandomness,
                max_index: int = MAX_INDEX) -> tuple[SessionState, SessionState, Transcript]:
    """Run all rounds literally; returns Alice's state, Bob's state and the transcript."""
    x = np.asarray(x, dtype=np.uint8)
    y = np.asarray(y, dtype=np.uint8)
    if x.shape != y.shape or x.ndim != 1 or x.size < 1:
        raise ValueError("x and y must be equal-length 1-d sample vectors")
    alice, bob = SessionState("A", x), SessionState("B", y)
    indices = []
    for i in range(1, schedule.r + 1):
        sender = alice if i % 2 == 1 else bob
        j = select_codeword(rand, i, sender.zero_set(), max_index=max_index)
        indices.append(j)
        alice = apply_codeword(alice, i, j, rand)
        bob = apply_codeword(bob, i, j, rand)
    return alice, bob, Transcript(tuple(indices), len(x))


def replay_transcript(data: bytes, rand: SharedRandomness) -> np.ndarray:
    """Rebuild the ``(r, n)`` message matrix from a serialized transcript."""
    tr = Transcript.from_bytes(data)
    return _reconstruct(tr.n, tr.round_indices, rand)


def sample_codeword_index(s: int, alpha: float, rng: np.random.Generator) -> int:
    """Draw the selected index: geometric on ``{1, 2, ...}`` with success ``alpha ** -s``.

    Large indices are built from the top 53 bits of the continuous limit plus
    uniform low bits, which keeps the law exact to double precision at any
    magnitude.
    """
    if s == 0 or alpha == 1.0:
        return 1
    log_inv_p = s * math.log(alpha)
    e = rng.standard_exponential()
    if log_inv_p < 30.0:
        rate = -math.log1p(-math.exp(-log_inv_p))
        return 1 + int(math.floor(e / rate))
    # -log(1 - p) equals p to within p/2 relative error, p < 1e-13 here
    log2_j = (math.log(e) + log_inv_p) / math.log(2.0)
    if log2_j < 62:
        return 1 + int(math.floor(2.0 ** log2_j))
    exp2 = math.floor(log2_j)
    top = int(2.0 ** (log2_j - exp2 + 52))
    low_bits = exp2 - 52
    low = int.from_bytes(rng.bytes((low_bits + 7) // 8), "little") & ((1 << low_bits) - 1)
    return 1 + ((top << low_bits) | low)


@dataclass(frozen=True)
class SessionResult:
    u: np.ndarray
    transcript: Transcript

    @property
    def bit_count(self) -> int:
        return self.transcript.bit_count


def simulate_session(x, y, schedule: Schedule, rng: np.random.Generator) -> SessionResult:
    x = np.asarray(x, dtype=np.uint8)
    y = np.asarray(y, dtype=np.uint8)
    n = x.size
    u = np.ones((schedule.r, n), dtype=np.uint8)
    live = np.ones(n, dtype=bool)
    indices = []
    for i, alpha in enumerate(schedule.alphas, start=1):
        ref = x if i % 2 == 1 else y
        zero = live & (ref == 0)
        one = np.flatnonzero(live & (ref == 1))
        indices.append(sample_codeword_index(int(zero.sum()), alpha, rng))
        ui = u[i - 1]
        ui[zero] = 0
        ui[one] = rng.random(one.size) < 1.0 - 1.0 / alpha
        live = ui == 0
    return SessionResult(u, Transcript(tuple(indices), n))


def session_result(alice: SessionState, transcript: Transcript) -> SessionResult:
    return SessionResult(alice.u_matrix(), transcript)
