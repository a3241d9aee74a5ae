"""Bit-accounted execution models: streaming with bounded memory, and
blackboard protocols over sharded data, with an exact simulation of the
former by the latter.

A memory-bounded algorithm owns nothing but an s-bit state; the runner
feeds it samples in (pass, index) order and checks the state length and
binariness after every transition, so no side channel can carry extra
information between rounds.  A blackboard protocol writes one public bit
per round; the writer choice may depend only on the transcript so far,
and the bit only on the writer's own shard plus the transcript.  The
reduction simulates a (N, T, s) streaming algorithm with (N/n, n, s*T)
blackboard parameters by handing the full state across the board after
every local pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from spikelab.estimators import EstimateReport
from spikelab.tensors import contract_batch

__all__ = [
    "Blackboard",
    "BlackboardProtocol",
    "MemoryBoundedAlgorithm",
    "QuantizedIteration",
    "QuantizerSpec",
    "ResourceProfile",
    "partial_trace_template",
    "power_template",
    "reduce_memory_to_distributed",
    "run_distributed",
    "run_memory_bounded",
    "shard_stream",
    "wrap_iteration_as_memory_bounded",
]


@dataclass(frozen=True)
class ResourceProfile:
    """(samples, passes, state bits) accounting for one streaming run."""

    samples: int
    passes: int
    state_bits: int

    def __post_init__(self):
        for name in ("samples", "passes", "state_bits"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")

    @property
    def cost(self) -> int:
        # Python integers, so no overflow however large the product gets.
        return int(self.samples) * int(self.passes) * int(self.state_bits)


class MemoryBoundedAlgorithm:
    """Interface for streaming algorithms with an s-bit state.

    Subclasses set ``state_bits`` and implement ``update`` (returning the
    next state as a 0/1 uint8 vector of the same length) and
    ``estimate`` (mapping the final state to an output vector).  The
    runner owns the state; implementations must not stash anything on
    ``self`` between calls.
    """

    state_bits: int

    def update(self, state: np.ndarray, t: int, i: int, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def estimate(self, state: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _check_state(state, s: int) -> np.ndarray:
    state = np.asarray(state)
    if state.dtype.kind not in "uib":
        raise RuntimeError(f"state must hold bits, got dtype {state.dtype}")
    if state.shape != (s,):
        raise RuntimeError(
            f"transition returned a state of {state.shape} bits, expected ({s},)"
        )
    if state.dtype.kind != "b" and not np.all((state == 0) | (state == 1)):
        raise RuntimeError("state must be a 0/1 bit vector")
    return state.astype(np.uint8)


def run_memory_bounded(
    algorithm: MemoryBoundedAlgorithm,
    data: np.ndarray,
    profile: ResourceProfile,
) -> EstimateReport:
    """Feed the stream through the algorithm in (t asc, i asc) order.

    The state starts all zeros, is the only value carried between
    transitions, and is length- and binariness-checked every round.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] != profile.samples:
        raise ValueError(
            f"stream shape {data.shape} does not provide {profile.samples} rows"
        )
    s = profile.state_bits
    if algorithm.state_bits != s:
        raise ValueError(
            f"algorithm declares {algorithm.state_bits} state bits, profile says {s}"
        )
    state = np.zeros(s, dtype=np.uint8)
    for t in range(profile.passes):
        for i in range(profile.samples):
            state = _check_state(algorithm.update(state, t, i, data[i]), s)
    out = np.asarray(algorithm.estimate(state.copy()), dtype=np.float64)
    return EstimateReport(
        estimate=out,
        overlap=None,
        iterations=profile.passes,
        converged=True,
        wall_ms=0.0,
        info={"cost": profile.cost},
        resources=profile,
    )


# ---------------------------------------------------------------------------
# quantization


@dataclass(frozen=True)
class QuantizerSpec:
    """Fixed-point codec: ``bits`` per coordinate on [-radius, radius].

    Values are clamped to the range and rounded to the nearest lattice
    point with ties to even, so the decode error is at most
    ``radius * 2^(1 - bits)`` for any finite input.
    """

    bits: int = 32
    radius: float = 64.0

    def __post_init__(self):
        if not 1 <= self.bits <= 63:
            raise ValueError(f"bits per coordinate must be in [1, 63], got {self.bits}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")

    @property
    def step(self) -> float:
        return 2.0 * self.radius / (2.0**self.bits - 1.0)

    def encode(self, values: np.ndarray) -> np.ndarray:
        """Little-endian bit codes, ``bits`` per coordinate, flattened."""
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        clamped = np.clip(values, -self.radius, self.radius)
        levels = np.round((clamped + self.radius) / self.step).astype(np.uint64)
        shifts = np.arange(self.bits, dtype=np.uint64)
        bits = (levels[:, None] >> shifts[None, :]) & np.uint64(1)
        return bits.astype(np.uint8).reshape(-1)

    def decode(self, bits: np.ndarray, count: int) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.uint64).reshape(count, self.bits)
        weights = np.uint64(1) << np.arange(self.bits, dtype=np.uint64)
        levels = (bits * weights[None, :]).sum(axis=1)
        return levels.astype(np.float64) * self.step - self.radius


# ---------------------------------------------------------------------------
# the common quantized iteration


def power_template(k: int):
    """psi(u) = (u/||u||)^(x)(k-1), the tensor power-method contraction."""
    from spikelab.tensors import outer_power

    def psi(u: np.ndarray) -> np.ndarray:
        nrm = float(np.linalg.norm(u))
        if nrm == 0.0:
            raise RuntimeError("iterate collapsed to numerical zero")
        return outer_power(u / nrm, k - 1)

    return psi


def partial_trace_template(k: int, d: int):
    """psi(u) = vec(I (x) .. (x) I (x) u/||u||) with k/2 - 1 identity pairs.

    Contracting an order-k sample against this template yields one
    matrix-vector product with the transposed pair-contracted tensor, so
    the wrapped iteration walks the same iterates as the direct spectral
    method.
    """
    if k % 2 != 0:
        raise ValueError(f"partial-trace template needs even k, got {k}")
    eye_flat = np.eye(d).reshape(-1)

    def psi(u: np.ndarray) -> np.ndarray:
        nrm = float(np.linalg.norm(u))
        if nrm == 0.0:
            raise RuntimeError("iterate collapsed to numerical zero")
        out = u / nrm
        for _ in range(k // 2 - 1):
            out = np.kron(eye_flat, out)
        return out

    return psi


class QuantizedIteration(MemoryBoundedAlgorithm):
    """State = [iterate code | partial-sum code], s = 2*d*B bits.

    Each update contracts the current sample against ``psi(iterate)``,
    adds the result divided by N into the quantized partial sum, and at
    the end of a pass promotes the partial sum to be the next iterate.
    The starting iterate is embedded at the first update (t = 0, i = 0),
    which keeps the all-zeros initial state convention intact.
    """

    def __init__(self, psi, quantizer: QuantizerSpec, d: int, n_samples: int, init):
        self.psi = psi
        self.quantizer = quantizer
        self.d = d
        self.n_samples = n_samples
        init = np.asarray(init, dtype=np.float64).reshape(-1)
        if init.shape != (d,) or not np.linalg.norm(init) > 0:
            raise ValueError("init must be a nonzero d-vector")
        self.init = init / np.linalg.norm(init)
        self.state_bits = 2 * d * quantizer.bits

    def _split(self, state):
        half = self.state_bits // 2
        return state[:half], state[half:]

    def update(self, state, t, i, x):
        q, d = self.quantizer, self.d
        iterate_bits, partial_bits = self._split(state)
        if t == 0 and i == 0:
            u = self.init
            partial = np.zeros(d)
        else:
            u = q.decode(iterate_bits, d)
            partial = q.decode(partial_bits, d)
        w = contract_batch(x[None, :], d, self.psi(u))[0]
        partial = partial + w / self.n_samples
        new_partial_bits = q.encode(partial)
        if i == self.n_samples - 1:
            # Pass boundary: the accumulated sum becomes the iterate and
            # the partial sum resets to the code for zero (all-zero bits
            # would decode to -radius, not zero).
            return np.concatenate([new_partial_bits, q.encode(np.zeros(d))])
        if t == 0 and i == 0:
            iterate_bits = q.encode(u)
        return np.concatenate([iterate_bits, new_partial_bits])

    def estimate(self, state):
        u = self.quantizer.decode(self._split(state)[0], self.d)
        nrm = float(np.linalg.norm(u))
        if nrm == 0.0:
            raise RuntimeError("iterate collapsed to numerical zero")
        return u / nrm


def wrap_iteration_as_memory_bounded(
    psi,
    quantizer: QuantizerSpec,
    d: int,
    n_samples: int,
    init: np.ndarray,
) -> QuantizedIteration:
    """Package a contraction family as a streaming algorithm.

    The state budget is exactly ``2 * d * quantizer.bits`` (iterate plus
    partial sum); pair with ``ResourceProfile(n_samples, T, 2*d*B)``.
    """
    return QuantizedIteration(psi, quantizer, d, n_samples, init)


# ---------------------------------------------------------------------------
# blackboard protocols


class BlackboardProtocol:
    """Deterministic public-transcript protocol over m shards.

    ``select_writer`` sees only the transcript prefix (and the round
    number); ``next_bit`` additionally sees the chosen machine's shard
    and nothing else, which structurally prevents cross-shard reads.
    ``estimate`` maps the final transcript alone to the output.
    """

    def select_writer(self, round_index: int, transcript: np.ndarray) -> int:
        raise NotImplementedError

    def next_bit(self, shard: np.ndarray, round_index: int, transcript: np.ndarray) -> int:
        raise NotImplementedError

    def estimate(self, transcript: np.ndarray) -> np.ndarray:
        raise NotImplementedError


@dataclass
class Blackboard:
    """Public transcript: bits in write order plus the writer log."""

    bits: np.ndarray
    writers: np.ndarray
    m: int
    n: int
    b: int

    def dump_text(self) -> str:
        lines = [
            f"{t} {int(self.writers[t])} {int(self.bits[t])}"
            for t in range(len(self.bits))
        ]
        return "\n".join(lines) + "\n"

    def audit(self, protocol: BlackboardProtocol) -> bool:
        """Replay writer selection from transcript prefixes alone."""
        for t in range(len(self.bits)):
            if protocol.select_writer(t, self.bits[:t]) != int(self.writers[t]):
                return False
        return True


def run_distributed(
    protocol: BlackboardProtocol,
    shards: list[np.ndarray],
    m: int,
    n: int,
    b: int,
) -> tuple[EstimateReport, Blackboard]:
    """Run m*b rounds of one-bit writes and estimate from the transcript."""
    if len(shards) != m:
        raise ValueError(f"got {len(shards)} shards for m = {m}")
    if any(np.asarray(shard).shape[0] != n for shard in shards):
        raise ValueError(f"every shard must hold n = {n} samples")
    rounds = m * b
    bits = np.zeros(rounds, dtype=np.uint8)
    writers = np.zeros(rounds, dtype=np.int64)
    written = [0] * m
    for t in range(rounds):
        writer = int(protocol.select_writer(t, bits[:t]))
        if not 0 <= writer < m:
            raise ValueError(f"writer {writer} out of range at round {t}")
        written[writer] += 1
        if written[writer] > b:
            raise RuntimeError(
                f"machine {writer} selected for more than b = {b} rounds"
            )
        bit = int(protocol.next_bit(shards[writer], t, bits[:t]))
        if bit not in (0, 1):
            raise ValueError(f"protocol wrote a non-bit value {bit} at round {t}")
        bits[t] = bit
        writers[t] = writer
    if any(count != b for count in written):
        raise RuntimeError(f"per-machine round counts {written} != b = {b}")
    out = np.asarray(protocol.estimate(bits.copy()), dtype=np.float64)
    board = Blackboard(bits=bits, writers=writers, m=m, n=n, b=b)
    report = EstimateReport(
        estimate=out,
        overlap=None,
        iterations=rounds,
        converged=True,
        wall_ms=0.0,
        info={"transcript_bits": rounds},
    )
    return report, board


# ---------------------------------------------------------------------------
# simulation reduction


class _StateHandoffProtocol(BlackboardProtocol):
    """Blackboard simulation of a streaming algorithm.

    Turn q (a block of s consecutive rounds) belongs to machine q mod m
    and simulates pass q // m of the streaming run over that machine's
    shard, starting from the state written in turn q - 1 (all zeros for
    q = 0).  Every machine takes exactly T turns, so it writes exactly
    s*T = b bits.  Per-turn output states are memoized on (turn, input
    state) because each of the s bit functions recomputes the same local
    pass from the public prefix.
    """

    def __init__(self, algorithm: MemoryBoundedAlgorithm, profile: ResourceProfile, n: int):
        self.algorithm = algorithm
        self.profile = profile
        self.n = n
        self.m = profile.samples // n
        self.s = profile.state_bits
        self._chunk_cache: dict = {}

    def select_writer(self, round_index, transcript):
        return (round_index // self.s) % self.m

    def _turn_output(self, shard, turn, transcript):
        s = self.s
        if turn == 0:
            prev = np.zeros(s, dtype=np.uint8)
        else:
            prev = np.asarray(transcript[(turn - 1) * s : turn * s], dtype=np.uint8)
        key = (turn, prev.tobytes())
        cached = self._chunk_cache.get(key)
        if cached is not None:
            return cached
        t = turn // self.m
        machine = turn % self.m
        state = prev
        for local in range(self.n):
            i = machine * self.n + local
            state = _check_state(
                self.algorithm.update(state, t, i, shard[local]), s
            )
        self._chunk_cache[key] = state
        return state

    def next_bit(self, shard, round_index, transcript):
        turn = round_index // self.s
        return int(self._turn_output(shard, turn, transcript)[round_index % self.s])

    def estimate(self, transcript):
        final = np.asarray(transcript[-self.s :], dtype=np.uint8)
        return self.algorithm.estimate(final)


def reduce_memory_to_distributed(
    algorithm: MemoryBoundedAlgorithm,
    profile: ResourceProfile,
    n: int,
) -> tuple[BlackboardProtocol, int, int, int]:
    """Simulation with parameters (m, n, b) = (N/n, n, s*T).

    Returns ``(protocol, m, n, b)``; running the protocol on the
    row-contiguous shards of the same stream reproduces the streaming
    estimate bit for bit, because turns visit (pass, machine) in the
    same order the streaming runner visits (pass, sample index).
    """
    if profile.samples % n != 0:
        raise ValueError(f"n = {n} does not divide N = {profile.samples}")
    if algorithm.state_bits != profile.state_bits:
        raise ValueError("algorithm and profile disagree on state bits")
    protocol = _StateHandoffProtocol(algorithm, profile, n)
    return protocol, profile.samples // n, n, profile.state_bits * profile.passes


def shard_stream(data: np.ndarray, n: int) -> list[np.ndarray]:
    """Split a stream into row-contiguous shards of n samples each."""
    data = np.asarray(data)
    if data.shape[0] % n != 0:
        raise ValueError(f"n = {n} does not divide {data.shape[0]} rows")
    return [data[j : j + n] for j in range(0, data.shape[0], n)]
