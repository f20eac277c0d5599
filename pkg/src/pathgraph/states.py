"""Target states, ancilla extension, fidelity and Schmidt-rank vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

import numpy as np

from .graph import GraphError, Ket, StateVector

#: Relative singular-value cutoff used when counting Schmidt ranks.
SRV_RTOL = 1e-10


class DegenerateStateError(GraphError):
    """A state with zero norm was passed where an overlap is needed."""


@dataclass(frozen=True)
class TargetState(StateVector):
    """A :class:`StateVector` built from a closed-form expression.

    Targets are stored over the payoff vertices only; see
    :func:`extend_with_ancillas` for the full-experiment version.
    """

    normalized_flag: bool = True

    @property
    def n_payoff(self) -> int:
        return len(self.dims)


def _uniform(dims: Sequence[int], kets: Sequence[Ket]) -> TargetState:
    amp = 1.0 / math.sqrt(len(kets))
    return TargetState(tuple(dims), {tuple(k): amp for k in kets})


def ghz_state(n: int, d: int = 2) -> TargetState:
    """``(|0...0> + |1...1> + ... + |d-1...d-1>) / sqrt(d)`` over ``n`` particles."""
    if n < 2:
        raise ValueError(f"GHZ state needs n >= 2 particles, got {n}")
    if d < 2:
        raise ValueError(f"GHZ state needs dimension d >= 2, got {d}")
    return _uniform((d,) * n, [(m,) * n for m in range(d)])


def w_state(n: int) -> TargetState:
    """Equal superposition of the ``n`` kets with a single excitation."""
    if n < 2:
        raise ValueError(f"W state needs n >= 2 particles, got {n}")
    kets = [tuple(int(i == j) for j in range(n)) for i in range(n)]
    return _uniform((2,) * n, kets)


def srv_422_state() -> TargetState:
    """Three-party state with Schmidt-rank vector (4, 2, 2)."""
    return _uniform((4, 2, 2), [(3, 1, 1), (2, 1, 0), (1, 0, 1), (0, 0, 0)])


def _digits(s: str) -> Ket:
    return tuple(int(c) for c in s)


# Logical codewords: each entry lists the physical kets of |j_L>, equal weights.
CODEWORDS = {
    "repetition3": (["000"], ["111"]),
    "surface412": (["0000", "1111"], ["0011", "1100"]),
    "qutrit312": (["000", "111", "222"], ["012", "120", "201"], ["021", "102", "210"]),
    "ampdamp413": (["0000", "1111", "2222"], ["0011", "1122", "2200"], ["1100", "2211", "0022"]),
}

# Codes whose partner at site B is one physical carrier instead of a second block.
_HYBRID = {"qutrit312", "ampdamp413"}

LOGICAL_CODES = tuple(CODEWORDS)


def logical_bell(code: str) -> TargetState:
    """Maximally entangled pair of logical systems for one of the built-in codes.

    ``repetition3`` and ``surface412`` entangle two encoded qubits.  The qutrit
    codes ``qutrit312`` and ``ampdamp413`` entangle one encoded qutrit with a
    single physical qutrit appended as the last vertex.
    """
    if code not in CODEWORDS:
        raise ValueError(f"unknown code {code!r}; expected one of {', '.join(CODEWORDS)}")
    words = CODEWORDS[code]
    d = len(words)
    block = len(words[0][0])
    amps: dict[Ket, complex] = {}
    for j, word in enumerate(words):
        logical = 1.0 / math.sqrt(len(word))
        if code in _HYBRID:
            for w in word:
                amps[_digits(w) + (j,)] = logical / math.sqrt(d)
        else:
            for wa, wb in product(word, word):
                amps[_digits(wa) + _digits(wb)] = logical * logical / math.sqrt(d)
    n = block + 1 if code in _HYBRID else 2 * block
    return TargetState((d,) * n, amps)


def build_target(name: str, **params) -> TargetState:
    """Dispatch on a builder name as used in spec files and the CLI."""
    name = name.replace("_", "-").lower()
    if name in ("ghz", "bell"):
        n = int(params.get("n", 2))
        return ghz_state(n, int(params.get("d", 2)))
    if name == "w":
        return w_state(int(params.get("n", 3)))
    if name in ("srv422", "srv-422"):
        return srv_422_state()
    if name == "logical-bell":
        if "code" not in params:
            raise ValueError("logical-bell needs a 'code' parameter")
        return logical_bell(str(params["code"]))
    raise ValueError(f"unknown target {name!r}")


TARGET_NAMES = ("ghz", "bell", "w", "srv422", "logical-bell")


@dataclass(frozen=True)
class LocationLayout:
    """Payoff vertices grouped by physical site, plus heralding ancillas.

    Payoff vertex ``i`` of a target ket is the ``i``-th smallest vertex index
    over all groups.
    """

    groups: Mapping[str, tuple[int, ...]]
    ancillas: tuple[int, ...] = ()
    _group_of: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        groups = {str(k): tuple(int(v) for v in vs) for k, vs in self.groups.items()}
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "ancillas", tuple(int(a) for a in self.ancillas))
        object.__setattr__(self, "_group_of", {v: g for g, vs in groups.items() for v in vs})

    def problems(self) -> list[str]:
        seen: dict[int, str] = {}
        out = []
        for name, vs in list(self.groups.items()) + [("ancillas", self.ancillas)]:
            for v in vs:
                if v in seen:
                    out.append(f"vertex {v} appears in both {seen[v]!r} and {name!r}")
                seen[v] = name
        n = len(seen)
        missing = sorted(set(range(n)) - set(seen))
        if missing or any(v < 0 or v >= n for v in seen):
            out.append(f"vertices must be exactly 0..{n - 1}; got {sorted(seen)}")
        return out

    @property
    def payoff(self) -> tuple[int, ...]:
        return tuple(sorted(self._group_of))

    @property
    def n_vertices(self) -> int:
        return len(self._group_of) + len(self.ancillas)

    def group_of(self, vertex: int) -> str | None:
        return self._group_of.get(vertex)

    def crosses(self, u: int, v: int) -> bool:
        """True if ``u`` and ``v`` are payoff vertices at different sites."""
        gu, gv = self._group_of.get(u), self._group_of.get(v)
        return gu is not None and gv is not None and gu != gv


def extend_with_ancillas(
    target: StateVector,
    layout: LocationLayout,
    ancilla_dims: Sequence[int] | int = 2,
    ancilla_modes: Sequence[int] | int = 0,
) -> TargetState:
    """Tensor ``target`` with every ancilla fixed to its herald mode (0 by default)."""
    payoff = layout.payoff
    if len(payoff) != target.n_vertices:
        raise ValueError(
            f"layout has {len(payoff)} payoff vertices but target has {target.n_vertices}"
        )
    n_anc = len(layout.ancillas)
    if isinstance(ancilla_dims, int):
        ancilla_dims = (ancilla_dims,) * n_anc
    if isinstance(ancilla_modes, int):
        ancilla_modes = (ancilla_modes,) * n_anc
    if len(ancilla_dims) != n_anc or len(ancilla_modes) != n_anc:
        raise ValueError("ancilla dims/modes must have one entry per ancilla")

    n = layout.n_vertices
    dims = [0] * n
    base = [0] * n
    for i, v in enumerate(payoff):
        dims[v] = target.dims[i]
    for a, d, m in zip(layout.ancillas, ancilla_dims, ancilla_modes):
        dims[a], base[a] = d, m
    amps = {}
    for ket, amp in target.amplitudes.items():
        full = list(base)
        for i, v in enumerate(payoff):
            full[v] = ket[i]
        amps[tuple(full)] = amp
    return TargetState(tuple(dims), amps, getattr(target, "normalized_flag", True))


def overlap(a: StateVector, b: StateVector) -> complex:
    """``<a|b>`` over the shared sparse support."""
    small, large = (a, b) if len(a) <= len(b) else (b, a)
    s = sum(small.amplitudes[k].conjugate() * large.amplitudes[k]
            for k in small.amplitudes if k in large.amplitudes)
    return complex(s) if small is a else complex(s).conjugate()


def fidelity(state: StateVector, target: StateVector) -> float:
    """Normalized squared overlap ``|<t|psi>|^2 / (<psi|psi> <t|t>)``.

    Raises
    ------
    DegenerateStateError
        If either argument has zero norm (the graph produces no coincidences).
    """
    if tuple(state.dims) != tuple(target.dims):
        raise ValueError(f"dims differ: {state.dims} vs {target.dims}")
    ns = sum(abs(x) ** 2 for x in state.amplitudes.values())
    nt = sum(abs(x) ** 2 for x in target.amplitudes.values())
    if ns == 0.0 or nt == 0.0:
        raise DegenerateStateError("zero-norm state: the graph has no surviving perfect matching")
    f = abs(overlap(target, state)) ** 2 / (ns * nt)
    return min(1.0, f)


def _check_partition(partition, n_vertices: int, required=None) -> list[tuple[int, ...]]:
    parts = [tuple(int(v) for v in p) for p in partition]
    seen = set()
    for p in parts:
        if not p:
            raise ValueError("empty party in partition")
        for v in p:
            if not 0 <= v < n_vertices:
                raise ValueError(f"vertex {v} out of range for {n_vertices} vertices")
            if v in seen:
                raise ValueError(f"overlapping partition: vertex {v} listed twice")
            seen.add(v)
    required = set(range(n_vertices)) if required is None else set(required)
    missing = sorted(required - seen)
    if missing:
        raise ValueError(f"incomplete partition: vertices {missing} not assigned to a party")
    return parts


def schmidt_rank_vector(
    state: StateVector,
    partition: Sequence[Sequence[int]] | None = None,
    required: Sequence[int] | None = None,
) -> tuple[int, ...]:
    """Rank of each party's reduced density operator.

    Each rank is the numerical rank of the coefficient matrix with the party's
    indices as rows and all other vertices as columns; singular values above
    ``SRV_RTOL`` times the largest one count.  Only kets in the support are
    materialized, so large registers are cheap for sparse states.

    Parameters
    ----------
    partition : list of vertex groups, default one party per vertex
    required : vertices the partition must cover, default all of them
    """
    n = state.n_vertices
    if partition is None:
        partition = [(v,) for v in range(n)] if required is None else [(v,) for v in required]
    parts = _check_partition(partition, n, required)
    items = [(k, a) for k, a in state.amplitudes.items() if a != 0]
    if not items:
        return tuple(0 for _ in parts)
    ranks = []
    for p in parts:
        rest = [v for v in range(n) if v not in p]
        rows: dict[tuple, int] = {}
        cols: dict[tuple, int] = {}
        entries = []
        for ket, amp in items:
            r = rows.setdefault(tuple(ket[v] for v in p), len(rows))
            c = cols.setdefault(tuple(ket[v] for v in rest), len(cols))
            entries.append((r, c, amp))
        mat = np.zeros((len(rows), len(cols)), dtype=complex)
        for r, c, amp in entries:
            mat[r, c] += amp
        sv = np.linalg.svd(mat, compute_uv=False)
        ranks.append(int(np.sum(sv > SRV_RTOL * sv[0])) if sv.size and sv[0] > 0 else 0)
    return tuple(ranks)
