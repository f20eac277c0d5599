"""Discovery of minimal graphs that produce a target state.

The search follows the usual topological-optimization recipe: start from
every edge the locality constraint allows, fit the weights, then delete edges
one at a time (smallest magnitude first), re-fitting after every deletion and
keeping the deletion only if the target is still reached.  Independent random
restarts are reduced deterministically.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .graph import (
    Edge,
    EdgeKey,
    Graph,
    GraphError,
    StateVector,
    Topology,
    compile_topology,
    count_colored_matchings,
    state_from_graph,
)
from .states import (
    DegenerateStateError,
    LocationLayout,
    TargetState,
    extend_with_ancillas,
    fidelity,
)

logger = logging.getLogger(__name__)

JOBS_ENV = "PATHGRAPH_JOBS"

CONSTRAINT_MODES = ("forbid-cross-location", "none")


class UnrealizableTopologyError(GraphError):
    """The topology has no perfect matching, so it produces no coincidences."""


class LargeInstanceError(GraphError):
    """The complete allowed topology is too large to enumerate without opt-in."""


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 50
    loss_threshold: float = 1e-3
    triage_threshold: float = 1e-2
    max_iterations: int = 300
    weight_bound: float = 1.0
    complex_weights: bool = False
    # stop once this many restarts (counted in seed order) meet the threshold
    stop_after: int | None = 3
    # extra random-init attempts before an edge is frozen during pruning
    prune_retries: int = 1
    max_matchings: int = 10**7
    allow_large: bool = False


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to search for one experiment.

    ``target`` lives on the payoff vertices; ``dims`` covers every vertex.
    ``target_source`` remembers the builder call (``{"builder": ..., "params": ...}``)
    so spec files round-trip without expanding the target.
    """

    layout: LocationLayout
    dims: tuple[int, ...]
    target: TargetState
    constraint: str = "forbid-cross-location"
    config: OptimizerConfig = field(default_factory=OptimizerConfig)
    seed: int = 0
    ancilla_modes: tuple[int, ...] | None = None
    name: str = ""
    notes: str = ""
    target_source: dict | None = None
    # ancilla counts to try when the spec leaves them open; dims then cover payoff only
    ancilla_sweep: tuple[int, ...] | None = None
    ancilla_dim: int = 2

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if self.ancilla_modes is not None:
            object.__setattr__(self, "ancilla_modes", tuple(int(m) for m in self.ancilla_modes))
        if self.ancilla_sweep is not None:
            object.__setattr__(self, "ancilla_sweep", tuple(int(k) for k in self.ancilla_sweep))

    @property
    def n_vertices(self) -> int:
        return self.layout.n_vertices

    def problems(self) -> list[str]:
        out = list(self.layout.problems())
        n = self.layout.n_vertices
        if n % 2:
            out.append(f"odd vertex count {n}: no perfect matchings possible")
        if len(self.dims) != n:
            out.append(f"dims has {len(self.dims)} entries for {n} vertices")
        elif not out:
            payoff_dims = tuple(self.dims[v] for v in self.layout.payoff)
            if payoff_dims != tuple(self.target.dims):
                out.append(f"target dims {self.target.dims} do not match payoff dims {payoff_dims}")
        if any(d < 2 for d in self.dims):
            out.append("every vertex needs dimension >= 2")
        if self.constraint not in CONSTRAINT_MODES:
            out.append(f"unknown constraint {self.constraint!r}")
        if self.ancilla_modes is not None and len(self.ancilla_modes) != len(self.layout.ancillas):
            out.append("ancilla_modes needs one entry per ancilla")
        return out

    def allows(self, u: int, v: int) -> bool:
        return self.constraint == "none" or not self.layout.crosses(u, v)

    def full_target(self) -> TargetState:
        anc = self.layout.ancillas
        return extend_with_ancillas(
            self.target,
            self.layout,
            [self.dims[a] for a in anc],
            0 if self.ancilla_modes is None else self.ancilla_modes,
        )


@dataclass
class Solution:
    graph: Graph
    loss: float
    fidelity: float
    success: bool = True
    seed: int = 0
    restart: int = 0
    restarts_used: int = 0
    wall_time: float | None = None
    trace: list[dict] = field(default_factory=list)
    message: str = ""

    @property
    def state(self) -> StateVector:
        return state_from_graph(self.graph)


def constraint_violations(graph: Graph, spec: ExperimentSpec) -> list[EdgeKey]:
    """Edges joining payoff vertices at different sites, when the spec forbids them."""
    return [e.key for e in graph.edges if not spec.allows(e.u, e.v)]


def allowed_pairs(spec: ExperimentSpec) -> list[tuple[int, int]]:
    n = spec.n_vertices
    return [(u, v) for u in range(n) for v in range(u + 1, n) if spec.allows(u, v)]


def init_topology(spec: ExperimentSpec) -> Graph:
    """Every allowed vertex pair with every color pair; weights start at zero."""
    edges = [
        Edge(u, v, cu, cv, 0.0)
        for u, v in allowed_pairs(spec)
        for cu, cv in product(range(spec.dims[u]), range(spec.dims[v]))
    ]
    return Graph(spec.n_vertices, spec.dims, tuple(edges))


def complete_matching_count(spec: ExperimentSpec) -> int:
    pairs = set(allowed_pairs(spec))
    dims = spec.dims
    return count_colored_matchings(
        spec.n_vertices, lambda u, v: dims[u] * dims[v] if (u, v) in pairs else 0
    )


class Objective:
    """Infidelity ``1 - F`` over a fixed topology as a function of real parameters.

    Real mode uses one parameter per edge.  Complex mode stacks real parts then
    imaginary parts.
    """

    def __init__(self, topology: Topology, target: StateVector, complex_weights: bool = False):
        self.topology = topology
        self.complex_weights = complex_weights
        index = {k: i for i, k in enumerate(topology.ket_tuples())}
        self.target_vec = np.zeros(topology.n_kets, dtype=complex)
        for ket, amp in target.amplitudes.items():
            if ket in index:
                self.target_vec[index[ket]] = amp
        self.target_norm2 = float(sum(abs(a) ** 2 for a in target.amplitudes.values()))
        if not np.any(self.target_vec.imag):
            self.target_vec = self.target_vec.real.copy()

    @property
    def n_edges(self) -> int:
        return len(self.topology.keys)

    @property
    def n_params(self) -> int:
        return self.n_edges * (2 if self.complex_weights else 1)

    def weights(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.complex_weights:
            return x[: self.n_edges] + 1j * x[self.n_edges:]
        return x

    def params(self, weights: np.ndarray) -> np.ndarray:
        w = np.asarray(weights)
        if self.complex_weights:
            w = w.astype(complex)
            return np.concatenate([w.real, w.imag])
        return np.real(w).astype(float)

    def loss_and_grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        w = self.weights(x)
        psi = self.topology.amplitudes(w)
        norm2 = float(np.vdot(psi, psi).real)
        if norm2 <= 0.0 or self.target_norm2 == 0.0:
            return 1.0, np.zeros(self.n_params)
        s = np.vdot(self.target_vec, psi)
        abs_s2 = abs(s) ** 2
        f = abs_s2 / (norm2 * self.target_norm2)
        # dF/dx = 2 Re(sum_k conj(c_k) dpsi_k/dx)
        c = (s * self.target_vec * norm2 - abs_s2 * psi) / (norm2 ** 2 * self.target_norm2)
        g = self.topology.pullback(np.conj(c), w)
        if self.complex_weights:
            grad = np.concatenate([2 * np.real(g), -2 * np.imag(g)])
        else:
            grad = 2 * np.real(g)
        return 1.0 - f, -grad

    def loss(self, x: np.ndarray) -> float:
        return self.loss_and_grad(x)[0]

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self.loss_and_grad(x)[1]


def make_objective(graph: Graph, spec: ExperimentSpec) -> Objective:
    return Objective(compile_topology(graph), spec.full_target(), spec.config.complex_weights)


def loss_fn(weights: Sequence[complex], graph: Graph, spec: ExperimentSpec) -> float:
    """``1 - fidelity`` of ``graph`` carrying ``weights``; zero-norm states give 1."""
    obj = make_objective(graph, spec)
    return obj.loss(obj.params(np.asarray(weights)))


def gradient(weights: Sequence[complex], graph: Graph, spec: ExperimentSpec) -> np.ndarray:
    """Gradient of :func:`loss_fn` with respect to the real parameters."""
    obj = make_objective(graph, spec)
    return obj.grad(obj.params(np.asarray(weights)))


def _rescale(w: np.ndarray) -> np.ndarray:
    # Fidelity is invariant under a global weight scale; keep the largest |w| at 1.
    peak = np.max(np.abs(w)) if w.size else 0.0
    return w / peak if peak > 0 else w


def continuous_optimize(
    graph: Graph,
    spec: ExperimentSpec,
    rng: np.random.Generator,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, float]:
    """Locally minimize the infidelity over the weights of ``graph``'s topology.

    Starts from uniform random weights in ``[-b, b]`` unless ``x0`` (complex
    weights, one per edge) is given.  Returns ``(weights, loss)`` with the
    weights rescaled so the largest magnitude is 1.

    Raises
    ------
    UnrealizableTopologyError
        If the topology has no perfect matching.
    """
    cfg = spec.config
    obj = make_objective(graph, spec)
    if obj.topology.n_matchings == 0:
        raise UnrealizableTopologyError("unrealizable topology: no perfect matching")
    bound = cfg.weight_bound
    if x0 is None:
        start = rng.uniform(-bound, bound, size=obj.n_params)
    else:
        start = np.clip(obj.params(x0), -bound, bound)
    res = minimize(
        obj.loss_and_grad,
        start,
        jac=True,
        method="L-BFGS-B",
        bounds=[(-bound, bound)] * obj.n_params,
        options={"maxiter": cfg.max_iterations, "ftol": 1e-10, "gtol": 1e-12},
    )
    w = _rescale(obj.weights(res.x).astype(complex))
    return w, obj.loss(obj.params(w))


def _final_solution(graph: Graph, spec: ExperimentSpec, **kw) -> Solution:
    try:
        fid = fidelity(state_from_graph(graph), spec.full_target())
    except DegenerateStateError:
        fid = 0.0
    thr = spec.config.loss_threshold
    ok = 1.0 - fid <= thr and not constraint_violations(graph, spec)
    return Solution(graph=graph, loss=1.0 - fid, fidelity=fid, success=ok, **kw)


def topological_prune(graph: Graph, spec: ExperimentSpec, rng: np.random.Generator) -> Solution:
    """Greedily delete edges while the loss stays within the threshold.

    Candidates are tried in ascending ``|weight|`` order (ties broken by edge
    key).  After each deletion the weights are re-fitted starting from the
    current ones, with ``prune_retries`` extra random starts; a rejected edge is
    restored and frozen.  Ends when every remaining edge is frozen.
    """
    cfg = spec.config
    thr = cfg.loss_threshold
    frozen: set[EdgeKey] = set()
    trace: list[dict] = []
    current = graph
    while True:
        candidates = [e for e in current.edges if e.key not in frozen]
        if not candidates:
            break
        edge = min(candidates, key=lambda e: (abs(e.weight), e.key))
        trial = current.without(edge.key)
        warm = np.array([e.weight for e in trial.edges], dtype=complex)
        best_w, best_loss = None, np.inf
        try:
            for attempt in range(1 + cfg.prune_retries):
                w, loss = continuous_optimize(trial, spec, rng, warm if attempt == 0 else None)
                if loss < best_loss:
                    best_w, best_loss = w, loss
                if best_loss <= thr:
                    break
        except UnrealizableTopologyError:
            best_loss = 1.0
        accepted = best_loss <= thr
        trace.append({"edge": list(edge.key), "accepted": accepted, "loss": float(best_loss)})
        if accepted:
            current = trial.with_weights(best_w)
        else:
            frozen.add(edge.key)
    return _final_solution(current, spec, trace=trace)


def _run_restart(spec: ExperimentSpec, index: int) -> Solution:
    cfg = spec.config
    rng = np.random.default_rng([spec.seed, index])
    topo = init_topology(spec)
    try:
        w, loss = continuous_optimize(topo, spec, rng)
    except UnrealizableTopologyError:
        return Solution(topo, 1.0, 0.0, success=False, seed=spec.seed, restart=index,
                        message="no perfect matchings possible")
    if cfg.loss_threshold < loss <= cfg.triage_threshold:
        # promising start: polish from where it stopped
        w, loss = continuous_optimize(topo, spec, rng, w)
    if loss > cfg.loss_threshold:
        fitted = topo.with_weights(w)
        sol = _final_solution(fitted, spec, seed=spec.seed, restart=index)
        sol.success = False
        sol.message = f"restart {index} stalled at loss {loss:.3g}"
        return sol
    sol = topological_prune(topo.with_weights(w), spec, rng)
    sol.seed, sol.restart = spec.seed, index
    return sol


def select_best(solutions: Sequence[Solution]) -> Solution:
    """Deterministic reduction over restarts.

    Successful runs win by fewest edges, then lowest loss, then restart index;
    if none succeeded, the lowest loss wins.
    """
    good = [s for s in solutions if s.success]
    if good:
        return min(good, key=lambda s: (len(s.graph), s.loss, s.restart))
    return min(solutions, key=lambda s: (s.loss, len(s.graph), s.restart))


def default_jobs() -> int:
    env = os.environ.get(JOBS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def check_spec(spec: ExperimentSpec) -> None:
    problems = spec.problems()
    if problems:
        raise GraphError("; ".join(problems))
    total = complete_matching_count(spec)
    if total == 0:
        raise UnrealizableTopologyError("no perfect matchings possible for this layout")
    if total > spec.config.max_matchings and not spec.config.allow_large:
        raise LargeInstanceError(
            f"complete topology has {total} colored perfect matchings "
            f"(limit {spec.config.max_matchings}); pass allow_large to proceed"
        )


def discover(
    spec: ExperimentSpec,
    jobs: int = 1,
    progress: Callable[[Solution], None] | None = None,
) -> Solution:
    """Search for the smallest graph producing ``spec.target``.

    Runs restarts ``0 .. restarts-1`` (each seeded by ``(seed, index)``) and
    stops early once ``stop_after`` of them, counted in index order, succeed.
    The returned solution has ``success=False`` and carries the best attempt
    when no restart reached the loss threshold.  Results do not depend on
    ``jobs``.
    """
    start = time.perf_counter()
    check_spec(spec)
    cfg = spec.config
    results: list[Solution] = []
    jobs = max(1, int(jobs))

    def done() -> bool:
        return cfg.stop_after is not None and sum(s.success for s in results) >= cfg.stop_after

    if jobs == 1:
        for i in range(cfg.restarts):
            results.append(_run_restart(spec, i))
            if progress:
                progress(results[-1])
            if done():
                break
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for lo in range(0, cfg.restarts, jobs):
                idx = range(lo, min(lo + jobs, cfg.restarts))
                for sol in pool.map(_run_restart, [spec] * len(idx), idx):
                    results.append(sol)
                    if progress:
                        progress(sol)
                    if done():
                        break
                if done():
                    break

    best = select_best(results)
    best.restarts_used = len(results)
    best.wall_time = time.perf_counter() - start
    if not best.success:
        best.message = f"no solution found in {len(results)} restarts; best loss {best.loss:.3g}"
    return best


def with_ancillas(spec: ExperimentSpec, count: int) -> ExperimentSpec:
    """Copy of ``spec`` with ``count`` ancillas appended after the payoff vertices."""
    n_pay = len(spec.layout.payoff)
    layout = LocationLayout(spec.layout.groups, tuple(range(n_pay, n_pay + count)))
    dims = tuple(spec.dims[v] for v in spec.layout.payoff) + (spec.ancilla_dim,) * count
    return replace(spec, layout=layout, dims=dims, ancilla_modes=None, ancilla_sweep=None)
