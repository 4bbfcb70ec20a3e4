"""Independent ground truth for tests: state-space models and probing.

The builder derives the state matrix of a passive RLC network straight from
branch/loop physics (inductor currents and capacitor voltages as states), so
its eigenvalues can cross-check the determinant-zero route without sharing
any code with it.  The finite-difference prober re-solves perturbed networks
and tracks modes by nearest neighbour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modes import find_modes
from .network import (
    Branch,
    NetworkModel,
    Node,
    RationalBlock,
    SeriesRL,
    Shunt,
    ShuntCapacitor,
    ShuntRLC,
    SpectrumRef,
    build_ynodal,
)


class OracleScopeError(ValueError):
    """The state-space oracle only covers passive RLC networks."""


class TrackingError(RuntimeError):
    """Perturbed-mode matching was ambiguous."""


@dataclass(frozen=True)
class StateSpace:
    """State matrix with one state per inductor current / capacitor voltage."""

    matrix: np.ndarray
    labels: tuple

    @property
    def order(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.matrix)


def build_state_space(net: NetworkModel) -> StateSpace:
    """State matrix of a passive RLC network.

    States are capacitor voltages (one per node, capacitances at a node
    combine) followed by inductor currents (one per series RL leg, shunt or
    branch).  Every node must carry shunt capacitance, otherwise the KCL row
    for that node would be algebraic rather than dynamic.
    """
    for comp in net.components():
        if isinstance(comp.kind, (RationalBlock, SpectrumRef)):
            raise OracleScopeError("oracle supports passive RLC only")
    if any(node.ports != 1 for node in net.nodes):
        raise OracleScopeError("oracle supports single-port nodes only")

    node_ids = [n.id for n in net.nodes]
    cap = {nid: 0.0 for nid in node_ids}
    legs = []  # (label, node, R, L) shunt RL legs
    for sh in net.shunts:
        if isinstance(sh.kind, ShuntCapacitor):
            cap[sh.node] += sh.kind.capacitance
        elif isinstance(sh.kind, ShuntRLC):
            cap[sh.node] += sh.kind.capacitance
            legs.append((f"i_{sh.name}", sh.node, sh.kind.resistance, sh.kind.inductance))
        elif isinstance(sh.kind, SeriesRL):
            legs.append((f"i_{sh.name}", sh.node, sh.kind.resistance, sh.kind.inductance))
    capless = [nid for nid, c in cap.items() if c <= 0.0]
    if capless:
        raise OracleScopeError(
            f"nodes {capless} carry no shunt capacitance; "
            "the oracle needs a capacitor at every node"
        )

    v_index = {nid: k for k, nid in enumerate(node_ids)}
    labels = [f"v_{nid}" for nid in node_ids]
    n_nodes = len(node_ids)
    order = n_nodes + len(legs) + len(net.branches)
    a = np.zeros((order, order))

    # shunt RL legs: L di/dt = v_node - R i ; KCL: C dv/dt -= i
    for k, (label, node, r, l) in enumerate(legs):
        row = n_nodes + k
        labels.append(label)
        a[row, v_index[node]] = 1.0 / l
        a[row, row] = -r / l
        a[v_index[node], row] = -1.0 / cap[node]

    # branches: L di/dt = v_a - v_b - R i ; current leaves a, enters b
    for k, br in enumerate(net.branches):
        row = n_nodes + len(legs) + k
        labels.append(f"i_{br.name}")
        r, l = br.kind.resistance, br.kind.inductance
        a[row, v_index[br.node_a]] = 1.0 / l
        a[row, v_index[br.node_b]] = -1.0 / l
        a[row, row] = -r / l
        a[v_index[br.node_a], row] += -1.0 / cap[br.node_a]
        a[v_index[br.node_b], row] += 1.0 / cap[br.node_b]

    return StateSpace(a, tuple(labels))


def track_mode(modes, target: complex) -> complex:
    """Nearest mode to ``target``; errors out when the match is ambiguous."""
    values = np.array([m.eigenvalue for m in modes])
    if values.size == 0:
        raise TrackingError("no modes to track")
    dist = np.abs(values - target)
    order = np.argsort(dist)
    best = values[order[0]]
    if order.size > 1 and dist[order[1]] <= 10.0 * dist[order[0]]:
        raise TrackingError("tracking failure; reduce the perturbation")
    return complex(best)


def finite_difference_dlambda(net: NetworkModel, component: str, param: str,
                              mode_value: complex, rel_step: float) -> complex:
    """Central-difference mode derivative w.r.t. one physical parameter.

    The parameter is bumped by ``rel_step`` relatively in both directions,
    modes are re-extracted from scratch and matched to ``mode_value`` by
    nearest neighbour.
    """
    if rel_step <= 0:
        raise ValueError("relative step must be positive")
    rho = net.component(component).kind.params[param]
    shifted = []
    for sign in (+1.0, -1.0):
        bumped = net.with_param(component, param, rho * (1.0 + sign * rel_step))
        shifted.append(track_mode(find_modes(build_ynodal(bumped)), mode_value))
    return (shifted[0] - shifted[1]) / (2.0 * rel_step * rho)


def random_rlc_network(rng: np.random.Generator, n_nodes: int | None = None,
                       extra_edge_prob: float = 0.3) -> NetworkModel:
    """Connected random RLC network for the identity test suites.

    Every node gets a shunt RLC with log-uniform parameters in [0.1, 10];
    branches form a random spanning tree plus optional extra edges.
    """
    if n_nodes is None:
        n_nodes = int(rng.integers(2, 6))

    def draw() -> float:
        return float(10.0 ** rng.uniform(-1.0, 1.0))

    nodes = [Node(i + 1) for i in range(n_nodes)]
    shunts = [
        Shunt(i + 1, ShuntRLC(draw(), draw(), draw()), f"A{i + 1}")
        for i in range(n_nodes)
    ]
    edges = set()
    order = rng.permutation(n_nodes) + 1
    for k in range(1, n_nodes):
        attach = int(order[int(rng.integers(0, k))])
        edges.add(tuple(sorted((int(order[k]), attach))))
    for a in range(1, n_nodes + 1):
        for b in range(a + 1, n_nodes + 1):
            if (a, b) not in edges and rng.random() < extra_edge_prob:
                edges.add((a, b))
    branches = [
        Branch(a, b, SeriesRL(draw(), draw()), f"B{a}-{b}")
        for a, b in sorted(edges)
    ]
    return NetworkModel(nodes, shunts, branches)
