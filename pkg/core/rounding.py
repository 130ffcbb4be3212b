"""
Max-flow rounding of fractional assignments
Floor/ceil-bounded flow network, lower-bound reduction and an integral flow via networkx's Dinitz.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import networkx as nx
from networkx.algorithms.flow import dinitz

from .config import get_settings
from .errors import FlowRoundingError
from .instance import Instance
from .lp import FractionalAssignment

logger = logging.getLogger(__name__)

SOURCE = "s"
SINK = "t"
_SUPER_SOURCE = "s*"
_SUPER_SINK = "t*"


def point_node(j: int) -> str:
    return f"p{j}"


def group_node(i: int, h: int) -> str:
    return f"c{i}g{h}"


def center_node(i: int) -> str:
    return f"c{i}"


@dataclass(frozen=True)
class Arc:
    """Directed arc with integral flow bounds."""
    tail: str
    head: str
    lower: int
    upper: int
    kind: str  # 'source', 'member', 'group', 'sink'
    center: Optional[int] = None
    point: Optional[int] = None
    group: Optional[int] = None


@dataclass
class FlowNetwork:
    """Network whose integral s-t flows of value n are roundings of the fractional assignment."""
    n: int
    centers: Tuple[int, ...]
    arcs: List[Arc] = field(default_factory=list)

    @property
    def nodes(self) -> List[str]:
        seen: Dict[str, None] = {}
        for arc in self.arcs:
            seen.setdefault(arc.tail)
            seen.setdefault(arc.head)
        return list(seen)

    def arcs_of(self, kind: str) -> List[Arc]:
        return [arc for arc in self.arcs if arc.kind == kind]

    def to_dot(self) -> str:
        """Graphviz DOT dump with [lower,upper] arc labels."""
        lines = ["digraph rounding {", "  rankdir=LR;"]
        for arc in self.arcs:
            lines.append(f'  "{arc.tail}" -> "{arc.head}" [label="[{arc.lower},{arc.upper}]"];')
        lines.append("}")
        return '\n'.join(lines) + '\n'


@dataclass(frozen=True)
class IntegralFlow:
    """Per-arc integral flow on a FlowNetwork, in arc order."""
    network: FlowNetwork
    flows: Tuple[int, ...]

    @property
    def value(self) -> int:
        return sum(f for arc, f in zip(self.network.arcs, self.flows) if arc.kind == 'source')

    def conservation_errors(self) -> List[str]:
        """Non-terminal nodes where inflow differs from outflow."""
        balance: Dict[str, int] = {}
        for arc, f in zip(self.network.arcs, self.flows):
            balance[arc.tail] = balance.get(arc.tail, 0) - f
            balance[arc.head] = balance.get(arc.head, 0) + f
        return [node for node, b in balance.items() if node not in (SOURCE, SINK) and b != 0]


@dataclass(frozen=True)
class IntegralAssignment:
    """Every point mapped to exactly one center."""
    assignment: Tuple[int, ...]
    centers: Tuple[int, ...]

    def cluster_sizes(self) -> Dict[int, int]:
        sizes = {center: 0 for center in self.centers}
        for center in self.assignment:
            sizes[center] += 1
        return sizes


def _snap(value: float, eps: float) -> float:
    nearest = round(value)
    return float(nearest) if abs(value - nearest) <= eps else value


def build_network(frac: FractionalAssignment, inst: Instance, snap_eps: Optional[float] = None) -> FlowNetwork:
    """Source -> point -> (center, group) -> center -> sink, bounded by floor/ceil of the masses."""
    settings = get_settings()
    snap_eps = settings.snap_eps if snap_eps is None else snap_eps
    problems = frac.structural_violations(inst, settings.tol)
    if problems:
        raise FlowRoundingError(f"fractional assignment is invalid: {problems[0]}")

    net = FlowNetwork(n=inst.n, centers=frac.centers)
    labels = inst.groups.labels
    for j in range(inst.n):
        net.arcs.append(Arc(SOURCE, point_node(j), 0, 1, 'source', point=j))

    group_mass: Dict[Tuple[int, int], float] = {}
    for s, center in enumerate(frac.centers):
        for j in range(inst.n):
            x = frac.values[s, j]
            if x > 0:
                h = labels[j]
                net.arcs.append(Arc(point_node(j), group_node(center, h), 0, 1, 'member', center, j, h))
                group_mass[(center, h)] = group_mass.get((center, h), 0.0) + float(x)

    for (center, h), mass in sorted(group_mass.items()):
        mass = _snap(mass, snap_eps)
        net.arcs.append(Arc(
            group_node(center, h), center_node(center),
            math.floor(mass), math.ceil(mass), 'group', center=center, group=h,
        ))

    for center in frac.centers:
        mass = _snap(frac.center_mass(center), snap_eps)
        net.arcs.append(Arc(center_node(center), SINK, math.floor(mass), math.ceil(mass), 'sink', center=center))

    logger.debug(f"Flow network: {len(net.arcs)} arcs, {len(group_mass)} (center, group) nodes")
    return net


def _arc_flow(residual: nx.DiGraph, arc: Arc) -> int:
    # Zero-capacity arcs (lower == upper) never enter the residual network
    if arc.lower == arc.upper:
        return arc.lower
    pushed = residual[arc.tail].get(arc.head, {}).get('flow', 0)
    return arc.lower + max(0, int(pushed))


def max_flow_integral(net: FlowNetwork) -> IntegralFlow:
    """Integral s-t flow of value n respecting every arc's bounds."""
    excess: Dict[str, int] = {}
    graph = nx.DiGraph()

    def add(tail: str, head: str, lower: int, upper: int) -> None:
        if lower > upper:
            raise FlowRoundingError(f"arc {tail}->{head} has lower bound {lower} above upper bound {upper}")
        graph.add_edge(tail, head, capacity=upper - lower)
        excess[head] = excess.get(head, 0) + lower
        excess[tail] = excess.get(tail, 0) - lower

    for arc in net.arcs:
        add(arc.tail, arc.head, arc.lower, arc.upper)
    # Return arc pinned at n forces the s-t value to n
    add(SINK, SOURCE, net.n, net.n)

    graph.add_node(_SUPER_SOURCE)
    graph.add_node(_SUPER_SINK)
    demand = 0
    for node, amount in excess.items():
        if amount > 0:
            graph.add_edge(_SUPER_SOURCE, node, capacity=amount)
            demand += amount
        elif amount < 0:
            graph.add_edge(node, _SUPER_SINK, capacity=-amount)

    residual = dinitz(graph, _SUPER_SOURCE, _SUPER_SINK, capacity='capacity')
    value = residual.graph['flow_value']
    if value != demand:
        logger.error(f"Rounding flow saturates {value} of {demand} units")
        raise FlowRoundingError(f"no feasible integral flow: saturated {value} of {demand} lower-bound units")

    flows = tuple(_arc_flow(residual, arc) for arc in net.arcs)
    result = IntegralFlow(network=net, flows=flows)
    if result.value != net.n:
        raise FlowRoundingError(f"integral flow has value {result.value}, expected {net.n}")
    return result


def round_assignment(frac: FractionalAssignment, inst: Instance) -> IntegralAssignment:
    """Round a fractional assignment, keeping cluster and group counts within floor/ceil."""
    flow = max_flow_integral(build_network(frac, inst))
    assignment: List[Optional[int]] = [None] * inst.n
    for arc, f in zip(flow.network.arcs, flow.flows):
        if arc.kind == 'member' and f == 1:
            if assignment[arc.point] is not None:
                raise FlowRoundingError(f"point {arc.point} routed to two centers")
            assignment[arc.point] = arc.center
    missing = [j for j, center in enumerate(assignment) if center is None]
    if missing:
        raise FlowRoundingError(f"point {missing[0]} received no center")
    logger.info(f"Rounded fractional assignment over {len(frac.centers)} centers")
    return IntegralAssignment(assignment=tuple(assignment), centers=frac.centers)
