"""Discrete structural causal models with an intervention oracle.

Supports exact evaluation of back-door and front-door adjustment on small
categorical DAGs, with structural (path-enumeration) criterion checks.
Probabilities below EPS are treated as zero when conditioning.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

EPS = 1e-12


class CriterionError(ValueError):
    """An adjustment set fails its structural criterion."""


@dataclass(frozen=True)
class Variable:
    name: str
    cardinality: int
    parents: tuple


class DiscreteSCM:
    """Categorical Bayesian-network representation of an SCM.

    ``cpts[name]`` has shape (card(parent_1), ..., card(parent_k), card(name))
    and every conditional slice sums to 1.
    """

    def __init__(self, variables, cpts):
        self.variables = [Variable(n, int(c), tuple(p)) for n, c, p in variables]
        self.index = {v.name: i for i, v in enumerate(self.variables)}
        if len(self.index) != len(self.variables):
            raise ValueError("duplicate variable name")
        self.cpts = {}
        for v in self.variables:
            for p in v.parents:
                if p not in self.index:
                    raise ValueError(f"{v.name}: unknown parent {p!r}")
            cpt = np.asarray(cpts[v.name], dtype=np.float64)
            want = tuple(self.variables[self.index[p]].cardinality for p in v.parents)
            want += (v.cardinality,)
            if cpt.shape != want:
                raise ValueError(f"{v.name}: cpt shape {cpt.shape}, expected {want}")
            sums = cpt.sum(axis=-1)
            if not np.allclose(sums, 1.0, atol=1e-12, rtol=0.0):
                raise ValueError(f"{v.name}: cpt rows must sum to 1")
            if np.any(cpt < 0):
                raise ValueError(f"{v.name}: negative probability")
            self.cpts[v.name] = cpt
        self._check_acyclic()

    def _check_acyclic(self):
        order, seen = [], set()
        remaining = {v.name: set(v.parents) for v in self.variables}
        while remaining:
            roots = [n for n, p in remaining.items() if p <= seen]
            if not roots:
                raise ValueError(f"cycle among {sorted(remaining)}")
            for n in roots:
                seen.add(n)
                order.append(n)
                del remaining[n]
        self.topological = order

    def cardinality(self, name: str) -> int:
        return self.variables[self.index[name]].cardinality

    def children(self, name: str):
        return [v.name for v in self.variables if name in v.parents]

    def descendants(self, name: str) -> set:
        out, stack = set(), [name]
        while stack:
            for child in self.children(stack.pop()):
                if child not in out:
                    out.add(child)
                    stack.append(child)
        return out

    def with_intervention(self, name: str, value: int) -> "DiscreteSCM":
        """Mutilated model: cut incoming edges, fix the variable's value."""
        card = self.cardinality(name)
        if not 0 <= value < card:
            raise ValueError(f"value {value} out of range for {name!r}")
        variables, cpts = [], {}
        for v in self.variables:
            if v.name == name:
                point = np.zeros(card)
                point[value] = 1.0
                variables.append((v.name, v.cardinality, ()))
                cpts[v.name] = point
            else:
                variables.append((v.name, v.cardinality, v.parents))
                cpts[v.name] = self.cpts[v.name]
        return DiscreteSCM(variables, cpts)


def joint(scm: DiscreteSCM) -> np.ndarray:
    """Full joint table, axes in variable declaration order."""
    shape = tuple(v.cardinality for v in scm.variables)
    table = np.ones(shape, dtype=np.float64)
    for i, v in enumerate(scm.variables):
        axes = [scm.index[p] for p in v.parents] + [i]
        order = np.argsort(axes)
        cpt = np.transpose(scm.cpts[v.name], order)
        expanded_shape = [1] * len(shape)
        for axis in axes:
            expanded_shape[axis] = shape[axis]
        table = table * cpt.reshape(expanded_shape)
    return table


def marginal(scm_joint: np.ndarray, scm: DiscreteSCM, names) -> np.ndarray:
    """Marginalize the joint onto the named variables (in the given order)."""
    keep = [scm.index[n] for n in names]
    drop = tuple(i for i in range(len(scm.variables)) if i not in keep)
    reduced = scm_joint.sum(axis=drop) if drop else scm_joint
    kept_sorted = sorted(keep)
    return np.transpose(reduced, [kept_sorted.index(i) for i in keep])


def do_oracle(scm: DiscreteSCM, var: str, value: int, target: str = "Y") -> np.ndarray:
    """Ground-truth interventional distribution of ``target``."""
    if var not in scm.index:
        raise ValueError(f"unknown variable {var!r}")
    if target not in scm.index:
        raise ValueError(f"unknown target {target!r}")
    mutilated = scm.with_intervention(var, value)
    return marginal(joint(mutilated), mutilated, [target])


def _undirected_paths(scm: DiscreteSCM, start: str, goal: str):
    """All simple paths in the skeleton, as (nodes, arrow) lists.

    ``arrows[i]`` is True when the i-th edge points forward
    (nodes[i] -> nodes[i+1]), False when it points backward.
    """
    neighbors = {v.name: [] for v in scm.variables}
    for v in scm.variables:
        for p in v.parents:
            neighbors[p].append((v.name, True))
            neighbors[v.name].append((p, False))
    paths = []

    def walk(node, nodes, arrows):
        for nxt, forward in neighbors[node]:
            if nxt in nodes:
                continue
            if nxt == goal:
                paths.append((nodes + [nxt], arrows + [forward]))
            else:
                walk(nxt, nodes + [nxt], arrows + [forward])

    walk(start, [start], [])
    return paths


def _format_path(nodes, arrows) -> str:
    out = [nodes[0]]
    for node, forward in zip(nodes[1:], arrows):
        out.append(" -> " if forward else " <- ")
        out.append(node)
    return "".join(out)


def _path_blocked(scm: DiscreteSCM, nodes, arrows, given: set) -> bool:
    for i in range(1, len(nodes) - 1):
        into = arrows[i - 1]
        out_of = arrows[i]
        collider = into and not out_of
        if collider:
            closure = {nodes[i]} | scm.descendants(nodes[i])
            if not closure & given:
                return True
        elif nodes[i] in given:
            return True
    return False


def _backdoor_paths(scm: DiscreteSCM, start: str, goal: str):
    return [(n, a) for n, a in _undirected_paths(scm, start, goal) if not a[0]]


def check_backdoor_criterion(scm: DiscreteSCM, treatment: str, outcome: str, adjust_set):
    """Raise CriterionError (naming the offending path) unless the set qualifies."""
    adjust = set(adjust_set)
    desc = scm.descendants(treatment)
    bad = adjust & desc
    if bad:
        raise CriterionError(
            f"{sorted(bad)[0]} is a descendant of {treatment} and cannot be adjusted for")
    for nodes, arrows in _backdoor_paths(scm, treatment, outcome):
        if not _path_blocked(scm, nodes, arrows, adjust):
            raise CriterionError(f"unblocked back-door path: {_format_path(nodes, arrows)}")


def check_frontdoor_criterion(scm: DiscreteSCM, treatment: str, outcome: str, mediator: str):
    """Raise CriterionError unless the mediator qualifies."""
    med = {mediator}
    for nodes, arrows in _undirected_paths(scm, treatment, outcome):
        if all(arrows) and not (set(nodes[1:-1]) & med):
            raise CriterionError(
                f"directed path avoids the mediator: {_format_path(nodes, arrows)}")
    for nodes, arrows in _backdoor_paths(scm, treatment, mediator):
        if not _path_blocked(scm, nodes, arrows, set()):
            raise CriterionError(
                f"unblocked back-door path to the mediator: {_format_path(nodes, arrows)}")
    for nodes, arrows in _backdoor_paths(scm, mediator, outcome):
        if not _path_blocked(scm, nodes, arrows, {treatment}):
            raise CriterionError(
                f"{treatment} leaves a back-door path open: {_format_path(nodes, arrows)}")


def backdoor_adjust(scm: DiscreteSCM, x: int, y: int, adjust_set,
                    treatment: str = "X", outcome: str = "Y") -> float:
    """Sum over the adjust set of P(y | x, z) P(z), from observed data only."""
    adjust = list(adjust_set)
    check_backdoor_criterion(scm, treatment, outcome, adjust)
    table = marginal(joint(scm), scm, [treatment, outcome] + adjust)
    cards = [scm.cardinality(n) for n in adjust]
    total = 0.0
    for assignment in product(*(range(c) for c in cards)):
        sel = (slice(None), slice(None)) + assignment
        block = table[sel]
        pz = float(block.sum())
        if pz <= EPS:
            continue
        pxz = float(block[x, :].sum())
        if pxz <= EPS:
            raise CriterionError(
                f"undefined conditional: P({treatment}={x}, z={assignment}) = 0")
        total += float(block[x, y]) / pxz * pz
    return total


def frontdoor_adjust(scm: DiscreteSCM, x: int, y: int, mediator: str,
                     treatment: str = "X", outcome: str = "Y") -> float:
    """Front-door formula sum_m P(m|x) sum_x' P(y|x',m) P(x').

    Evaluated from the joint marginalized onto (treatment, mediator,
    outcome); latent variables are summed out and never read directly.
    """
    check_frontdoor_criterion(scm, treatment, outcome, mediator)
    table = marginal(joint(scm), scm, [treatment, mediator, outcome])
    px = table.sum(axis=(1, 2))
    pxm = table.sum(axis=2)
    if px[x] <= EPS:
        raise CriterionError(f"undefined conditional: P({treatment}={x}) = 0")
    total = 0.0
    for m in range(scm.cardinality(mediator)):
        p_m_given_x = pxm[x, m] / px[x]
        if p_m_given_x <= EPS:
            continue
        inner = 0.0
        for x_prime in range(scm.cardinality(treatment)):
            if px[x_prime] <= EPS:
                continue
            if pxm[x_prime, m] <= EPS:
                raise CriterionError(
                    f"undefined conditional: P({treatment}={x_prime}, {mediator}={m}) = 0")
            inner += table[x_prime, m, y] / pxm[x_prime, m] * px[x_prime]
        total += p_m_given_x * inner
    return total


def random_scm(spec, rng: np.random.Generator, floor: float = 0.05) -> DiscreteSCM:
    """Random SCM over the given (name, cardinality, parents) topology.

    CPT rows are uniform draws bounded away from 0 by ``floor`` so that
    every conditional in the adjustment formulas is well defined.
    """
    cpts = {}
    names = {n: (c, tuple(p)) for n, c, p in spec}
    for name, (card, parents) in names.items():
        shape = tuple(names[p][0] for p in parents) + (card,)
        raw = rng.uniform(floor, 1.0, size=shape)
        cpts[name] = raw / raw.sum(axis=-1, keepdims=True)
    return DiscreteSCM(spec, cpts)


def load_scm(path) -> DiscreteSCM:
    """Read an SCM from text: variable declarations then CPT rows.

    Format::

        variable <name> <cardinality> [<parent> ...]
        cpt <name>
        <p1> ... <p_card>        # one row per parent assignment,
        ...                      # first parent varying slowest

    Blank lines and ``#`` comments are ignored.
    """
    variables, cpt_rows = [], {}
    current = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            cols = line.split()
            if cols[0] == "variable":
                if len(cols) < 3:
                    raise ValueError(f"{path}:{lineno}: variable needs a name and cardinality")
                variables.append((cols[1], int(cols[2]), tuple(cols[3:])))
                current = None
            elif cols[0] == "cpt":
                if len(cols) != 2:
                    raise ValueError(f"{path}:{lineno}: cpt needs exactly one name")
                current = cols[1]
                cpt_rows[current] = []
            else:
                if current is None:
                    raise ValueError(f"{path}:{lineno}: numbers outside a cpt block")
                cpt_rows[current].append([float(c) for c in cols])
    cards = {n: c for n, c, _ in variables}
    parents = {n: p for n, _, p in variables}
    cpts = {}
    for name, rows in cpt_rows.items():
        if name not in cards:
            raise ValueError(f"{path}: cpt for undeclared variable {name!r}")
        shape = tuple(cards[p] for p in parents[name]) + (cards[name],)
        arr = np.asarray(rows, dtype=np.float64)
        expect_rows = int(np.prod(shape[:-1], dtype=np.int64))
        if arr.shape != (expect_rows, cards[name]):
            raise ValueError(
                f"{path}: cpt {name!r} has shape {arr.shape}, "
                f"expected ({expect_rows}, {cards[name]})")
        cpts[name] = arr.reshape(shape)
    missing = [n for n, _, _ in variables if n not in cpts]
    if missing:
        raise ValueError(f"{path}: missing cpt for {missing[0]!r}")
    return DiscreteSCM(variables, cpts)
