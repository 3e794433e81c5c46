"""Causal DAGs for two-component treatment decompositions.

Nodes are role-tagged: the baseline treatment Z, its two components Z_A
(adherence-affecting) and Z_Y (outcome-affecting), and per-interval adherence
A_k, covariates L_A_k / L_Y_k / V_k, and outcomes Y_k, plus unmeasured nodes.
The module provides d-separation with witness paths, the four identification
checks for the component-intervention risk, structural covariate
classification, and the component-splitting graph construction.

Graph text format, one statement per line ('#' starts a comment):

    node Z role=treatment randomized
    node A_1 role=adherence[1]
    node U role=unmeasured
    Z_A -> A_1
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import ConfigError, DomainError, GraphConstructionError, GraphError

INDEXED_ROLES = ("adherence", "covariate_a", "covariate_y", "covariate_v",
                 "covariate", "outcome")
BASELINE_ROLES = ("treatment", "component_a", "component_y", "unmeasured")
COVARIATE_ROLES = ("covariate_a", "covariate_y", "covariate_v", "covariate")

# position of each variable block within one interval; history conditioning
# sets are "everything strictly earlier" in (k, block) order
_WITHIN_INTERVAL = {"covariate_a": 0, "covariate_y": 1, "covariate_v": 2,
                    "covariate": 2, "adherence": 3, "outcome": 4}


@dataclass(frozen=True)
class Node:
    name: str
    role: str
    k: int | None = None
    randomized: bool = False

    @property
    def measured(self):
        return self.role != "unmeasured"

    def role_text(self):
        return self.role if self.k is None else f"{self.role}[{self.k}]"


class CausalDag:
    """Immutable directed acyclic graph with role-tagged nodes."""

    def __init__(self, nodes, edges):
        self.nodes = {}
        for node in nodes:
            if node.name in self.nodes:
                raise GraphConstructionError(f"duplicate node {node.name}")
            self.nodes[node.name] = node
        self.edges = set()
        self._children = {name: [] for name in self.nodes}
        self._parents = {name: [] for name in self.nodes}
        for src, dst in edges:
            for end in (src, dst):
                if end not in self.nodes:
                    raise GraphConstructionError(f"edge endpoint {end} is not a node")
            if src == dst:
                raise GraphConstructionError(f"self-loop on {src}")
            if (src, dst) in self.edges:
                raise GraphConstructionError(f"duplicate edge {src} -> {dst}")
            self.edges.add((src, dst))
            self._children[src].append(dst)
            self._parents[dst].append(src)
        for adj in (self._children, self._parents):
            for name in adj:
                adj[name] = tuple(sorted(adj[name]))
        self._assert_acyclic()

    def _assert_acyclic(self):
        indegree = {name: len(self._parents[name]) for name in self.nodes}
        queue = sorted(name for name, deg in indegree.items() if deg == 0)
        seen = 0
        while queue:
            node = queue.pop()
            seen += 1
            for child in self._children[node]:
                indegree[child] -= 1
                if indegree[child] == 0:
                    queue.append(child)
        if seen != len(self.nodes):
            cyclic = sorted(name for name, deg in indegree.items() if deg > 0)
            raise GraphConstructionError(f"graph has a cycle through {cyclic}")

    def __contains__(self, name):
        return name in self.nodes

    def node(self, name):
        if name not in self.nodes:
            raise DomainError(f"unknown node {name}")
        return self.nodes[name]

    def children(self, name):
        return self._children[self.node(name).name]

    def parents(self, name):
        return self._parents[self.node(name).name]

    def with_role(self, *roles):
        """Node names with any of the given roles, in deterministic order."""
        found = [n for n in self.nodes.values() if n.role in roles]
        found.sort(key=lambda n: (n.k if n.k is not None else 0, n.name))
        return [n.name for n in found]

    def single_with_role(self, role):
        names = self.with_role(role)
        if len(names) != 1:
            raise ConfigError(
                f"expected exactly one node with role {role}, found {names}")
        return names[0]

    def ancestors(self, names):
        """All strict ancestors of the given node set."""
        out, stack = set(), list(names)
        while stack:
            for parent in self.parents(stack.pop()):
                if parent not in out:
                    out.add(parent)
                    stack.append(parent)
        return out

    def descendants(self, names):
        out, stack = set(), list(names)
        while stack:
            for child in self.children(stack.pop()):
                if child not in out:
                    out.add(child)
                    stack.append(child)
        return out

    def simple_paths(self, x, y):
        """All simple paths between x and y on the undirected skeleton,
        as tuples of node names. Deterministic order."""
        neighbors = {name: tuple(sorted(set(self._children[name])
                                        | set(self._parents[name])))
                     for name in self.nodes}
        paths = []
        stack = [(x, (x,))]
        while stack:
            current, path = stack.pop()
            for nxt in reversed(neighbors[current]):
                if nxt in path:
                    continue
                if nxt == y:
                    paths.append(path + (y,))
                else:
                    stack.append((nxt, path + (nxt,)))
        return paths

    def format_path(self, path):
        """Render a path with its true arrow directions."""
        parts = [path[0]]
        for a, b in zip(path, path[1:]):
            parts.append(" -> " if (a, b) in self.edges else " <- ")
            parts.append(b)
        return "".join(parts)


def _path_is_open(dag, path, conditioned, cond_with_ancestors):
    """d-connection test for one simple path given a conditioning set.

    A collider on the path is open when it or one of its descendants is
    conditioned (equivalently: it is in, or an ancestor of, the set); any
    other interior node is open when it is not conditioned.
    """
    for i in range(1, len(path) - 1):
        v = path[i]
        into_left = (path[i - 1], v) in dag.edges
        into_right = (path[i + 1], v) in dag.edges
        if into_left and into_right:
            if v not in cond_with_ancestors:
                return False
        else:
            if v in conditioned:
                return False
    return True


def _as_name_set(dag, names):
    if isinstance(names, str):
        names = (names,)
    return tuple(sorted(dag.node(n).name for n in names))


def d_separated(dag, x, y, given=()):
    """Check d-separation of node sets x and y given a conditioning set.

    Returns (True, None) when every path is blocked, else (False, witness)
    where witness is the shortest open path as a node-name tuple.
    """
    xs, ys, given = _as_name_set(dag, x), _as_name_set(dag, y), _as_name_set(dag, given)
    overlap = (set(xs) & set(ys)) | (set(xs) & set(given)) | (set(ys) & set(given))
    if overlap:
        raise DomainError(f"node sets must be disjoint; shared: {sorted(overlap)}")
    conditioned = set(given)
    cond_anc = conditioned | dag.ancestors(conditioned)
    witness = None
    for a, b in itertools.product(xs, ys):
        for path in dag.simple_paths(a, b):
            if _path_is_open(dag, path, conditioned, cond_anc):
                key = (len(path), path)
                if witness is None or key < (len(witness), witness):
                    witness = path
    return (witness is None), witness


# -- identification checks -----------------------------------------------------

RULE_LABELS = {
    "i": "backdoor paths between Z and the outcomes",
    "ii": "open paths from the adherence component into outcomes or "
          "outcome-side covariates",
    "iii": "open paths from the outcome component into adherence or "
           "adherence-side covariates",
    "iv": "unmeasured common causes across the adherence and outcome sides",
}

ASSUMPTION_BANNER = (
    "assumes the drawn causal structure is invariant across component "
    "assignments; this premise is untestable from the graph itself")


@dataclass
class IdentificationReport:
    verdict: str
    violations: list = field(default_factory=list)  # (rule id, path tuple)
    checks: list = field(default_factory=list)      # (rule id, status text)
    assumptions: tuple = (ASSUMPTION_BANNER,)
    dag: CausalDag | None = None

    @property
    def identified(self):
        return self.verdict == "identified"

    def render(self):
        lines = [f"verdict: {self.verdict}"]
        for rule, status in self.checks:
            lines.append(f"rule ({rule}) {RULE_LABELS[rule]}: {status}")
        for rule, path in self.violations:
            shown = self.dag.format_path(path) if self.dag else " - ".join(path)
            lines.append(f"violation ({rule}): {shown}")
        for note in self.assumptions:
            lines.append(f"assumption: {note}")
        return "\n".join(lines)


def _history_order(dag):
    """Measured per-interval nodes in temporal order: interval first, then
    the within-interval sequencing (L_A, L_Y, V, A, Y)."""
    ranked = []
    for node in dag.nodes.values():
        if node.role in _WITHIN_INTERVAL and node.measured:
            ranked.append(((node.k, _WITHIN_INTERVAL[node.role], node.name), node.name))
    ranked.sort()
    return [name for _, name in ranked]


def _shortest_directed_path(dag, src, dst, allowed_interior):
    """Shortest directed path src -> ... -> dst whose interior nodes are all
    in allowed_interior; None when there is none."""
    best = None
    stack = [(src, (src,))]
    while stack:
        current, path = stack.pop()
        if best is not None and len(path) >= len(best):
            continue
        for child in dag.children(current):
            if child in path:
                continue
            if child == dst:
                candidate = path + (dst,)
                if best is None or (len(candidate), candidate) < (len(best), best):
                    best = candidate
            elif child in allowed_interior:
                stack.append((child, path + (child,)))
    return best


def check_identification(dag, horizon=None):
    """Run the four graphical identification checks for the component
    intervention (z_A, z_Y) on a role-tagged DAG.

    (i)   no backdoor path between Z and any outcome (skipped, recorded as
          assumed, when Z carries the randomized annotation);
    (ii)  the adherence component is d-separated from every outcome and
          outcome-side covariate given the other component and the measured
          history preceding that node;
    (iii) symmetrically for the outcome component versus adherence and
          adherence-side covariates;
    (iv)  no unmeasured node reaches both an adherence-side and an
          outcome-side node through node-disjoint directed paths whose
          interiors are unmeasured.
    """
    z = dag.single_with_role("treatment")
    z_a = dag.single_with_role("component_a")
    z_y = dag.single_with_role("component_y")

    history = _history_order(dag)
    if horizon is not None:
        history = [n for n in history if dag.node(n).k <= horizon]
    position = {name: i for i, name in enumerate(history)}

    outcomes = [n for n in history if dag.nodes[n].role == "outcome"]
    side_a = set(n for n in history
                 if dag.nodes[n].role in ("adherence", "covariate_a"))
    side_y = set(n for n in history
                 if dag.nodes[n].role in ("outcome", "covariate_y"))
    if not outcomes:
        raise ConfigError("graph has no outcome nodes")

    violations = []
    checks = []

    # (i) unconfoundedness of the initiated treatment
    if dag.node(z).randomized:
        checks.append(("i", "assumed (Z randomized)"))
    else:
        witness = None
        for y_node in outcomes:
            for path in dag.simple_paths(z, y_node):
                if len(path) < 2 or (path[1], z) not in dag.edges:
                    continue  # not a backdoor path
                if _path_is_open(dag, path, set(), set()):
                    key = (len(path), path)
                    if witness is None or key < (len(witness), witness):
                        witness = path
        if witness is None:
            checks.append(("i", "ok"))
        else:
            checks.append(("i", "violated"))
            violations.append(("i", witness))

    # (ii)/(iii): component versus the other side's nodes, given the other
    # component and all measured history strictly preceding the target
    def component_check(rule, component, other_component, targets):
        found = []
        for target in targets:
            conditioning = [other_component]
            conditioning += history[:position[target]]
            separated, witness = d_separated(dag, component, target, conditioning)
            if not separated:
                found.append((rule, witness))
        return found

    targets_ii = [n for n in history if n in side_y]
    targets_iii = [n for n in history if n in side_a]
    for rule, found in (("ii", component_check("ii", z_a, z_y, targets_ii)),
                        ("iii", component_check("iii", z_y, z_a, targets_iii))):
        checks.append((rule, "ok" if not found else "violated"))
        violations.extend(found)

    # (iv) unmeasured common causes across the two sides
    unmeasured = [n for n in dag.nodes if not dag.nodes[n].measured]
    iv_witness = None
    for u in sorted(unmeasured):
        interior = set(unmeasured)
        hits_a = [(n, _shortest_directed_path(dag, u, n, interior))
                  for n in sorted(side_a)]
        hits_y = [(n, _shortest_directed_path(dag, u, n, interior))
                  for n in sorted(side_y)]
        for (na, pa), (ny, py) in itertools.product(
                [h for h in hits_a if h[1]], [h for h in hits_y if h[1]]):
            if set(pa[1:-1]) & set(py[1:-1]):
                continue  # shared intermediate: not node-disjoint
            combined = tuple(reversed(pa)) + py[1:]
            key = (len(combined), combined)
            if iv_witness is None or key < (len(iv_witness), iv_witness):
                iv_witness = combined
    if iv_witness is None:
        checks.append(("iv", "ok"))
    else:
        checks.append(("iv", "violated"))
        violations.append(("iv", iv_witness))

    verdict = "identified" if not violations else "violated"
    return IdentificationReport(verdict=verdict, violations=violations,
                                checks=checks, dag=dag)


# -- covariate classification ---------------------------------------------------


def classify_covariates(dag):
    """Partition covariate nodes by structure: non-prognostic (reach the
    outcome only through adherence, if at all), adherence-side prognostic,
    outcome-side prognostic, or ambiguous.

    Prognostic covariates take the side of the component (Z_A or Z_Y) that
    feeds their covariate chain; chains are covariate-connected groups, so a
    covariate upstream of a component-fed one inherits that side. Returns a
    dict with keys 'l_a', 'l_y', 'v', 'ambiguous', 'notes'.
    """
    z_a = dag.single_with_role("component_a")
    z_y = dag.single_with_role("component_y")
    covariates = dag.with_role(*COVARIATE_ROLES)
    cov_set = set(covariates)
    outcomes = set(dag.with_role("outcome"))
    adherence = set(dag.with_role("adherence"))

    def reaches(src, targets):
        return any(_shortest_directed_path(dag, src, t, cov_set)
                   for t in sorted(targets))

    prognostic = {c for c in covariates if reaches(c, outcomes)}
    affects_adherence = {c for c in covariates if reaches(c, adherence)}

    # covariate-connected groups among prognostic covariates
    group = {c: c for c in prognostic}

    def find(c):
        while group[c] != c:
            group[c] = group[group[c]]
            c = group[c]
        return c

    for src, dst in sorted(dag.edges):
        if src in prognostic and dst in prognostic:
            ra, rb = find(src), find(dst)
            if ra != rb:
                group[max(ra, rb)] = min(ra, rb)

    seeds = {}
    for c in prognostic:
        fed_a = _shortest_directed_path(dag, z_a, c, cov_set) is not None
        fed_y = _shortest_directed_path(dag, z_y, c, cov_set) is not None
        root = find(c)
        got = seeds.setdefault(root, set())
        if fed_a:
            got.add("l_a")
        if fed_y:
            got.add("l_y")

    out = {"l_a": [], "l_y": [], "v": [], "ambiguous": []}
    notes = []
    for c in covariates:
        if c in prognostic:
            sides = seeds.get(find(c), set())
            if len(sides) == 1:
                out[next(iter(sides))].append(c)
            else:
                out["ambiguous"].append(c)
                reason = ("fed by both components" if sides
                          else "prognostic but fed by neither component")
                notes.append(f"{c}: {reason}")
        elif c in affects_adherence:
            out["v"].append(c)
        else:
            out["ambiguous"].append(c)
            notes.append(f"{c}: no directed path to adherence or outcome")
    return {key: tuple(val) for key, val in out.items()} | {"notes": tuple(notes)}


# -- component splitting --------------------------------------------------------


def build_separable_dag(base, component_a="Z_A", component_y="Z_Y", routing=None):
    """Split the treatment node of a base DAG into two component nodes.

    Every edge Z -> X of the base graph must be routed by ``routing`` (a
    mapping X -> 'a' | 'y' | 'both') onto the corresponding component(s); the
    components themselves become children of Z. All other structure is kept.
    """
    routing = dict(routing or {})
    z = base.single_with_role("treatment")
    for name in (component_a, component_y):
        if name in base:
            raise GraphConstructionError(f"node name {name} already in use")
    z_children = set(base.children(z))
    unrouted = sorted(z_children - routing.keys())
    if unrouted:
        raise GraphConstructionError(
            f"edges from {z} to {unrouted} have no component routing")
    unknown = sorted(routing.keys() - z_children)
    if unknown:
        raise GraphConstructionError(
            f"routing given for non-children of {z}: {unknown}")

    nodes = list(base.nodes.values())
    nodes.append(Node(component_a, "component_a"))
    nodes.append(Node(component_y, "component_y"))
    edges = [(s, d) for s, d in sorted(base.edges) if s != z]
    edges += [(z, component_a), (z, component_y)]
    for child in sorted(z_children):
        route = routing[child]
        if route not in ("a", "y", "both"):
            raise GraphConstructionError(
                f"routing for {child} must be 'a', 'y', or 'both', not {route!r}")
        if route in ("a", "both"):
            edges.append((component_a, child))
        if route in ("y", "both"):
            edges.append((component_y, child))
    return CausalDag(nodes, edges)


def merge_components(dag):
    """Inverse of build_separable_dag: collapse the two component nodes back
    into the treatment node, deduplicating doubly routed edges."""
    z = dag.single_with_role("treatment")
    z_a = dag.single_with_role("component_a")
    z_y = dag.single_with_role("component_y")
    drop = {z_a, z_y}
    nodes = [n for n in dag.nodes.values() if n.name not in drop]
    edges = set()
    for src, dst in dag.edges:
        if dst in drop:
            continue
        edges.add((z if src in drop else src, dst))
    return CausalDag(nodes, sorted(edges))


# -- text format ---------------------------------------------------------------


def parse_dag(text):
    """Parse the graph text format; raises GraphError naming the line."""
    nodes, edges = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("node "):
            tokens = line.split()
            if len(tokens) < 3 or not tokens[2].startswith("role="):
                raise GraphError(f"line {lineno}: expected 'node NAME role=ROLE'")
            name = tokens[1]
            role_text = tokens[2][len("role="):]
            if "[" in role_text:
                if not role_text.endswith("]"):
                    raise GraphError(f"line {lineno}: malformed role {role_text!r}")
                role, k_text = role_text[:-1].split("[", 1)
                try:
                    k = int(k_text)
                except ValueError:
                    raise GraphError(
                        f"line {lineno}: interval index {k_text!r} is not an "
                        f"integer") from None
                if k < 1:
                    raise GraphError(f"line {lineno}: interval index must be >= 1")
            else:
                role, k = role_text, None
            if role in INDEXED_ROLES and k is None:
                raise GraphError(
                    f"line {lineno}: role {role} needs an interval index")
            if role in BASELINE_ROLES and k is not None:
                raise GraphError(
                    f"line {lineno}: role {role} takes no interval index")
            if role not in INDEXED_ROLES + BASELINE_ROLES:
                raise GraphError(f"line {lineno}: unknown role {role!r}")
            flags = tokens[3:]
            bad = [f for f in flags if f != "randomized"]
            if bad:
                raise GraphError(f"line {lineno}: unknown flags {bad}")
            nodes.append(Node(name, role, k, randomized="randomized" in flags))
        elif "->" in line:
            parts = [p.strip() for p in line.split("->")]
            if len(parts) != 2 or not all(parts):
                raise GraphError(f"line {lineno}: expected 'SRC -> DST'")
            edges.append((parts[0], parts[1]))
        else:
            raise GraphError(f"line {lineno}: unrecognized statement {line!r}")
    try:
        return CausalDag(nodes, edges)
    except GraphConstructionError as err:
        raise GraphError(f"invalid graph: {err}") from err


def format_dag(dag):
    """Serialize to the text format; parse_dag inverts this exactly."""
    lines = []
    for node in sorted(dag.nodes.values(),
                       key=lambda n: (n.role not in BASELINE_ROLES,
                                      n.k if n.k is not None else 0, n.name)):
        flag = " randomized" if node.randomized else ""
        lines.append(f"node {node.name} role={node.role_text()}{flag}")
    for src, dst in sorted(dag.edges):
        lines.append(f"{src} -> {dst}")
    return "\n".join(lines) + "\n"


def load_fixture(name):
    """Load one of the packaged example graphs by file name (with or without
    the .dag suffix)."""
    from importlib import resources

    if not name.endswith(".dag"):
        name += ".dag"
    ref = resources.files("sepadh") / "fixtures" / name
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        available = sorted(p.name for p in (resources.files("sepadh") / "fixtures").iterdir())
        raise DomainError(f"no fixture {name!r}; available: {available}") from None
    return parse_dag(text)
