"""Persist tree selectors and emit them as nested-conditional source text.

The portable document is a line-oriented grammar ("kptree v1"): a feature
header, the deployed configs in class order, then the tree nodes in
preorder. Thresholds are written with repr(), the shortest form that parses
back bit-equal, so round trips are byte-identical.

Emission is template-driven; the emitter knows nothing about the target
language. Placeholders are literal tokens replaced by str.replace, so
C-family braces need no escaping in templates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classify import FEATURE_NAMES, TreeModel
from .dataset import KernelConfig
from .errors import ContractError, ParseError, TemplateError
from .selection import ConfigSubset

MAGIC = "kptree v1"
FEATURES_LINE = "features " + " ".join(FEATURE_NAMES)


def _check_consistent(model: TreeModel, subset: ConfigSubset, configs) -> None:
    leaves = model.leaf_class[model.leaf_class >= 0]
    if leaves.size == 0 or int(leaves.max()) >= subset.k_actual:
        raise ContractError("leaf class outside the subset")
    if any(c >= len(configs) for c in subset.config_indices):
        raise ContractError("subset index outside the config list")


def export_model(model: TreeModel, subset: ConfigSubset, configs) -> str:
    """Serialize a tree plus its deployed configs; canonical and stable."""
    _check_consistent(model, subset, configs)
    lines = [MAGIC, FEATURES_LINE, f"subset {subset.k_actual}"]
    for ci in subset.config_indices:
        c = configs[ci]
        lines.append(f"config {c.tile_rows} {c.tile_acc} {c.tile_cols} "
                     f"{c.wg_rows} {c.wg_cols}")
    for i in range(model.n_nodes):
        if model.leaf_class[i] >= 0:
            lines.append(f"leaf {i} class {int(model.leaf_class[i])}")
        else:
            lines.append(f"node {i} feat {int(model.feature[i])} "
                         f"thr {float(model.threshold[i])!r} "
                         f"left {int(model.left[i])} right {int(model.right[i])}")
    return "\n".join(lines) + "\n"


def _fail(lineno: int, why: str):
    raise ParseError(why, line=lineno)


def import_model(doc: str):
    """Parse a kptree document back into (TreeModel, ConfigSubset, configs).

    Structural demands: ids contiguous from 0, the root is 0, every other
    node referenced as a child exactly once, all nodes reachable. Leaf
    classes must index into the subset.
    """
    lines = doc.splitlines()
    if not lines or lines[0] != MAGIC:
        _fail(1, "expected 'kptree v1' header")
    if len(lines) < 2 or lines[1] != FEATURES_LINE:
        _fail(2, f"expected '{FEATURES_LINE}'")
    if len(lines) < 3 or not lines[2].startswith("subset "):
        _fail(3, "expected 'subset <count>'")
    try:
        count = int(lines[2].split()[1])
    except (IndexError, ValueError):
        _fail(3, "bad subset count")
    if count < 1:
        _fail(3, "subset count must be >= 1")
    if len(lines) < 3 + count:
        _fail(len(lines), "truncated config list")
    configs = []
    for i in range(count):
        lineno = 4 + i
        parts = lines[3 + i].split()
        if len(parts) != 6 or parts[0] != "config":
            _fail(lineno, "expected 'config R A C wgR wgC'")
        try:
            r, a, c, wr, wc = (int(p) for p in parts[1:])
        except ValueError:
            _fail(lineno, "config fields must be integers")
        configs.append(KernelConfig(r, a, c, wr, wc))

    nodes: dict[int, tuple] = {}
    for off, raw in enumerate(lines[3 + count:]):
        lineno = 4 + count + off
        if not raw.strip():
            continue
        parts = raw.split()
        try:
            if parts[0] == "leaf" and len(parts) == 4 and parts[2] == "class":
                nid, cls = int(parts[1]), int(parts[3])
                record = (-1, np.nan, -1, -1, cls)
            elif (parts[0] == "node" and len(parts) == 10
                  and parts[2] == "feat" and parts[4] == "thr"
                  and parts[6] == "left" and parts[8] == "right"):
                nid = int(parts[1])
                record = (int(parts[3]), float(parts[5]),
                          int(parts[7]), int(parts[9]), -1)
            else:
                _fail(lineno, "expected a 'node' or 'leaf' line")
        except ValueError:
            _fail(lineno, "bad numeric field")
        if nid in nodes:
            _fail(lineno, f"duplicate node id {nid}")
        nodes[nid] = record

    n = len(nodes)
    if n == 0:
        _fail(len(lines), "no tree nodes")
    if sorted(nodes) != list(range(n)):
        _fail(len(lines), "node ids must be contiguous from 0")
    for nid, (feat, _, left, right, cls) in nodes.items():
        if cls >= 0:
            if cls >= count:
                _fail(len(lines), f"leaf class {cls} outside subset of {count}")
        else:
            if not 0 <= feat < 4:
                _fail(len(lines), f"feature index {feat} out of range")
            for child in (left, right):
                if not 0 <= child < n:
                    _fail(len(lines), f"child id {child} out of range")

    # One visit per node from the root proves tree shape (no cycles, no
    # orphans, no shared children).
    seen = set()
    stack = [0]
    while stack:
        nid = stack.pop()
        if nid in seen:
            _fail(len(lines), "node reachable twice; not a tree")
        seen.add(nid)
        feat, _, left, right, cls = nodes[nid]
        if cls < 0:
            stack += [left, right]
    if len(seen) != n:
        _fail(len(lines), "unreachable nodes in document")

    model = TreeModel(
        feature=np.array([nodes[i][0] for i in range(n)], dtype=np.int64),
        threshold=np.array([nodes[i][1] for i in range(n)], dtype=np.float64),
        left=np.array([nodes[i][2] for i in range(n)], dtype=np.int64),
        right=np.array([nodes[i][3] for i in range(n)], dtype=np.int64),
        leaf_class=np.array([nodes[i][4] for i in range(n)], dtype=np.int64),
    )
    subset = ConfigSubset(tuple(range(count)), method="import",
                          k_requested=count, k_actual=count)
    return model, subset, configs


def _exactly_once(text: str, tokens, where: str) -> None:
    for tok in tokens:
        if text.count(tok) != 1:
            raise TemplateError(f"{where} must contain {tok} exactly once")


@dataclass(frozen=True)
class EmitTemplate:
    """Text fragments the emitter stitches around the tree structure."""

    function_header: str
    if_open: str
    else_text: str
    close_text: str
    leaf_return: str
    indent: str = "    "

    def __post_init__(self):
        _exactly_once(self.function_header,
                      ("{f0}", "{f1}", "{f2}", "{f3}"), "function_header")
        _exactly_once(self.if_open, ("{feature}", "{threshold}"), "if_open")
        _exactly_once(self.leaf_return,
                      ("{tile_rows}", "{tile_acc}", "{tile_cols}",
                       "{wg_rows}", "{wg_cols}"), "leaf_return")


DEFAULT_TEMPLATE = EmitTemplate(
    function_header=("static inline KernelChoice select_kernel("
                     "double {f0}, double {f1}, double {f2}, double {f3}) {"),
    if_open="if ({feature} < {threshold}) {",
    else_text="} else {",
    close_text="}",
    leaf_return=("return (KernelChoice){ {tile_rows}, {tile_acc}, "
                 "{tile_cols}, {wg_rows}, {wg_cols} };"),
    indent="    ",
)


def emit_nested_if(model: TreeModel, subset: ConfigSubset, configs,
                   template: EmitTemplate = DEFAULT_TEMPLATE) -> str:
    """Render the tree as nested conditionals; strict-less comparisons keep
    the emitted logic equal to predict_tree on every input."""
    _check_consistent(model, subset, configs)
    header = template.function_header
    for i, name in enumerate(FEATURE_NAMES):
        header = header.replace("{f%d}" % i, name)
    lines = [header]

    def walk(node: int, depth: int) -> None:
        pad = template.indent * depth
        cls = int(model.leaf_class[node])
        if cls >= 0:
            cfg = configs[subset.config_indices[cls]]
            lines.append(pad + template.leaf_return
                         .replace("{tile_rows}", str(cfg.tile_rows))
                         .replace("{tile_acc}", str(cfg.tile_acc))
                         .replace("{tile_cols}", str(cfg.tile_cols))
                         .replace("{wg_rows}", str(cfg.wg_rows))
                         .replace("{wg_cols}", str(cfg.wg_cols)))
            return
        lines.append(pad + template.if_open
                     .replace("{feature}", FEATURE_NAMES[int(model.feature[node])])
                     .replace("{threshold}", repr(float(model.threshold[node]))))
        walk(int(model.left[node]), depth + 1)
        lines.append(pad + template.else_text)
        walk(int(model.right[node]), depth + 1)
        lines.append(pad + template.close_text)

    walk(0, 1)
    lines.append(template.close_text)
    return "\n".join(lines) + "\n"
