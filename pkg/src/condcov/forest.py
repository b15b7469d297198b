"""Random forest over covariance matrices of standardized residuals.

Each tree partitions covariate space by recursively choosing the axis
split that maximizes the size-weighted distance between the sample
covariances of the two child nodes:

    sqrt(n_L * n_R) * || vech(S_L) - vech(S_R) ||_2

where ``vech`` stacks the upper triangle (diagonal included, each
off-diagonal entry once; the diagonal can be excluded by
configuration). Leaves store the sample covariance of their in-bag
rows, and a forest prediction is the plain average of the leaf
covariances the query routes to, taken in tree-index order.

Trees are grown on bootstrap samples (with replacement, original size)
from counter-based per-tree random streams, so a forest is reproducible
from its seed alone regardless of how the tree-growing work is
scheduled across processes.
"""

from __future__ import annotations

import json
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .core import Dataset, SymMatrix, _sample_cov, cov_to_corr, dataset_fingerprint
from .errors import ConfigError, DimensionMismatch, ParseError, TooFewRows

_MAGIC = b"CCFOREST"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestConfig:
    """Forest hyperparameters.

    ``min_node_size`` and ``mtry`` default to ``None`` and are resolved
    against the data at fit time: ``max(10, 2p)`` rows per node and
    ``ceil(q/3)`` candidate covariates per split. ``max_cutpoints``
    bounds the candidate cutpoints scanned per covariate within a node;
    nodes with no more distinct values than the bound scan every
    feasible midpoint, larger nodes scan candidates evenly spaced in
    left-child size (rank-based, so monotone covariate transforms do
    not change the chosen split). ``None`` removes the bound.
    """

    n_trees: int = 500
    min_node_size: int | None = None
    mtry: int | None = None
    max_cutpoints: int | None = 256
    include_diagonal: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be at least 1, got {self.n_trees}")
        if self.min_node_size is not None and self.min_node_size < 2:
            raise ConfigError(
                f"min_node_size must be at least 2, got {self.min_node_size}"
            )
        if self.mtry is not None and self.mtry < 1:
            raise ConfigError(f"mtry must be at least 1, got {self.mtry}")
        if self.max_cutpoints is not None and self.max_cutpoints < 1:
            raise ConfigError(
                f"max_cutpoints must be at least 1, got {self.max_cutpoints}"
            )

    def resolved(self, p: int, q: int) -> "ForestConfig":
        """Fill data-dependent defaults for ``p`` outputs, ``q`` covariates."""
        min_node = self.min_node_size
        if min_node is None:
            min_node = max(10, 2 * p)
        mtry = self.mtry
        if mtry is None:
            mtry = max(1, math.ceil(q / 3))
        mtry = min(mtry, q)
        return replace(self, min_node_size=min_node, mtry=mtry)


@dataclass(frozen=True)
class SplitRule:
    """An axis-aligned split: route left when ``z[index] <= cutpoint``."""

    covariate_index: int
    cutpoint: float
    criterion_value: float


def split_criterion(left, right, *, include_diagonal: bool = True) -> float:
    """Size-weighted distance between two child sample covariances.

    ``sqrt(k_L * k_R)`` times the Euclidean distance between the
    stacked upper triangles (diagonal included unless excluded) of the
    sample covariances of the ``(k_L, p)`` and ``(k_R, p)`` row
    matrices. Zero exactly when the two covariances coincide; scaling
    both samples by ``c`` scales the value by ``c**2``.
    """
    lo = np.asarray(left, dtype=np.float64)
    hi = np.asarray(right, dtype=np.float64)
    if lo.ndim != 2 or hi.ndim != 2 or lo.shape[1] != hi.shape[1]:
        raise DimensionMismatch(
            f"expected two (k, p) matrices with equal p, got shapes "
            f"{lo.shape} and {hi.shape}"
        )
    if lo.shape[0] < 2 or hi.shape[0] < 2:
        raise TooFewRows(
            f"each child needs at least 2 rows, got {lo.shape[0]} and {hi.shape[0]}"
        )
    p = lo.shape[1]
    iu, ju = np.triu_indices(p) if include_diagonal else np.triu_indices(p, 1)
    diff = _sample_cov(lo)[iu, ju] - _sample_cov(hi)[iu, ju]
    return math.sqrt(lo.shape[0] * hi.shape[0]) * math.sqrt(float(diff @ diff))


def best_split(rows, Y, Z, config: ForestConfig, rng=None) -> SplitRule | None:
    """Exhaustive scan for the criterion-maximizing axis split of a node.

    ``rows`` indexes the node's rows in ``Y`` (standardized residuals)
    and ``Z`` (covariates); bootstrap duplicates simply appear multiple
    times. Cutpoints are midpoints between consecutive distinct sorted
    covariate values, restricted so both children keep at least
    ``min_node_size`` rows. Ties resolve toward the lowest covariate
    index, then the smallest cutpoint. Returns ``None`` when no
    feasible split exists. When the resolved ``mtry`` is below ``q``,
    ``rng`` draws the covariate subset.
    """
    rows = np.asarray(rows, dtype=np.int64)
    p = Y.shape[1]
    q = Z.shape[1]
    cfg = config.resolved(p, q)
    min_node = cfg.min_node_size
    k = rows.size
    if k < 2 * min_node:
        return None
    if cfg.mtry < q:
        if rng is None:
            raise ConfigError("an rng is required when mtry < q")
        feats = np.sort(rng.choice(q, size=cfg.mtry, replace=False))
    else:
        feats = np.arange(q)

    node = Y[rows]
    centered = node - node.mean(axis=0)
    if cfg.include_diagonal:
        iu, ju = np.triu_indices(p)
    else:
        if p < 2:
            raise ConfigError(
                "include_diagonal=False needs at least two outputs"
            )
        iu, ju = np.triu_indices(p, 1)
    packed = centered[:, iu] * centered[:, ju]

    best: SplitRule | None = None
    for f in feats:
        v = Z[rows, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        steps = np.nonzero(vs[1:] > vs[:-1])[0] + 1
        feasible = steps[(steps >= min_node) & (steps <= k - min_node)]
        if feasible.size == 0:
            continue
        n_distinct = steps.size + 1
        if (
            cfg.max_cutpoints is not None
            and n_distinct > cfg.max_cutpoints
            and feasible.size > cfg.max_cutpoints
        ):
            feasible = _thin_by_mass(feasible, min_node, k - min_node, cfg.max_cutpoints)
        s1 = np.cumsum(centered[order], axis=0)
        s2 = np.cumsum(packed[order], axis=0)
        n_left = feasible.astype(np.float64)[:, None]
        n_right = float(k) - n_left
        s1_left = s1[feasible - 1]
        s2_left = s2[feasible - 1]
        s1_right = s1[-1] - s1_left
        s2_right = s2[-1] - s2_left
        cov_left = (s2_left - s1_left[:, iu] * s1_left[:, ju] / n_left) / (n_left - 1.0)
        cov_right = (s2_right - s1_right[:, iu] * s1_right[:, ju] / n_right) / (
            n_right - 1.0
        )
        diff = cov_left - cov_right
        crit = np.sqrt(n_left[:, 0] * n_right[:, 0]) * np.sqrt(
            np.einsum("ct,ct->c", diff, diff)
        )
        j = int(np.argmax(crit))
        value = float(crit[j])
        if best is None or value > best.criterion_value:
            boundary = int(feasible[j])
            cutpoint = 0.5 * (float(vs[boundary - 1]) + float(vs[boundary]))
            best = SplitRule(
                covariate_index=int(f),
                cutpoint=cutpoint,
                criterion_value=value,
            )
    return best


def _thin_by_mass(feasible: np.ndarray, lo: int, hi: int, cap: int) -> np.ndarray:
    """Keep ``cap`` boundaries nearest to left sizes evenly spaced in
    ``[lo, hi]``; rank spacing keeps candidate choice invariant under
    monotone relabeling of the covariate."""
    targets = np.linspace(lo, hi, cap)
    pos = np.searchsorted(feasible, targets)
    left = np.clip(pos - 1, 0, feasible.size - 1)
    right = np.clip(pos, 0, feasible.size - 1)
    nearer_left = np.abs(feasible[left] - targets) <= np.abs(feasible[right] - targets)
    chosen = np.where(nearer_left, left, right)
    return feasible[np.unique(chosen)]


class CovTree:
    """One grown tree, stored as flat node arrays.

    ``feature[i] >= 0`` marks an internal node with its split covariate
    and ``threshold[i]``; routing goes left when the query covariate is
    ``<= threshold``. Leaves have ``feature[i] == -1`` and
    ``leaf_slot[i]`` indexing into the leaf arrays: ``leaf_cov`` holds
    the sample covariance of each leaf's in-bag residual rows,
    ``leaf_rows`` those row indices sorted ascending (duplicates from
    the bootstrap included), ``inbag`` the whole bootstrap sample
    sorted.
    """

    __slots__ = (
        "feature",
        "threshold",
        "left",
        "right",
        "criterion",
        "leaf_slot",
        "leaf_cov",
        "leaf_n",
        "leaf_rows",
        "inbag",
    )

    def __init__(
        self,
        feature,
        threshold,
        left,
        right,
        criterion,
        leaf_slot,
        leaf_cov,
        leaf_n,
        leaf_rows,
        inbag,
    ):
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.criterion = np.asarray(criterion, dtype=np.float64)
        self.leaf_slot = np.asarray(leaf_slot, dtype=np.int32)
        self.leaf_cov = np.asarray(leaf_cov, dtype=np.float64)
        self.leaf_n = np.asarray(leaf_n, dtype=np.int64)
        self.leaf_rows = [np.asarray(r, dtype=np.int64) for r in leaf_rows]
        self.inbag = np.asarray(inbag, dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return self.leaf_cov.shape[0]

    def split_rule(self, node: int) -> SplitRule | None:
        if self.feature[node] < 0:
            return None
        return SplitRule(
            covariate_index=int(self.feature[node]),
            cutpoint=float(self.threshold[node]),
            criterion_value=float(self.criterion[node]),
        )

    def route(self, z) -> int:
        """Leaf slot the covariate point ``z`` falls into."""
        z = np.asarray(z, dtype=np.float64)
        node = 0
        while self.feature[node] >= 0:
            if z[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return int(self.leaf_slot[node])

    def route_batch(self, queries: np.ndarray) -> np.ndarray:
        """Leaf slots for ``(m, q)`` query points."""
        m = queries.shape[0]
        node = np.zeros(m, dtype=np.int64)
        while True:
            feats = self.feature[node]
            moving = np.nonzero(feats >= 0)[0]
            if moving.size == 0:
                break
            cur = node[moving]
            go_left = (
                queries[moving, self.feature[cur]] <= self.threshold[cur]
            )
            node[moving] = np.where(go_left, self.left[cur], self.right[cur])
        return self.leaf_slot[node].astype(np.int64)


def grow_tree(rows, Y, Z, config: ForestConfig, rng) -> CovTree:
    """Grow one tree on the given (bootstrap) row multiset.

    Nodes are expanded depth-first, left child first, so the stream of
    ``rng`` draws consumed by covariate subsampling is a deterministic
    function of the inputs. Recursion stops when a node is smaller than
    twice the minimum node size or no feasible split remains; a root
    below that threshold simply stays a single leaf.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cfg = config.resolved(Y.shape[1], Z.shape[1])
    if rows.size < cfg.min_node_size:
        raise TooFewRows(
            f"a tree needs at least min_node_size = {cfg.min_node_size} "
            f"rows, got {rows.size}"
        )
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    criterion: list[float] = []
    leaf_slot: list[int] = []
    leaf_cov: list[np.ndarray] = []
    leaf_n: list[int] = []
    leaf_rows: list[np.ndarray] = []

    stack = [(rows, -1, False)]
    while stack:
        node_rows, parent, is_left = stack.pop()
        slot = len(feature)
        if parent >= 0:
            if is_left:
                left[parent] = slot
            else:
                right[parent] = slot
        rule = best_split(node_rows, Y, Z, cfg, rng)
        if rule is None:
            feature.append(-1)
            threshold.append(math.nan)
            left.append(-1)
            right.append(-1)
            criterion.append(math.nan)
            leaf_slot.append(len(leaf_cov))
            ordered = np.sort(node_rows)
            leaf_rows.append(ordered)
            leaf_cov.append(_sample_cov(Y[ordered]))
            leaf_n.append(ordered.size)
        else:
            feature.append(rule.covariate_index)
            threshold.append(rule.cutpoint)
            criterion.append(rule.criterion_value)
            left.append(-1)
            right.append(-1)
            leaf_slot.append(-1)
            goes_left = Z[node_rows, rule.covariate_index] <= rule.cutpoint
            stack.append((node_rows[~goes_left], slot, False))
            stack.append((node_rows[goes_left], slot, True))
    return CovTree(
        feature,
        threshold,
        left,
        right,
        criterion,
        leaf_slot,
        np.stack(leaf_cov),
        leaf_n,
        leaf_rows,
        np.sort(rows),
    )


@dataclass
class CovForest:
    """A fitted forest: trees, the resolved config, and a fingerprint of
    the training dataset for provenance checks."""

    trees: list[CovTree]
    config: ForestConfig
    training_fingerprint: str
    p: int
    q: int

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def _tree_seeds(config: ForestConfig):
    return np.random.SeedSequence(config.seed).spawn(config.n_trees)


def _grow_range(Y, Z, config: ForestConfig, start: int, stop: int) -> list[CovTree]:
    seeds = _tree_seeds(config)
    n = Y.shape[0]
    out = []
    for i in range(start, stop):
        rng = np.random.Generator(np.random.Philox(seeds[i]))
        rows = rng.integers(0, n, size=n)
        out.append(grow_tree(rows, Y, Z, config, rng))
    return out


def _grow_range_star(args):
    Y, Z, config, start, stop = args
    return start, _grow_range(Y, Z, config, start, stop)


def fit_forest(
    data: Dataset,
    residuals,
    config: ForestConfig | None = None,
    *,
    n_jobs: int = 1,
) -> CovForest:
    """Grow a forest on standardized residuals against the covariates.

    ``residuals`` is the ``(n, p)`` matrix produced by the kernel
    module's standardization step, row-aligned with ``data``. Each tree
    draws its own bootstrap sample (size ``n``, with replacement) from
    a per-tree counter-based stream, so results are identical for any
    ``n_jobs``.
    """
    if config is None:
        config = ForestConfig()
    Y = np.ascontiguousarray(residuals, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] != data.n:
        raise DimensionMismatch(
            f"residuals shape {Y.shape} does not match dataset n={data.n}"
        )
    if not np.all(np.isfinite(Y)):
        raise ValueError("residuals must be finite")
    cfg = config.resolved(Y.shape[1], data.q)
    if data.n < 2 * cfg.min_node_size:
        raise TooFewRows(
            f"forest fitting needs at least 2 * min_node_size = "
            f"{2 * cfg.min_node_size} rows, got {data.n}"
        )
    Z = data.Z
    if n_jobs > 1 and cfg.n_trees > 1:
        workers = min(n_jobs, cfg.n_trees)
        bounds = np.linspace(0, cfg.n_trees, workers + 1).astype(int)
        jobs = [
            (Y, Z, cfg, int(a), int(b))
            for a, b in zip(bounds[:-1], bounds[1:])
            if b > a
        ]
        trees: list[CovTree | None] = [None] * cfg.n_trees
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for start, grown in pool.map(_grow_range_star, jobs):
                trees[start : start + len(grown)] = grown
    else:
        trees = _grow_range(Y, Z, cfg, 0, cfg.n_trees)
    return CovForest(
        trees=list(trees),
        config=cfg,
        training_fingerprint=dataset_fingerprint(data),
        p=Y.shape[1],
        q=data.q,
    )


def predict_cov_batch(forest: CovForest, queries) -> np.ndarray:
    """Average leaf covariance each query routes to, ``(m, p, p)``.

    Accumulation runs in tree-index order regardless of how the forest
    was grown, keeping predictions bitwise reproducible.
    """
    Q = np.asarray(queries, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[1] != forest.q:
        raise DimensionMismatch(
            f"expected (m, {forest.q}) query points, got shape {Q.shape}"
        )
    acc = np.zeros((Q.shape[0], forest.p, forest.p))
    for tree in forest.trees:
        acc += tree.leaf_cov[tree.route_batch(Q)]
    acc /= len(forest.trees)
    return acc


def predict_cov(forest: CovForest, z) -> SymMatrix:
    """Forest covariance estimate at one covariate point.

    An average of sample covariances, hence positive semidefinite up to
    rounding.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (forest.q,):
        raise DimensionMismatch(
            f"expected a length-{forest.q} covariate point, got shape {z.shape}"
        )
    return SymMatrix(predict_cov_batch(forest, z[None, :])[0])


def predict_corr(forest: CovForest, z) -> SymMatrix:
    """Forest correlation estimate at one covariate point."""
    return cov_to_corr(predict_cov(forest, z))


def save_forest(forest: CovForest, path) -> None:
    """Write a forest to ``path`` in a deterministic binary container.

    The same forest always produces the same bytes: a fixed-order JSON
    header (config, dimensions, training fingerprint, array manifest)
    followed by raw little-endian array payloads.
    """
    trees = forest.trees
    node_offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    leaf_offsets = np.zeros(len(trees) + 1, dtype=np.int64)
    for i, t in enumerate(trees):
        node_offsets[i + 1] = node_offsets[i] + t.n_nodes
        leaf_offsets[i + 1] = leaf_offsets[i] + t.n_leaves
    all_leaf_rows = [r for t in trees for r in t.leaf_rows]
    leaf_row_offsets = np.zeros(len(all_leaf_rows) + 1, dtype=np.int64)
    for i, r in enumerate(all_leaf_rows):
        leaf_row_offsets[i + 1] = leaf_row_offsets[i] + r.size
    arrays = {
        "node_feature": np.concatenate([t.feature for t in trees]).astype("<i4"),
        "node_threshold": np.concatenate([t.threshold for t in trees]).astype("<f8"),
        "node_left": np.concatenate([t.left for t in trees]).astype("<i4"),
        "node_right": np.concatenate([t.right for t in trees]).astype("<i4"),
        "node_criterion": np.concatenate([t.criterion for t in trees]).astype("<f8"),
        "node_leaf_slot": np.concatenate([t.leaf_slot for t in trees]).astype("<i4"),
        "node_offsets": node_offsets.astype("<i8"),
        "leaf_cov": np.concatenate([t.leaf_cov for t in trees]).astype("<f8"),
        "leaf_n": np.concatenate([t.leaf_n for t in trees]).astype("<i8"),
        "leaf_offsets": leaf_offsets.astype("<i8"),
        "leaf_rows": (
            np.concatenate(all_leaf_rows)
            if all_leaf_rows
            else np.empty(0, dtype=np.int64)
        ).astype("<i8"),
        "leaf_row_offsets": leaf_row_offsets.astype("<i8"),
        "inbag": np.stack([t.inbag for t in trees]).astype("<i8"),
    }
    header = {
        "format": "condcov.forest",
        "config": asdict(forest.config),
        "p": forest.p,
        "q": forest.q,
        "n_trees": forest.n_trees,
        "training_fingerprint": forest.training_fingerprint,
        "arrays": [
            [name, arr.dtype.str, list(arr.shape)] for name, arr in arrays.items()
        ],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_forest(path) -> CovForest:
    """Read a forest written by :func:`save_forest`; bit-exact inverse."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(_MAGIC) + 12:
        raise ParseError(f"{path}: file too short to be a forest container")
    if raw[: len(_MAGIC)] != _MAGIC:
        raise ParseError(f"{path}: not a forest container")
    (version,) = struct.unpack_from("<I", raw, len(_MAGIC))
    if version != _FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported container version {version}")
    (hlen,) = struct.unpack_from("<Q", raw, len(_MAGIC) + 4)
    start = len(_MAGIC) + 12
    if start + hlen > len(raw):
        raise ParseError(f"{path}: truncated header")
    try:
        header = json.loads(raw[start : start + hlen])
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: corrupt header: {exc}") from exc
    arrays = {}
    cursor = start + hlen
    for name, dtype_str, shape in header["arrays"]:
        dtype = np.dtype(dtype_str)
        count = int(np.prod(shape)) if shape else 1
        nbytes = dtype.itemsize * count
        if cursor + nbytes > len(raw):
            raise ParseError(f"{path}: truncated payload in array {name!r}")
        arrays[name] = np.frombuffer(raw, dtype, count=count, offset=cursor).reshape(
            shape
        )
        cursor += nbytes
    if cursor != len(raw):
        raise ParseError(f"{path}: trailing or missing payload bytes")
    config = ForestConfig(**header["config"])
    node_off = arrays["node_offsets"]
    leaf_off = arrays["leaf_offsets"]
    row_off = arrays["leaf_row_offsets"]
    trees = []
    for t in range(header["n_trees"]):
        ns, ne = int(node_off[t]), int(node_off[t + 1])
        ls, le = int(leaf_off[t]), int(leaf_off[t + 1])
        leaf_rows = [
            arrays["leaf_rows"][int(row_off[i]) : int(row_off[i + 1])]
            for i in range(ls, le)
        ]
        trees.append(
            CovTree(
                arrays["node_feature"][ns:ne],
                arrays["node_threshold"][ns:ne],
                arrays["node_left"][ns:ne],
                arrays["node_right"][ns:ne],
                arrays["node_criterion"][ns:ne],
                arrays["node_leaf_slot"][ns:ne],
                arrays["leaf_cov"][ls:le],
                arrays["leaf_n"][ls:le],
                leaf_rows,
                arrays["inbag"][t],
            )
        )
    return CovForest(
        trees=trees,
        config=config,
        training_fingerprint=header["training_fingerprint"],
        p=int(header["p"]),
        q=int(header["q"]),
    )
