"""Logistic-regression evaluation protocol.

Per feature group a regularized logistic regression is fitted on puzzle-aware
train/validation splits; the combined model averages group probabilities with
simplex weights.  Hyperparameters are picked by mean validation AUC and
significance comes from label permutations.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import PipelineError
from .lingfeat import BASELINE, GROUP_OF, GROUPS, INTERACTION, LINGUISTIC, POS, SCALAR_NAMES

log = logging.getLogger(__name__)

C_GRID = (0.01, 0.1, 1.0, 10.0, 100.0)
POS_N_GRID = (1, 2, 3)
POS_MIN_DF_GRID = (2, 5, 10)
WEIGHT_STEP = 0.1
TIE_TOL = 1e-12


# -- AUC ---------------------------------------------------------------------


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    sx = x[order]
    ranks = np.empty(len(x), dtype=float)
    # boundaries of runs of equal values
    starts = np.flatnonzero(np.r_[True, sx[1:] != sx[:-1]])
    ends = np.r_[starts[1:], len(x)]
    avg = (starts + ends - 1) / 2.0 + 1.0
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """P(positive outranks negative) with ties counted half (Mann-Whitney form)."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise PipelineError("SINGLE_CLASS_LABELS")
    ranks = _average_ranks(s)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


# -- standardization ---------------------------------------------------------


@dataclass
class Standardizer:
    mean: np.ndarray
    sd: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        observed = ~np.isnan(X)
        counts = observed.sum(axis=0)
        filled = np.where(observed, X, 0.0)
        mean = np.divide(filled.sum(axis=0), counts, out=np.zeros(X.shape[1]), where=counts > 0)
        dev = np.where(observed, X - mean, 0.0)
        var = np.divide((dev ** 2).sum(axis=0), counts, out=np.zeros(X.shape[1]), where=counts > 0)
        sd = np.sqrt(var)
        sd[~(sd > 1e-12)] = 1.0
        return cls(mean, sd)

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        X = np.where(np.isnan(X), self.mean, X)
        return (X - self.mean) / self.sd

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "sd": self.sd.tolist()}


def standardize_fit(X: np.ndarray) -> Standardizer:
    return Standardizer.fit(X)


def standardize_apply(std: Standardizer, X: np.ndarray) -> np.ndarray:
    return std.apply(X)


# -- logistic regression -----------------------------------------------------


def _log1pexp(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return np.exp(-_log1pexp(-z))


def logistic_objective(params: np.ndarray, X: np.ndarray, y: np.ndarray, C: float) -> float:
    """Mean log loss plus ||w||^2 / (2 C m); ``params`` is (w..., b)."""
    w, b = params[:-1], params[-1]
    m = len(y)
    z = X @ w + b
    loss = np.mean(_log1pexp(z) - y * z)
    return float(loss + (w @ w) / (2.0 * C * m))


def logistic_gradient(params: np.ndarray, X: np.ndarray, y: np.ndarray, C: float) -> np.ndarray:
    w, b = params[:-1], params[-1]
    m = len(y)
    r = sigmoid(X @ w + b) - y
    gw = X.T @ r / m + w / (C * m)
    return np.append(gw, r.mean())


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    C: float
    seed: int = 0
    iterations: int = 0
    converged: bool = False
    loss_trace: list[float] = field(default_factory=list, repr=False)

    def decision(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return sigmoid(self.decision(X))

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias, "C": self.C,
                "seed": self.seed, "iterations": self.iterations, "converged": self.converged}


def train_logreg(
    X: np.ndarray,
    y: Sequence[int],
    C: float,
    seed: int = 0,
    tol: float = 1e-6,
    max_iter: int = 1000,
) -> LogRegModel:
    """Full-batch gradient descent with Armijo backtracking from a zero start.

    The step grows by 2x after every accepted step and halves on rejection, so
    the loss sequence is non-increasing.  ``seed`` is recorded only: the solver
    is deterministic.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if C <= 0:
        raise ValueError("C must be positive")
    if y.min() == y.max():
        raise PipelineError("SINGLE_CLASS_LABELS")
    m, d = X.shape
    reg = 1.0 / (C * m)
    # Lipschitz bound of the gradient for the first trial step
    lip = 0.25 * (np.einsum("ij,ij->", X, X) / m + 1.0) + reg
    step = 1.0 / lip
    w = np.zeros(d)
    b = 0.0

    def loss_and_residual(w, b):
        z = X @ w + b
        return float(np.mean(_log1pexp(z) - y * z) + 0.5 * reg * (w @ w)), z

    f, z = loss_and_residual(w, b)
    trace = [f]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = sigmoid(z) - y
        gw = X.T @ r / m + reg * w
        gb = r.mean()
        gmax = max(np.abs(gw).max(initial=0.0), abs(gb))
        if gmax < tol:
            converged = True
            it -= 1
            break
        gsq = gw @ gw + gb * gb
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            f_new, z_new = loss_and_residual(w_new, b_new)
            if f_new <= f - 0.5 * step * gsq:
                break
            step *= 0.5
            if step < 1e-20:
                f_new, z_new, w_new, b_new = f, z, w, b
                break
        w, b, f, z = w_new, b_new, f_new, z_new
        trace.append(f)
        step *= 2.0
    return LogRegModel(w, float(b), C, seed, it, converged, trace)


# -- splits ------------------------------------------------------------------


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    validation: np.ndarray


def puzzle_aware_splits(
    puzzle_ids: Sequence[str],
    labels: Sequence[int],
    n_iter: int = 20,
    train_frac: float = 0.8,
    seed: int = 0,
    max_redraws: int = 100,
) -> list[Split]:
    """Shuffle puzzles and fill the training side whole-puzzle at a time.

    Puzzles go to training until it holds at least ``train_frac`` of the games;
    the last puzzle in the shuffled order always goes to validation.  A draw is
    repeated when either side lacks a class.
    """
    pids = np.asarray(puzzle_ids)
    y = np.asarray(labels).astype(int)
    puzzles = sorted(set(pids.tolist()))
    if len(puzzles) < 2:
        raise PipelineError("UNSPLITTABLE_CORPUS", "need at least two puzzles")
    members = {p: np.flatnonzero(pids == p) for p in puzzles}
    total = len(pids)
    splits = []
    for it in range(n_iter):
        for redraw in range(max_redraws):
            rng = np.random.default_rng([seed, it, redraw])
            order = [puzzles[k] for k in rng.permutation(len(puzzles))]
            train_p, count = [], 0
            for p in order[:-1]:
                if count >= train_frac * total:
                    break
                train_p.append(p)
                count += len(members[p])
            val_p = order[len(train_p):]
            tr = np.sort(np.concatenate([members[p] for p in train_p]))
            va = np.sort(np.concatenate([members[p] for p in val_p]))
            if len(set(y[tr])) == 2 and len(set(y[va])) == 2:
                splits.append(Split(tr, va))
                break
        else:
            raise PipelineError("UNSPLITTABLE_CORPUS", f"iteration {it}: no two-class split in {max_redraws} draws")
    return splits


# -- feature table and group design matrices --------------------------------


@dataclass
class FeatureTable:
    game_ids: list[str]
    puzzle_ids: list[str]
    scalars: np.ndarray  # n_games x len(SCALAR_NAMES), NaN = missing
    pos_counts: list[Counter]
    _pos_cache: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.game_ids)

    def group_columns(self, group: str) -> np.ndarray:
        return np.array([i for i, n in enumerate(SCALAR_NAMES) if GROUP_OF[n] == group])

    def pos_matrix(self, n: int) -> tuple[list[tuple[str, ...]], np.ndarray, np.ndarray]:
        """All grams of order <= n, their relative frequencies and presence matrix."""
        if n not in self._pos_cache:
            grams = sorted({g for c in self.pos_counts for g in c if len(g) <= n})
            grams.sort(key=len)
            index = {g: j for j, g in enumerate(grams)}
            counts = np.zeros((len(self), len(grams)))
            totals = np.zeros((len(self), n + 1))
            for i, c in enumerate(self.pos_counts):
                for g, k in c.items():
                    if len(g) <= n:
                        totals[i, len(g)] += k
                        counts[i, index[g]] = k
            orders = np.array([len(g) for g in grams], dtype=int)
            denom = totals[:, orders] if len(grams) else np.zeros((len(self), 0))
            rel = np.divide(counts, denom, out=np.zeros_like(counts), where=denom > 0)
            self._pos_cache[n] = (grams, rel, counts > 0)
        return self._pos_cache[n]


@dataclass(frozen=True)
class GroupParams:
    C: float
    n: int | None = None
    min_df: int | None = None

    def to_dict(self) -> dict:
        d: dict = {"C": self.C}
        if self.n is not None:
            d.update(n=self.n, min_df=self.min_df)
        return d


def design(table: FeatureTable, group: str, params: GroupParams, train: np.ndarray):
    """Design matrix for ``group`` with POS vocabulary fitted on ``train`` rows only."""
    if group == POS:
        grams, rel, present = table.pos_matrix(params.n)
        df = present[train].sum(axis=0)
        keep = np.flatnonzero(df >= params.min_df)
        return rel[:, keep], [grams[j] for j in keep]
    cols = table.group_columns(group)
    return table.scalars[:, cols], [SCALAR_NAMES[c] for c in cols]


def fit_predict(
    table: FeatureTable, group: str, params: GroupParams, y: np.ndarray, split: Split, seed: int = 0
) -> np.ndarray:
    """Validation probabilities of a group model trained on the split's train side."""
    X, _ = design(table, group, params, split.train)
    if X.shape[1] == 0:
        return np.full(len(split.validation), y[split.train].mean())
    std = Standardizer.fit(X[split.train])
    model = train_logreg(std.apply(X[split.train]), y[split.train], params.C, seed)
    return model.predict_proba(std.apply(X[split.validation]))


def group_candidates(group: str, grids: Mapping | None = None) -> list[GroupParams]:
    """Candidates in tie-break preference order: smaller C, smaller n, larger min_df."""
    grids = grids or {}
    cs = sorted(grids.get("C", C_GRID))
    if group != POS:
        return [GroupParams(c) for c in cs]
    ns = sorted(grids.get("n", POS_N_GRID))
    dfs = sorted(grids.get("min_df", POS_MIN_DF_GRID), reverse=True)
    return [GroupParams(c, n, k) for c, n, k in itertools.product(cs, ns, dfs)]


def weight_grid(n_groups: int = 4, step: float = WEIGHT_STEP) -> list[tuple[float, ...]]:
    """Simplex weights on a ``step`` lattice, most uniform first."""
    k = round(1.0 / step)
    out = []
    for combo in itertools.product(range(k + 1), repeat=n_groups):
        if sum(combo) == k:
            out.append(tuple(c / k for c in combo))
    u = 1.0 / n_groups
    out.sort(key=lambda w: (round(sum((x - u) ** 2 for x in w), 12), tuple(-x for x in w)))
    return out


@dataclass
class GroupResult:
    group: str
    params: GroupParams
    aucs: list[float]
    val_probs: list[np.ndarray] = field(repr=False)

    @property
    def mean_auc(self) -> float:
        return float(np.mean(self.aucs))


@dataclass
class GridResult:
    groups: dict[str, GroupResult]
    weights: tuple[float, ...]
    ensemble_aucs: list[float]
    group_order: tuple[str, ...] = GROUPS

    @property
    def ensemble_mean_auc(self) -> float:
        return float(np.mean(self.ensemble_aucs))


def evaluate_group(
    table: FeatureTable, group: str, params: GroupParams, y: np.ndarray, splits: Sequence[Split], seed: int = 0
) -> GroupResult:
    probs, aucs = [], []
    for sp in splits:
        p = fit_predict(table, group, params, y, sp, seed)
        probs.append(p)
        aucs.append(auc(p, y[sp.validation]))
    return GroupResult(group, params, aucs, probs)


def ensemble_aucs(
    results: Sequence[GroupResult], weights: Sequence[float], y: np.ndarray, splits: Sequence[Split]
) -> list[float]:
    out = []
    for s, sp in enumerate(splits):
        p = sum(w * r.val_probs[s] for w, r in zip(weights, results))
        out.append(auc(p, y[sp.validation]))
    return out


def _vocab_signature(table: FeatureTable, group: str, params: GroupParams, splits) -> tuple:
    if group != POS:
        return ()
    _, _, present = table.pos_matrix(params.n)
    return tuple(
        hashlib.sha1(np.flatnonzero(present[sp.train].sum(axis=0) >= params.min_df).tobytes()).hexdigest()
        for sp in splits
    )


def _pick(candidates, score_of: Callable) -> tuple:
    best, best_score = None, -math.inf
    for cand in candidates:
        sc = score_of(cand)
        if sc > best_score + TIE_TOL:
            best, best_score = cand, sc
    return best, best_score


def grid_search(
    table: FeatureTable,
    y: Sequence[int],
    splits: Sequence[Split],
    grids: Mapping | None = None,
    groups: Sequence[str] = GROUPS,
    seed: int = 0,
) -> GridResult:
    """Best hyperparameters per group, then the best simplex combination of groups."""
    y = np.asarray(y, dtype=int)
    grids = grids or {}
    chosen: dict[str, GroupResult] = {}
    for group in groups:
        cache: dict[GroupParams, GroupResult] = {}
        by_design: dict[tuple, GroupResult] = {}

        def score_of(params, group=group, cache=cache, by_design=by_design):
            # min_df values that yield the same vocabularies give identical models
            key = (params.C, params.n, _vocab_signature(table, group, params, splits))
            if key not in by_design:
                by_design[key] = evaluate_group(table, group, params, y, splits, seed)
            cache[params] = replace(by_design[key], params=params)
            return cache[params].mean_auc

        best, best_score = _pick(group_candidates(group, grids), score_of)
        chosen[group] = cache[best]
        log.info("group %s: %s mean AUC %.4f", group, best.to_dict(), best_score)
    results = [chosen[g] for g in groups]
    wgrid = grids.get("weights") or weight_grid(len(groups), grids.get("weight_step", WEIGHT_STEP))
    ens_cache: dict = {}

    def ens_score(w):
        ens_cache[w] = ensemble_aucs(results, w, y, splits)
        return float(np.mean(ens_cache[w]))

    weights, _ = _pick([tuple(w) for w in wgrid], ens_score)
    return GridResult(chosen, weights, ens_cache[weights], tuple(groups))


# -- fixed pipelines and significance --------------------------------------


@dataclass
class FixedPipeline:
    """Split evaluation with frozen hyperparameters, as a function of the labels.

    ``params`` maps group -> GroupParams; ``weights`` (aligned with ``params``)
    turns it into the combined model.  Splits are redrawn from the same seed for
    each label vector.
    """

    table: FeatureTable
    params: dict[str, GroupParams]
    weights: tuple[float, ...] | None = None
    n_iter: int = 20
    train_frac: float = 0.8
    seed: int = 0

    def split_aucs(self, labels: Sequence[int], split_seed: int | None = None) -> list[float]:
        y = np.asarray(labels, dtype=int)
        splits = puzzle_aware_splits(
            self.table.puzzle_ids, y, self.n_iter, self.train_frac,
            self.seed if split_seed is None else split_seed,
        )
        groups = list(self.params)
        if self.weights is None:
            (g,) = groups
            return evaluate_group(self.table, g, self.params[g], y, splits, self.seed).aucs
        results = [evaluate_group(self.table, g, self.params[g], y, splits, self.seed) for g in groups]
        return ensemble_aucs(results, self.weights, y, splits)

    def __call__(self, labels: Sequence[int]) -> float:
        return float(np.mean(self.split_aucs(labels)))


def permutation_test(
    pipeline: Callable[[np.ndarray], float],
    labels: Sequence[int],
    n_perm: int = 5000,
    seed: int = 0,
    observed: float | None = None,
    jobs: int = 1,
) -> tuple[float, float, np.ndarray]:
    """Return (p, observed, null) with p = (1 + #{null >= observed}) / (1 + n_perm)."""
    y = np.asarray(labels, dtype=int)
    if observed is None:
        observed = pipeline(y)
    rng = np.random.default_rng(seed)
    perms = [rng.permutation(y) for _ in range(n_perm)]
    if jobs > 1 and n_perm > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            null = np.fromiter(pool.map(pipeline, perms, chunksize=max(1, n_perm // (4 * jobs))), float, n_perm)
    else:
        null = np.fromiter(map(pipeline, perms), float, n_perm)
    p = (1 + int(np.sum(null >= observed - TIE_TOL))) / (1 + n_perm)
    return p, observed, null


def bootstrap_splits(pipeline: FixedPipeline, labels: Sequence[int], n: int, seed: int = 0) -> dict:
    """Re-evaluate frozen models on ``n`` fresh puzzle-aware splits."""
    if n <= 0:
        return {"n": 0, "mean_auc": None, "sd_auc": None}
    fresh = replace(pipeline, n_iter=n)
    aucs = fresh.split_aucs(labels, split_seed=seed + 1_000_003)
    return {"n": n, "mean_auc": float(np.mean(aucs)), "sd_auc": float(np.std(aucs))}


# -- reports and artifacts ---------------------------------------------------

FEATURE_SETS = ("Baseline", "Linguistic", "Interaction", "POS", "All")
_SET_GROUP = {"Baseline": BASELINE, "Linguistic": LINGUISTIC, "Interaction": INTERACTION, "POS": POS}


@dataclass
class EvalReport:
    objective: str
    mode: str
    results: dict[str, dict]  # feature set -> {aucs, mean_auc, p_value, params}
    n_perm: int
    seed: int
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"objective": self.objective, "mode": self.mode, "results": self.results,
                "n_perm": self.n_perm, "seed": self.seed, "provenance": self.provenance}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalReport":
        return cls(d["objective"], d["mode"], dict(d["results"]), int(d["n_perm"]),
                   int(d["seed"]), dict(d.get("provenance", {})))


def evaluate_protocol(
    table: FeatureTable,
    y: Sequence[int],
    objective: str,
    mode: str,
    n_iter: int = 20,
    train_frac: float = 0.8,
    n_perm: int = 5000,
    seed: int = 0,
    grids: Mapping | None = None,
    n_bootstrap: int = 0,
    jobs: int = 1,
) -> tuple[EvalReport, GridResult]:
    """Grid search on puzzle-aware splits, then permutation significance per feature set."""
    y = np.asarray(y, dtype=int)
    splits = puzzle_aware_splits(table.puzzle_ids, y, n_iter, train_frac, seed)
    grid = grid_search(table, y, splits, grids, seed=seed)
    results: dict[str, dict] = {}
    for name in FEATURE_SETS:
        if name == "All":
            params = {g: grid.groups[g].params for g in grid.group_order}
            pipe = FixedPipeline(table, params, grid.weights, n_iter, train_frac, seed)
            aucs = grid.ensemble_aucs
            extra = {"weights": dict(zip(grid.group_order, grid.weights)),
                     "params": {g: p.to_dict() for g, p in params.items()}}
        else:
            g = _SET_GROUP[name]
            pipe = FixedPipeline(table, {g: grid.groups[g].params}, None, n_iter, train_frac, seed)
            aucs = grid.groups[g].aucs
            extra = {"params": grid.groups[g].params.to_dict()}
        mean = float(np.mean(aucs))
        p = None
        if n_perm > 0:
            p, _, _ = permutation_test(pipe, y, n_perm, seed + 7919, observed=mean, jobs=jobs)
        entry = {"aucs": [float(a) for a in aucs], "mean_auc": mean, "p_value": p, **extra}
        if n_bootstrap:
            entry["bootstrap"] = bootstrap_splits(pipe, y, n_bootstrap, seed)
        results[name] = entry
        log.info("%s %s %s: mean AUC %.4f p=%s", objective, mode, name, mean, p)
    return EvalReport(objective, mode, results, n_perm, seed), grid


@dataclass
class TrainedGroup:
    group: str
    params: GroupParams
    feature_names: list[str]
    standardizer: Standardizer
    model: LogRegModel

    def to_dict(self) -> dict:
        return {"group": self.group, "params": self.params.to_dict(),
                "features": self.feature_names, "standardizer": self.standardizer.to_dict(),
                "model": self.model.to_dict()}


def fit_final_models(table: FeatureTable, y: Sequence[int], grid: GridResult, seed: int = 0) -> list[TrainedGroup]:
    """Refit each chosen group model on every game."""
    y = np.asarray(y, dtype=int)
    everything = np.arange(len(table))
    out = []
    for g in grid.group_order:
        params = grid.groups[g].params
        X, names = design(table, g, params, everything)
        std = Standardizer.fit(X)
        model = train_logreg(std.apply(X), y, params.C, seed)
        out.append(TrainedGroup(g, params, [n if isinstance(n, str) else "pos." + " ".join(n) for n in names], std, model))
    return out


def registry_hash() -> str:
    return hashlib.sha256(json.dumps([SCALAR_NAMES, [GROUP_OF[n] for n in SCALAR_NAMES]]).encode()).hexdigest()[:16]
