"""Glue between game records, feature extraction and the evaluation protocol."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .corpus import GameRecord
from .geo import game_label
from .lingfeat import SCALAR_NAMES, early_window, featurize_game
from .model import FeatureTable
from .text import Resources, load_resources

MODES = ("full", "early20")


@dataclass
class PreparedCorpus:
    games: list[GameRecord]  # as featurized (truncated in early20 mode)
    originals: list[GameRecord]
    excluded: list[str]  # game ids dropped by the early-window coverage rule
    table: FeatureTable

    def labels(self, objective: str) -> np.ndarray:
        return np.array([int(game_label(g).objective(objective)) for g in self.originals])


def prepare(
    games: list[GameRecord],
    mode: str = "full",
    resources: Resources | None = None,
    horizon_s: float = 20.0,
    max_coverage: float = 0.75,
    max_n: int = 3,
) -> PreparedCorpus:
    """Featurize ``games``; in early20 mode keep only eligible truncated windows.

    Labels always come from the complete game.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    resources = resources or load_resources()
    used, originals, excluded = [], [], []
    for g in games:
        if mode == "early20":
            win = early_window(g, horizon_s, max_coverage)
            if not win.eligible:
                excluded.append(g.game_id)
                continue
            used.append(win.game)
        else:
            used.append(g)
        originals.append(g)
    rows, counts = [], []
    for g in used:
        fv = featurize_game(g, resources, None, max_n)
        rows.append([np.nan if m else v for v, m in zip(fv.values, fv.mask)])
        counts.append(fv.pos_counts)
    scalars = np.array(rows, dtype=float).reshape(len(used), len(SCALAR_NAMES))
    table = FeatureTable([g.game_id for g in used], [g.puzzle_id for g in used], scalars, counts)
    return PreparedCorpus(used, originals, excluded, table)


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()[:16]
