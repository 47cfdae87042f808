"""Time-wise filtered ranking: MRR and Hits@k over both query directions.

Every test fact (h, r, t, tau) contributes two queries: the tail query
(h, r, ?, tau) and the head query realized as the tail query
(t, r + R, ?, tau) under the inverse relation, mirroring how the model is
trained. Competitor entities that are known true answers for the same
(entity, relation, timestamp) key are removed before ranking; the gold
answer itself always stays in.

Ties on the gold score are resolved deterministically at half their
count, rounded toward the worse rank: rank = 1 + #greater + (#ties+1)//2.
Scoring runs in float64 regardless of the training precision so rank
boundaries do not depend on the training mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import FilterIndex
from .model import ModelParams, score_against_all

__all__ = ["RankingResult", "rank_query", "evaluate", "format_table", "write_results"]

HITS_KS = (1, 3, 10)

_EVAL_BLOCK = 1024


@dataclass(frozen=True)
class RankingResult:
    mrr: float
    hits: dict[int, float]
    n_queries: int
    ranks: np.ndarray

    @classmethod
    def from_ranks(cls, ranks: np.ndarray) -> "RankingResult":
        ranks = np.asarray(ranks, dtype=np.int64)
        return cls(
            mrr=float(np.mean(1.0 / ranks)),
            hits={k: float(np.mean(ranks <= k)) for k in HITS_KS},
            n_queries=len(ranks),
            ranks=ranks,
        )


def _rank_row(scores: np.ndarray, gold: int, filtered: np.ndarray) -> int:
    gold_score = scores[gold]
    scores = scores.copy()
    scores[filtered] = -np.inf
    scores[gold] = -np.inf
    greater = int((scores > gold_score).sum())
    ties = int((scores == gold_score).sum())
    return 1 + greater + (ties + 1) // 2


def rank_query(
    params: ModelParams,
    query: tuple[int, int, int],
    gold: int,
    filter_index: FilterIndex,
) -> int:
    """Filtered rank of `gold` for one (entity, relation, timestamp) query."""
    entity, relation, timestamp = query
    scores, _ = score_against_all(
        params.astype(np.float64),
        np.array([entity]),
        np.array([relation]),
        np.array([timestamp]),
    )
    return _rank_row(scores[0], gold, filter_index.answers(entity, relation, timestamp))


def evaluate(
    params: ModelParams,
    quads: np.ndarray,
    filter_index: FilterIndex,
    block: int = _EVAL_BLOCK,
) -> RankingResult:
    """Filtered MRR / Hits@k over a split array [n, 4]; 2n queries total.

    Queries are laid out as all tail queries (fact order) followed by all
    head queries, which is also the row order of the rank dump.
    """
    quads = np.asarray(quads)
    n = len(quads)
    n_rel = params.n_relations
    p64 = params.astype(np.float64)

    e_all = np.concatenate([quads[:, 0], quads[:, 2]])
    r_all = np.concatenate([quads[:, 1], quads[:, 1] + n_rel])
    tau_all = np.concatenate([quads[:, 3], quads[:, 3]])
    gold_all = np.concatenate([quads[:, 2], quads[:, 0]])

    ranks = np.empty(2 * n, dtype=np.int64)
    for start in range(0, 2 * n, block):
        stop = min(start + block, 2 * n)
        scores, _ = score_against_all(
            p64, e_all[start:stop], r_all[start:stop], tau_all[start:stop]
        )
        for i in range(stop - start):
            row = start + i
            filtered = filter_index.answers(e_all[row], r_all[row], tau_all[row])
            ranks[row] = _rank_row(scores[i], int(gold_all[row]), filtered)
    return RankingResult.from_ranks(ranks)


def format_table(result: RankingResult, title: str = "ranking") -> str:
    lines = [
        f"{title:<12}  value",
        f"{'MRR':<12}  {result.mrr:.6f}",
    ]
    for k in HITS_KS:
        lines.append(f"{'Hits@' + str(k):<12}  {result.hits[k]:.6f}")
    lines.append(f"{'queries':<12}  {result.n_queries}")
    return "\n".join(lines)


def write_results(path: str | Path, result: RankingResult, split: str) -> None:
    """Machine-readable key-value results file."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"split = {split}\n")
        fh.write(f"n_queries = {result.n_queries}\n")
        fh.write(f"mrr = {result.mrr:.10f}\n")
        for k in HITS_KS:
            fh.write(f"hits@{k} = {result.hits[k]:.10f}\n")


def write_rank_dump(path: str | Path, quads: np.ndarray, result: RankingResult) -> None:
    """Per-query tab-separated dump: fact index, direction, gold id, rank."""
    n = len(np.asarray(quads))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("fact\tdirection\tgold\trank\n")
        for row, rank in enumerate(result.ranks.tolist()):
            fact = row % n
            direction = "tail" if row < n else "head"
            gold = quads[fact, 2] if row < n else quads[fact, 0]
            fh.write(f"{fact}\t{direction}\t{int(gold)}\t{rank}\n")
