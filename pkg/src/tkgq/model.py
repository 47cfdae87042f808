"""Embedding tables, forward scoring, and closed-form score gradients.

The score of a fact (h, r, t, tau) is

    phi = (q_h ⊗ w) · q_t,        w = n(q_tau) ⊗ q_r ⊗ conj(n(q_tau)) + sin(q_tau')

where q_h, q_t are entity embeddings, q_r a (possibly inverse) relation
embedding, n(q_tau) the unit-normalized rotation-time embedding acting on
q_r by conjugation, and sin(q_tau') the periodic time translation. All
embeddings live in H^d: four real [rows, d] component arrays per table.

Gradients are hand-derived Hamilton-product adjoints rather than autodiff.
They rest on the identities

    inner(x ⊗ y, z) = inner(y, conj(x) ⊗ z) = inner(x, z ⊗ conj(y))

so for L = inner(g, v ⊗ r ⊗ conj(v)) (summed over coordinates):

    dL/dr = conj(v) ⊗ g ⊗ v
    dL/dv = g ⊗ v ⊗ conj(r) + conj(g) ⊗ v ⊗ r

and the unit-normalization v = u/|u| backpropagates as
(dv - (v·dv) v) / |u| per coordinate. Every formula is pinned against
central finite differences in the test suite.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import quat
from .errors import CheckpointError
from .quat import QuaternionBatch

__all__ = [
    "ModelParams",
    "Gradients",
    "ScoreBatch",
    "time_aware_relation",
    "time_sensitive_relation",
    "score",
    "score_all_entities",
    "score_against_all",
    "score_gradients",
    "parameter_count",
    "save_checkpoint",
    "load_checkpoint",
    "checkpoint_header",
]

TABLE_NAMES = ("entity", "relation", "rot_time", "per_time")

_CKPT_MAGIC = b"TKGQCKPT"
_CKPT_VERSION = 1


@dataclass
class ModelParams:
    """The four embedding tables plus model-shape metadata.

    ``relation`` holds 2R rows: base relations in [0, R), inverses in
    [R, 2R). ``rot_time`` rows are the rotation-time embeddings (stored
    unconstrained, unit-normalized on use); ``per_time`` rows feed the
    periodic sine translation.
    """

    entity: QuaternionBatch
    relation: QuaternionBatch
    rot_time: QuaternionBatch
    per_time: QuaternionBatch
    n_relations: int
    periodic: bool = True
    seed: int = 0

    @property
    def dim(self) -> int:
        return self.entity.shape[1]

    @property
    def n_entities(self) -> int:
        return self.entity.shape[0]

    @property
    def n_timestamps(self) -> int:
        return self.rot_time.shape[0]

    @property
    def dtype(self) -> np.dtype:
        return self.entity.dtype

    def tables(self) -> tuple[QuaternionBatch, ...]:
        return (self.entity, self.relation, self.rot_time, self.per_time)

    @classmethod
    def init(
        cls,
        n_entities: int,
        n_relations: int,
        n_timestamps: int,
        dim: int,
        periodic: bool = True,
        seed: int = 0,
        dtype=np.float64,
    ) -> "ModelParams":
        """Draw all tables i.i.d. uniform in [-s, s] with s = 1/sqrt(dim).

        The scale keeps initial scores O(1). Tables are drawn in a fixed
        order (entity, relation, rot_time, per_time) from one generator so
        a seed pins every entry; float32 tables reuse the float64 stream.
        """
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        rng = np.random.default_rng(seed)
        s = 1.0 / np.sqrt(dim)

        def draw(rows: int) -> QuaternionBatch:
            block = rng.uniform(-s, s, size=(4, rows, dim))
            return QuaternionBatch(*(block[i].astype(dtype) for i in range(4)))

        return cls(
            entity=draw(n_entities),
            relation=draw(2 * n_relations),
            rot_time=draw(n_timestamps),
            per_time=draw(n_timestamps),
            n_relations=n_relations,
            periodic=periodic,
            seed=seed,
        )

    def astype(self, dtype) -> "ModelParams":
        if self.dtype == np.dtype(dtype):
            return self
        return ModelParams(
            *(t.astype(dtype) for t in self.tables()),
            n_relations=self.n_relations,
            periodic=self.periodic,
            seed=self.seed,
        )

    def all_finite(self) -> bool:
        return all(
            np.isfinite(comp).all() for t in self.tables() for comp in t.components()
        )


@dataclass
class Gradients:
    """Dense per-table gradient (or accumulator) buffers.

    Rows never touched by a batch stay exactly zero, so applying these
    densely is equivalent to a sparse row update.
    """

    entity: QuaternionBatch
    relation: QuaternionBatch
    rot_time: QuaternionBatch
    per_time: QuaternionBatch

    @classmethod
    def zeros(cls, params: ModelParams) -> "Gradients":
        return cls(
            *(QuaternionBatch.zeros(t.shape, dtype=t.dtype) for t in params.tables())
        )

    def tables(self) -> tuple[QuaternionBatch, ...]:
        return (self.entity, self.relation, self.rot_time, self.per_time)

    def add_scaled(self, other: "Gradients", coeff: float = 1.0) -> "Gradients":
        """In-place self += coeff * other."""
        for mine, theirs in zip(self.tables(), other.tables()):
            for mc, tc in zip(mine.components(), theirs.components()):
                if coeff == 1.0:
                    mc += tc
                else:
                    mc += coeff * tc
        return self


@dataclass
class ForwardCache:
    """Intermediates of one batch forward pass, kept for the backward pass."""

    e_ids: np.ndarray
    r_ids: np.ndarray
    tau_ids: np.ndarray
    qh: QuaternionBatch
    qr: QuaternionBatch
    norm: np.ndarray          # |q_tau| per (row, coordinate)
    v: QuaternionBatch        # unit rotor
    qper: QuaternionBatch | None
    w: QuaternionBatch        # composite time-sensitive relation
    u: QuaternionBatch        # q_h ⊗ w
    t_ids: np.ndarray | None = None
    qt: QuaternionBatch | None = None


@dataclass
class ScoreBatch:
    """Per-quadruple scores plus the cached forward intermediates."""

    scores: np.ndarray
    cache: ForwardCache


def _unit_rotor(params: ModelParams, tau_ids: np.ndarray):
    raw = params.rot_time.gather(tau_ids)
    n = quat.magnitude(raw)
    v = quat.normalize(raw)
    return n, v


def time_aware_relation(params: ModelParams, r_ids, tau_ids) -> QuaternionBatch:
    """Rotate relation embeddings by their timestamp rotor:
    n(q_tau) ⊗ q_r ⊗ conj(n(q_tau))."""
    r_ids = np.asarray(r_ids)
    tau_ids = np.asarray(tau_ids)
    qr = params.relation.gather(r_ids)
    _, v = _unit_rotor(params, tau_ids)
    return quat.hamilton_product(quat.hamilton_product(v, qr), quat.conjugate(v))


def time_sensitive_relation(params: ModelParams, r_ids, tau_ids) -> QuaternionBatch:
    """Rotated relation plus sin of the periodic-time embedding; with the
    periodic term disabled this is exactly the time-aware rotation."""
    rotated = time_aware_relation(params, r_ids, tau_ids)
    if not params.periodic:
        return rotated
    qper = params.per_time.gather(np.asarray(tau_ids))
    return quat.add(rotated, quat.elementwise_sine(qper))


def _forward(params: ModelParams, e_ids, r_ids, tau_ids) -> ForwardCache:
    e_ids = np.asarray(e_ids)
    r_ids = np.asarray(r_ids)
    tau_ids = np.asarray(tau_ids)
    qh = params.entity.gather(e_ids)
    qr = params.relation.gather(r_ids)
    n, v = _unit_rotor(params, tau_ids)
    rotated = quat.hamilton_product(quat.hamilton_product(v, qr), quat.conjugate(v))
    if params.periodic:
        qper = params.per_time.gather(tau_ids)
        w = quat.add(rotated, quat.elementwise_sine(qper))
    else:
        qper = None
        w = rotated
    u = quat.hamilton_product(qh, w)
    return ForwardCache(
        e_ids=e_ids, r_ids=r_ids, tau_ids=tau_ids,
        qh=qh, qr=qr, norm=n, v=v, qper=qper, w=w, u=u,
    )


def score(params: ModelParams, quads: np.ndarray) -> ScoreBatch:
    """Scores of explicit quadruples [n, 4] = (h, r, t, tau)."""
    quads = np.asarray(quads)
    cache = _forward(params, quads[:, 0], quads[:, 1], quads[:, 3])
    cache.t_ids = quads[:, 2]
    cache.qt = params.entity.gather(cache.t_ids)
    return ScoreBatch(scores=quat.inner_product(cache.u, cache.qt), cache=cache)


def score_against_all(
    params: ModelParams, e_ids, r_ids, tau_ids
) -> tuple[np.ndarray, ForwardCache]:
    """Scores of (e, r, tau) queries against every candidate tail entity.

    Returns a [n, n_entities] array; row i equals pointwise scores of
    (e_i, r_i, j, tau_i) over all j. One matmul per quaternion component.
    """
    cache = _forward(params, e_ids, r_ids, tau_ids)
    ent = params.entity
    u = cache.u
    scores = u.a @ ent.a.T
    scores += u.b @ ent.b.T
    scores += u.c @ ent.c.T
    scores += u.d @ ent.d.T
    return scores, cache


def score_all_entities(params: ModelParams, entity_id: int, relation_id: int, timestamp_id: int) -> np.ndarray:
    """Single-query convenience wrapper around score_against_all."""
    scores, _ = score_against_all(
        params,
        np.array([entity_id]),
        np.array([relation_id]),
        np.array([timestamp_id]),
    )
    return scores[0]


def _scatter_add(table: QuaternionBatch, rows: np.ndarray, vals: QuaternionBatch) -> None:
    # np.add.at is unbuffered, so duplicate row ids accumulate correctly
    for tc, vc in zip(table.components(), vals.components()):
        np.add.at(tc, rows, vc)


def _weighted(x: QuaternionBatch, weights: np.ndarray) -> QuaternionBatch:
    w = weights[:, None]
    return QuaternionBatch(x.a * w, x.b * w, x.c * w, x.d * w)


def relation_path_backward(cache: ForwardCache, d_w: QuaternionBatch, grads: Gradients) -> None:
    """Backpropagate a gradient on the composite relation w into the
    relation, rotation-time, and periodic-time tables."""
    if cache.qper is not None:
        d_per = QuaternionBatch(
            d_w.a * np.cos(cache.qper.a),
            d_w.b * np.cos(cache.qper.b),
            d_w.c * np.cos(cache.qper.c),
            d_w.d * np.cos(cache.qper.d),
        )
        _scatter_add(grads.per_time, cache.tau_ids, d_per)

    v, qr = cache.v, cache.qr
    d_qr = quat.hamilton_product(quat.hamilton_product(quat.conjugate(v), d_w), v)
    _scatter_add(grads.relation, cache.r_ids, d_qr)

    d_v = quat.add(
        quat.hamilton_product(quat.hamilton_product(d_w, v), quat.conjugate(qr)),
        quat.hamilton_product(quat.hamilton_product(quat.conjugate(d_w), v), qr),
    )
    # through v = u / |u|: (d_v - (v . d_v) v) / |u|; zero-norm rows got the
    # constant identity rotor, so they receive no gradient
    radial = v.a * d_v.a + v.b * d_v.b + v.c * d_v.c + v.d * d_v.d
    zero = cache.norm == 0
    inv_n = np.where(zero, 0.0, 1.0 / np.where(zero, 1.0, cache.norm))
    d_tau = QuaternionBatch(
        (d_v.a - radial * v.a) * inv_n,
        (d_v.b - radial * v.b) * inv_n,
        (d_v.c - radial * v.c) * inv_n,
        (d_v.d - radial * v.d) * inv_n,
    )
    _scatter_add(grads.rot_time, cache.tau_ids, d_tau)


def score_gradients(params: ModelParams, batch: ScoreBatch, upstream: np.ndarray) -> Gradients:
    """Gradients of sum_i upstream_i * phi_i for explicitly scored quadruples.

    Only rows referenced by the batch receive nonzero entries.
    """
    cache = batch.cache
    if cache.qt is None or cache.t_ids is None:
        raise ValueError("score_gradients needs a ScoreBatch produced by score()")
    upstream = np.asarray(upstream, dtype=cache.u.dtype)

    grads = Gradients.zeros(params)
    d_u = _weighted(cache.qt, upstream)
    d_qt = _weighted(cache.u, upstream)
    d_qh = quat.hamilton_product(d_u, quat.conjugate(cache.w))
    d_w = quat.hamilton_product(quat.conjugate(cache.qh), d_u)

    _scatter_add(grads.entity, cache.e_ids, d_qh)
    _scatter_add(grads.entity, cache.t_ids, d_qt)
    relation_path_backward(cache, d_w, grads)
    return grads


def parameter_count(params: ModelParams) -> int:
    """Total stored real parameters: (|E| + 2|R| + 2|T|) * d * 4."""
    return sum(4 * t.shape[0] * t.shape[1] for t in params.tables())


# ---------------------------------------------------------------------------
# checkpoint format
# ---------------------------------------------------------------------------
#
# magic "TKGQCKPT", u32 version, u32 n_entities, u32 n_relations (base),
# u32 n_timestamps, u32 dim, u32 periodic flag, i64 seed; then the four
# parameter tables and the four Adagrad accumulator tables, each as their
# a, b, c, d components in row-major little-endian float64. Round-trips
# bit-exactly for float64 models.


def save_checkpoint(
    path: str | Path,
    params: ModelParams,
    accumulators: Gradients | None = None,
) -> None:
    if accumulators is None:
        accumulators = Gradients.zeros(params.astype(np.float64))
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(
            struct.pack(
                "<6I",
                _CKPT_VERSION,
                params.n_entities,
                params.n_relations,
                params.n_timestamps,
                params.dim,
                int(params.periodic),
            )
        )
        fh.write(struct.pack("<q", params.seed))
        for group in (params.tables(), accumulators.tables()):
            for table in group:
                for comp in table.components():
                    fh.write(np.ascontiguousarray(comp, dtype="<f8").tobytes())


def checkpoint_header(path: str | Path) -> dict:
    """Parse and validate the fixed-size header without reading the tables."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        head = fh.read(40)
    if len(head) < 40 or head[:8] != _CKPT_MAGIC:
        raise CheckpointError(f"{path}: not a model checkpoint (bad magic)")
    version, n_ent, n_rel, n_ts, dim, periodic = struct.unpack_from("<6I", head, 8)
    if version != _CKPT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (seed,) = struct.unpack_from("<q", head, 32)
    rows = (n_ent, 2 * n_rel, n_ts, n_ts)
    n_params = sum(4 * r * dim for r in rows)
    expected = 40 + 2 * n_params * 8
    actual = path.stat().st_size
    if actual != expected:
        raise CheckpointError(
            f"{path}: size mismatch, header implies {expected} bytes, file has {actual}"
        )
    return {
        "version": version,
        "n_entities": n_ent,
        "n_relations": n_rel,
        "n_timestamps": n_ts,
        "dim": dim,
        "periodic": bool(periodic),
        "seed": seed,
        "parameter_count": n_params,
    }


def load_checkpoint(path: str | Path) -> tuple[ModelParams, Gradients]:
    path = Path(path)
    header = checkpoint_header(path)
    n_rel, dim = header["n_relations"], header["dim"]
    data = path.read_bytes()
    offset = 40
    rows = (header["n_entities"], 2 * n_rel, header["n_timestamps"], header["n_timestamps"])

    def read_tables() -> list[QuaternionBatch]:
        nonlocal offset
        out = []
        for r in rows:
            comps = []
            for _ in range(4):
                arr = np.frombuffer(data, dtype="<f8", count=r * dim, offset=offset)
                comps.append(arr.reshape(r, dim).copy())
                offset += r * dim * 8
            out.append(QuaternionBatch(*comps))
        return out

    tables = read_tables()
    accums = read_tables()
    params = ModelParams(
        entity=tables[0],
        relation=tables[1],
        rot_time=tables[2],
        per_time=tables[3],
        n_relations=n_rel,
        periodic=header["periodic"],
        seed=header["seed"],
    )
    return params, Gradients(*accums)
