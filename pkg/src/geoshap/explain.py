"""Joint-location Shapley attribution engine.

Two estimators over the same interventional value function:

* exact enumeration of all coalition patterns — main effects and synergies
  from their defining sums, with the additivity residual reported;
* a sampled constrained estimator — kernel-weighted least squares over
  coalition patterns with location-feature product columns, solved under the
  hard constraint that all components sum to the prediction minus baseline.

The value function splices in-coalition columns of the explained row into
every background row and averages the predictions. Accumulations run in fixed
coalition-index order so results do not depend on worker count.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._validation import check_matrix, check_seed
from .background import BackgroundSet
from .coalitions import (
    CoalitionSpace,
    kernel_weight,
    main_weight_table,
    pair_weight_table,
    popcounts,
)
from .errors import ArityMismatch, CapExceeded, OutOfRange, SingularSystem
from .predictor import as_predictor
from .records import ClassicExplanation, ExplanationRecord, ExplanationSet

EXACT_CAP_DEFAULT = 15
SOLVER_TOL_DEFAULT = 1e-8

# buffer cap for spliced evaluation rows (patterns x background x instances)
_MAX_EVAL_ROWS = 262144


def _splice_values(pred, X_block, cs, bg, masks, max_rows=_MAX_EVAL_ROWS):
    """Value function over coalition patterns for a block of instances.

    Returns (b, len(masks)) with v[i, j] = mean over background rows of the
    prediction for instance i spliced per pattern masks[j]. The empty and full
    patterns are special-cased: empty is the background-mean prediction and
    full is the model's prediction of the untouched row (exact, background
    irrelevant).
    """
    X_block = check_matrix(X_block, n_cols=cs.p, name="instances")
    b = X_block.shape[0]
    masks = np.asarray(masks, dtype=np.int64)
    full_mask = (1 << cs.k) - 1
    col_bits = np.int64(1) << cs.column_player()

    v = np.empty((b, masks.shape[0]), dtype=np.float64)
    is_empty = masks == 0
    is_full = masks == full_mask
    if is_empty.any():
        v0 = float(np.mean(pred(bg.X, context="empty coalition")))
        v[:, is_empty] = v0
    if is_full.any():
        v[:, is_full] = pred(X_block, context="full coalition")[:, None]

    interior = np.nonzero(~(is_empty | is_full))[0]
    if interior.size == 0:
        return v
    m = bg.m
    chunk = max(1, int(max_rows // max(1, b * m)))
    for start in range(0, interior.size, chunk):
        pos = interior[start : start + chunk]
        sel = (masks[pos, None] & col_bits[None, :]) != 0  # (c, p) columns from x
        rows = np.where(
            sel[None, :, None, :],
            X_block[:, None, None, :],
            bg.X[None, None, :, :],
        )  # (b, c, m, p)
        c = pos.shape[0]
        preds = pred(
            rows.reshape(b * c * m, cs.p),
            context=f"coalition patterns {masks[pos[0]]}..{masks[pos[-1]]}",
        )
        v[:, pos] = preds.reshape(b, c, m).mean(axis=2)
    return v


def eval_coalition(pred, x, players, bg, cs):
    """Interventional value of one player subset for one instance."""
    pred = as_predictor(pred, n_features=cs.p)
    players = list(players)
    if any(not 0 <= q < cs.k for q in players):
        raise OutOfRange(f"player index outside [0, {cs.k - 1}]: {players}")
    mask = 0
    for q in players:
        mask |= 1 << q
    x = check_matrix(x, n_cols=cs.p, name="x").reshape(-1)
    v = _splice_values(pred, x[None, :], cs, bg, [mask])
    return float(v[0, 0])


def _exact_components(v, cs):
    """Main and synergy components from a (b, 2^k) value table."""
    k = cs.k
    sizes = popcounts(k)
    main_w = main_weight_table(cs.p, cs.g)
    masks = np.arange(1 << k, dtype=np.int64)

    phi_players = np.empty((v.shape[0], k), dtype=np.float64)
    for player in range(k):
        bit = np.int64(1) << player
        absent = masks[(masks & bit) == 0]
        w = main_w[sizes[absent]]
        phi_players[:, player] = (v[:, absent | bit] - v[:, absent]) @ w

    geo_bit = np.int64(1) << cs.geo_player
    phi_geo_x = np.empty((v.shape[0], k - 1), dtype=np.float64)
    if k >= 2:
        pair_w = pair_weight_table(cs.p, cs.g)
        for j in range(k - 1):
            bit = np.int64(1) << j
            base = masks[(masks & (bit | geo_bit)) == 0]
            delta = (
                v[:, base | bit | geo_bit]
                - v[:, base | geo_bit]
                - v[:, base | bit]
                + v[:, base]
            )
            phi_geo_x[:, j] = delta @ pair_w[sizes[base]]
    return phi_players[:, : k - 1], phi_players[:, k - 1], phi_geo_x


def explain_exact_block(pred, X_block, bg, cs, cap=EXACT_CAP_DEFAULT,
                        max_rows=_MAX_EVAL_ROWS):
    """Exact enumeration for a block of instances sharing one background."""
    if cs.k > cap:
        raise CapExceeded(cs.k, cap)
    masks = np.arange(1 << cs.k, dtype=np.int64)
    v = _splice_values(pred, X_block, cs, bg, masks, max_rows=max_rows)
    phi, phi_geo, phi_geo_x = _exact_components(v, cs)
    phi0 = v[:, 0]
    yhat = v[:, -1]
    residual = yhat - (phi0 + phi_geo + phi.sum(axis=1) + phi_geo_x.sum(axis=1))
    return phi0, phi_geo, phi, phi_geo_x, yhat, residual, int(masks.shape[0])


def _interior_patterns(k, n_interior, seed):
    """Deterministic-then-sampled coalition patterns with kernel weights.

    Complete layers are taken in per-pattern weight order (sizes 1, k-1,
    2, k-2, ...); the first layer that does not fit is sampled uniformly
    without replacement, rescaled to preserve the layer's total weight.
    """
    sizes_seq = []
    lo, hi = 1, k - 1
    while lo <= hi:
        sizes_seq.append(lo)
        if hi != lo:
            sizes_seq.append(hi)
        lo += 1
        hi -= 1

    rng = np.random.default_rng(seed)
    masks, weights = [], []
    remaining = n_interior
    for s in sizes_seq:
        if remaining <= 0:
            break
        count = math.comb(k, s)
        kw = kernel_weight(s, k)
        if count <= remaining:
            for combo in itertools.combinations(range(k), s):
                mask = 0
                for q in combo:
                    mask |= 1 << q
                masks.append(mask)
                weights.append(kw)
            remaining -= count
        else:
            chosen = _sample_layer(rng, k, s, remaining, count)
            scale = count / remaining
            masks.extend(chosen)
            weights.extend([kw * scale] * len(chosen))
            remaining = 0
    return np.asarray(masks, dtype=np.int64), np.asarray(weights, dtype=np.float64)


def _sample_layer(rng, k, s, n_needed, layer_count):
    """n_needed distinct size-s patterns; enumerate small layers, else reject."""
    if layer_count <= 4 * n_needed or layer_count <= 4096:
        all_masks = []
        for combo in itertools.combinations(range(k), s):
            mask = 0
            for q in combo:
                mask |= 1 << q
            all_masks.append(mask)
        idx = rng.choice(layer_count, size=n_needed, replace=False)
        return [all_masks[i] for i in np.sort(idx)]
    seen = {}
    attempts = 0
    while len(seen) < n_needed and attempts < 50 * n_needed:
        attempts += 1
        combo = rng.permutation(k)[:s]
        mask = 0
        for q in combo:
            mask |= 1 << int(q)
        if mask not in seen:
            seen[mask] = None
    if len(seen) < n_needed:
        raise SingularSystem("pattern sampling kept colliding")
    return list(seen.keys())


def _design(masks, k):
    """Columns: scalar-player indicators, GEO indicator, GEO*scalar products."""
    bits = (masks[:, None] >> np.arange(k)[None, :]) & 1
    z_feat = bits[:, : k - 1].astype(np.float64)
    z_geo = bits[:, k - 1].astype(np.float64)
    return np.hstack([z_feat, z_geo[:, None], z_feat * z_geo[:, None]])


def explain_sampled_block(pred, X_block, bg, cs, budget, solver_tol=SOLVER_TOL_DEFAULT,
                          seed=0, max_rows=_MAX_EVAL_ROWS):
    """Constrained weighted-least-squares estimator for a block of instances.

    Components are regression coefficients of the value function on pattern
    indicators and location-feature products, fitted under the equality
    constraint that every instance's components sum to yhat - phi0, so the
    additive decomposition holds to solver tolerance by construction.
    """
    k = cs.k
    if budget < 2 * k + 2:
        raise ValueError(f"budget must be >= 2k+2 = {2 * k + 2}, got {budget}")
    seed = check_seed(seed)
    X_block = check_matrix(X_block, n_cols=cs.p, name="instances")
    b = X_block.shape[0]

    phi0_val = float(np.mean(pred(bg.X, context="empty coalition")))
    phi0 = np.full(b, phi0_val)
    yhat = pred(X_block, context="full coalition")
    c = yhat - phi0

    if k == 1:
        empty = np.empty((b, 0))
        return (phi0, c.copy(), empty, empty.copy(), yhat,
                np.zeros(b), 2)

    n_interior = min(budget - 2, (1 << k) - 2)
    masks, w = _interior_patterns(k, n_interior, seed)
    v = _splice_values(pred, X_block, cs, bg, masks, max_rows=max_rows)
    t = v - phi0_val  # (b, n)

    Z = _design(masks, k)  # (n, q), q = 2k-1
    q = Z.shape[1]
    # eliminate the last coefficient through the sum constraint
    Zr = Z[:, :-1] - Z[:, -1:]
    tr = t - np.outer(c, Z[:, -1])
    sw = np.sqrt(w)
    A = Zr * sw[:, None]
    B = (tr * sw[None, :]).T  # (n, b)
    sol, _, rank, _ = np.linalg.lstsq(A, B, rcond=None)
    if rank < q - 1:
        raise SingularSystem(f"design rank {rank} < {q - 1}")
    beta = np.vstack([sol, c[None, :] - sol.sum(axis=0)])  # (q, b)

    phi = beta[: k - 1].T
    phi_geo = beta[k - 1]
    phi_geo_x = beta[k : 2 * k - 1].T
    residual = yhat - (phi0 + phi_geo + phi.sum(axis=1) + phi_geo_x.sum(axis=1))
    if np.any(np.abs(residual) > solver_tol):
        raise SingularSystem(
            f"constraint violated: |residual| up to {np.abs(residual).max():g}"
        )
    return phi0, phi_geo, phi, phi_geo_x, yhat, residual, int(masks.shape[0]) + 2


def _single(block_fn, pred, x, bg, cs, estimator, **kw):
    pred = as_predictor(pred, n_features=cs.p)
    x = check_matrix(x, n_cols=cs.p, name="x").reshape(-1)
    phi0, phi_geo, phi, phi_geo_x, yhat, residual, used = block_fn(
        pred, x[None, :], bg, cs, **kw
    )
    return ExplanationRecord(
        id="0",
        location=tuple(float(x[ci]) for ci in cs.geo_cols),
        phi0=float(phi0[0]),
        phi_geo=float(phi_geo[0]),
        phi=phi[0],
        phi_geo_x=phi_geo_x[0],
        yhat=float(yhat[0]),
        residual=float(residual[0]),
        estimator=estimator,
        budget=used,
    )


def explain_exact(pred, x, bg, cs, cap=EXACT_CAP_DEFAULT):
    """Exact enumeration record for one instance."""
    return _single(explain_exact_block, pred, x, bg, cs, "exact", cap=cap)


def explain_sampled(pred, x, bg, cs, budget, solver_tol=SOLVER_TOL_DEFAULT, seed=0):
    """Sampled constrained-regression record for one instance."""
    return _single(
        explain_sampled_block, pred, x, bg, cs, "sampled",
        budget=budget, solver_tol=solver_tol, seed=seed,
    )


def shap_classic(pred, x, bg, cap=EXACT_CAP_DEFAULT):
    """Classic per-column Shapley attribution (every column its own player)."""
    bg_X = bg.X if isinstance(bg, BackgroundSet) else np.asarray(bg, dtype=np.float64)
    p = bg_X.shape[1]
    bg = bg if isinstance(bg, BackgroundSet) else BackgroundSet(bg_X)
    cs = CoalitionSpace(n_columns=p, geo_cols=(p - 1,))
    pred = as_predictor(pred, n_features=p)
    x = check_matrix(x, n_cols=p, name="x").reshape(-1)
    if cs.k > cap:
        raise CapExceeded(cs.k, cap)
    masks = np.arange(1 << cs.k, dtype=np.int64)
    v = _splice_values(pred, x[None, :], cs, bg, masks)
    phi_scalar, phi_last, _ = _exact_components(v, cs)
    phi = np.concatenate([phi_scalar[0], [phi_last[0]]])
    phi0 = float(v[0, 0])
    yhat = float(v[0, -1])
    return ClassicExplanation(
        id="0", phi0=phi0, phi=phi, yhat=yhat,
        residual=yhat - (phi0 + float(phi.sum())),
    )


class GeoShapleyExplainer:
    """Explains a batch predictor against a background set.

    Parameters mirror the engine knobs: ``mode`` picks the estimator,
    ``budget`` the sampled pattern count (defaults to full enumeration capped
    at 2k+2046 evaluations), ``workers`` the instance-level parallelism
    (forced serial when the predictor declares itself serial).
    """

    def __init__(self, model, background, schema=None, geo_cols=None, *,
                 mode="exact", budget=None, solver_tol=SOLVER_TOL_DEFAULT,
                 seed=0, exact_cap=EXACT_CAP_DEFAULT, workers=1,
                 block_size=64, max_eval_rows=_MAX_EVAL_ROWS):
        if mode not in ("exact", "sampled"):
            raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
        if schema is None and geo_cols is None:
            raise ValueError("provide schema or geo_cols")
        self.background = (
            background if isinstance(background, BackgroundSet)
            else BackgroundSet(background)
        )
        self.schema = schema
        self.space = (
            CoalitionSpace.from_schema(schema) if schema is not None
            else CoalitionSpace(self.background.p, tuple(geo_cols))
        )
        self.predictor = as_predictor(model, n_features=self.space.p)
        if self.predictor.n_features != self.space.p:
            raise ArityMismatch(
                f"predictor arity {self.predictor.n_features} != {self.space.p} columns"
            )
        if self.background.p != self.space.p:
            raise ArityMismatch(
                f"background has {self.background.p} columns, expected {self.space.p}"
            )
        self.mode = mode
        self.solver_tol = float(solver_tol)
        self.seed = check_seed(seed)
        self.exact_cap = int(exact_cap)
        self.workers = 1 if self.predictor.serial else max(1, int(workers))
        self.block_size = max(1, int(block_size))
        self.max_eval_rows = int(max_eval_rows)
        if budget is None and mode == "sampled":
            budget = min(1 << self.space.k, 2 * self.space.k + 2046)
        self.budget = budget

    def _explain_block(self, X_block):
        if self.mode == "exact":
            return explain_exact_block(
                self.predictor, X_block, self.background, self.space,
                cap=self.exact_cap, max_rows=self.max_eval_rows,
            )
        return explain_sampled_block(
            self.predictor, X_block, self.background, self.space,
            budget=self.budget, solver_tol=self.solver_tol, seed=self.seed,
            max_rows=self.max_eval_rows,
        )

    def explain_matrix(self, X, ids=None):
        """Explain each row of X; returns an ExplanationSet."""
        X = check_matrix(X, n_cols=self.space.p, name="X", allow_empty=False)
        n = X.shape[0]
        if ids is None:
            ids = [str(i) for i in range(n)]
        blocks = [
            (start, X[start : start + self.block_size])
            for start in range(0, n, self.block_size)
        ]
        if self.workers > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                results = list(pool.map(lambda b: self._explain_block(b[1]), blocks))
        else:
            results = [self._explain_block(block) for _, block in blocks]

        records = []
        for (start, block), res in zip(blocks, results):
            phi0, phi_geo, phi, phi_geo_x, yhat, residual, used = res
            for i in range(block.shape[0]):
                records.append(ExplanationRecord(
                    id=str(ids[start + i]),
                    location=tuple(float(block[i, ci]) for ci in self.space.geo_cols),
                    phi0=float(phi0[i]),
                    phi_geo=float(phi_geo[i]),
                    phi=phi[i].copy(),
                    phi_geo_x=phi_geo_x[i].copy(),
                    yhat=float(yhat[i]),
                    residual=float(residual[i]),
                    estimator=self.mode,
                    budget=used,
                ))
        schema = self.schema or _implied_schema(self.space)
        return ExplanationSet(schema, X, tuple(records), self._metadata())

    def explain_dataset(self, ds):
        return self.explain_matrix(ds.X, ids=ds.ids)

    def _metadata(self):
        from . import __version__

        return {
            "engine_version": __version__,
            "estimator": self.mode,
            "seed": self.seed,
            "background": {
                "provenance": self.background.provenance,
                "m": self.background.m,
                "seed": self.background.seed,
                "column_means": [float(v) for v in self.background.column_means()],
            },
            "k": self.space.k,
            "g": self.space.g,
            "exact_cap": self.exact_cap,
            "solver_tol": self.solver_tol,
            "budget": self.budget,
        }


def _implied_schema(cs):
    from .data import Schema

    names = [f"x{i}" for i in range(cs.p)]
    for rank, ci in enumerate(cs.geo_cols):
        names[ci] = f"geo{rank}"
    return Schema(tuple(names), "y", tuple(names[ci] for ci in cs.geo_cols))
