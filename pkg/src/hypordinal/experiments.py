"""Batch experiments behind the command-line interface.

Every experiment is a list of independent jobs.  Jobs derive their random
streams from the master seed and their own coordinates, run on an
optional thread pool, and are gathered back in job order, so the emitted
rows do not depend on the number of workers.  Rows carry no wall-clock
times, which keeps identical runs byte-identical.
"""

import configparser
import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from . import bounds as bd
from .dataset import (LinkFunction, generate_weighted_tree, read_tree,
                      sample_observations, star_tree, tree_distances)
from .embed import (EUCLIDEAN, HYPERBOLIC, FitConfig, LossFunction,
                    expected_risk_exact, fit_embedding, minimize_expected_risk)
from .exceptions import ConfigError, HypOrdinalError
from .hypgeo import BallRestriction
from .treeembed import zero_risk_certificate


def fmt(value) -> str:
    """Canonical text for a CSV cell."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def rows_to_csv(header: List[str], rows: List[Dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(row[h]) for h in header])
    return buf.getvalue()


def run_jobs(fn: Callable, jobs: list, threads: int = 1) -> list:
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]


# ---------------------------------------------------------------------------
# Configuration


def _floats(text):
    return [float(v) for v in str(text).replace(",", " ").split()]


def _ints(text):
    out = []
    for v in str(text).replace(",", " ").split():
        f = float(v)
        if f != int(f):
            raise ValueError(f"{v} is not an integer")
        out.append(int(f))
    return out


def _float(text):
    return float(text)


def _int(text):
    vals = _ints(text)
    if len(vals) != 1:
        raise ValueError(f"expected one integer, got {text!r}")
    return vals[0]


def _str(text):
    return str(text).strip()


def _strs(text):
    return [v for v in str(text).replace(",", " ").split()]


@dataclass(frozen=True)
class Key:
    parse: Callable
    default: object
    help: str


SCHEMAS: Dict[str, Dict[str, Key]] = {
    "excess-risk": {
        "n": Key(_int, 12, "number of tree vertices"),
        "d": Key(_int, 2, "embedding dimension"),
        "R": Key(_float, 2.0, "ball radius"),
        "alpha": Key(_float, 0.4, "step-link noise level"),
        "loss": Key(_str, "hinge", "hinge or ramp"),
        "m": Key(_ints, [500, 2000], "sample sizes"),
        "delta": Key(_float, 0.1, "confidence level of the bound"),
        "seeds": Key(_int, 10, "number of seeds per sample size"),
        "spaces": Key(_strs, [HYPERBOLIC], "hyperbolic and/or euclidean"),
        "tree": Key(_str, "", "tree file (random tree when empty)"),
        "step_size": Key(_float, 0.5, "optimizer step size"),
        "epochs": Key(_int, 150, "optimizer epochs"),
        "restarts": Key(_int, 3, "restarts for the expected-risk minimizer"),
        "max_step": Key(_float, 0.5, "largest update per point"),
        "init_scale": Key(_float, 0.1, "scale of the random initialization"),
    },
    "bounds": {
        "L": Key(_floats, [1.0], "Lipschitz constants"),
        "R": Key(_floats, [0.5, 1.0, 2.0], "radii"),
        "n": Key(_ints, [10], "entity counts"),
        "m": Key(_ints, [1000], "sample sizes"),
        "delta": Key(_floats, [0.1], "confidence levels"),
    },
    "rademacher": {
        "n": Key(_ints, [4, 6, 8], "entity counts"),
        "m": Key(_ints, [50, 200], "sample sizes"),
        "C": Key(_floats, [0.5, 1.0], "mean radii"),
        "d": Key(_int, 2, "embedding dimension"),
        "draws": Key(_int, 200, "Rademacher draws"),
        "opt_budget": Key(_int, 30, "ascent steps per restart"),
    },
    "tree-compare": {
        "tree": Key(_str, "star", "'star', 'random' or a tree file"),
        "leaves": Key(_int, 8, "leaves of the star"),
        "n": Key(_int, 8, "vertices of a random tree"),
        "d": Key(_int, 2, "embedding dimension"),
        "R": Key(_float, 5.0, "ball radius for both spaces"),
        "alpha": Key(_floats, [0.4], "step-link noise levels"),
        "restarts": Key(_int, 5, "restarts per space"),
        "epochs": Key(_int, 600, "descent epochs per restart"),
        "step_size": Key(_float, 1.0, "optimizer step size"),
        "max_step": Key(_float, 0.5, "largest update per point"),
        "init_scale": Key(_float, 0.5, "scale of the random initialization"),
    },
}


def load_config(kind: str, path=None, overrides=None) -> Dict:
    """Defaults, then the ``[kind]`` section of an INI file, then explicit
    overrides.  Unknown sections or keys raise ``ConfigError``."""
    schema = SCHEMAS[kind]
    cfg = {k: v.default for k, v in schema.items()}
    raw = {}
    if path is not None:
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        extra = [s for s in parser.sections() if s not in SCHEMAS]
        if extra:
            raise ConfigError(f"unknown config sections: {extra}")
        if parser.has_section(kind):
            raw.update(parser.items(kind))
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    for key, text in raw.items():
        if key not in schema:
            raise ConfigError(f"unknown key {key!r} for {kind}; known: {sorted(schema)}")
        try:
            cfg[key] = schema[key].parse(text) if isinstance(text, str) else text
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {kind}.{key}: {text!r}") from exc
    return cfg


def _require(cond, msg):
    if not cond:
        raise ConfigError(msg)


# ---------------------------------------------------------------------------
# Excess risk


EXCESS_HEADER = ["experiment", "space", "seed", "n", "d", "R", "alpha", "loss", "m", "delta",
                 "risk_hat", "risk_star_approx", "excess", "complexity_term",
                 "concentration_term", "bound", "within_bound", "status"]


def _excess_tree(cfg, master_seed):
    if cfg["tree"]:
        return read_tree(cfg["tree"])
    return generate_weighted_tree(cfg["n"], seed=int(np.random.SeedSequence(
        [int(master_seed), 7]).generate_state(1)[0]))


def run_excess_risk(cfg: Dict, seed: int = 0, threads: int = 1) -> List[Dict]:
    """Excess risk of the empirical minimizer against the radius-form
    bound.

    The expected-risk minimizer is approximated numerically, so its risk is
    at least the true minimum and the measured excess is an
    underestimate.
    """
    _require(cfg["n"] <= 20 or cfg["tree"], "excess-risk needs n <= 20")
    _require(0 < cfg["delta"] < 1, "delta must lie in (0, 1)")
    _require(cfg["seeds"] >= 1 and cfg["m"], "need seeds >= 1 and a nonempty m list")
    for sp in cfg["spaces"]:
        _require(sp in (HYPERBOLIC, EUCLIDEAN), f"unknown space {sp}")
    tree = _excess_tree(cfg, seed)
    D = tree_distances(tree)
    n = tree.n
    link = LinkFunction.step(cfg["alpha"])
    loss = LossFunction(cfg["loss"])
    base = FitConfig(BallRestriction(cfg["R"]), step_size=cfg["step_size"],
                     epochs=cfg["epochs"], seed=seed, init_scale=cfg["init_scale"],
                     max_step=cfg["max_step"], restarts=cfg["restarts"])

    def star_job(space):
        emb = minimize_expected_risk(D, link, loss, space, base, cfg["d"])
        return expected_risk_exact(emb, D, link, loss)

    star = dict(zip(cfg["spaces"], run_jobs(star_job, cfg["spaces"], threads)))
    jobs = [(sp, s, m) for sp in cfg["spaces"] for m in cfg["m"] for s in range(cfg["seeds"])]

    def job(args):
        space, s, m = args
        row_seed = int(np.random.SeedSequence([int(seed), s, m]).generate_state(1)[0])
        if space == HYPERBOLIC:
            rep = bd.hoe_excess_bound_radius(loss.lipschitz_constant, cfg["R"], n, m, cfg["delta"])
        else:
            rep = bd.eoe_excess_bound_radius(loss.lipschitz_constant, cfg["R"], n, m, cfg["delta"])
        row = {"experiment": "excess-risk", "space": space, "seed": s, "n": n, "d": cfg["d"],
               "R": cfg["R"], "alpha": cfg["alpha"], "loss": loss.kind, "m": m,
               "delta": cfg["delta"], "complexity_term": rep.complexity_term,
               "concentration_term": rep.concentration_term, "bound": rep.total,
               "risk_star_approx": star[space]}
        try:
            T, y = sample_observations(D, link, m, seed=row_seed)
            emb = fit_embedding(space, (T, y), FitConfig(
                base.restriction, step_size=base.step_size, epochs=base.epochs,
                seed=row_seed, init_scale=base.init_scale, max_step=base.max_step),
                loss, n, cfg["d"])
            risk = expected_risk_exact(emb, D, link, loss)
            excess = risk - star[space]
            row.update(risk_hat=risk, excess=excess, within_bound=excess <= rep.total,
                       status="ok")
        except (HypOrdinalError, FloatingPointError) as exc:
            row.update(risk_hat=math.nan, excess=math.nan, within_bound=False,
                       status=type(exc).__name__)
        return row

    return run_jobs(job, jobs, threads)


# ---------------------------------------------------------------------------
# Bound sweep


BOUND_HEADER = ["variant", "L", "R", "C", "n", "m", "delta", "complexity_term",
                "concentration_term", "total", "hoe_eoe_ratio"]


def bound_rows_for(L, R, n, m, delta) -> List[Dict]:
    """All bound variants at one grid point, with ``C = R``, the HOE loss
    range ``2 L cosh^2(2R)`` and the EOE norms ``gamma = n R^2``,
    ``B = R^2``."""
    inputs = bd.BoundInputs(L, R, R, bd.loss_range_hoe(L, R), n, m, delta)
    reps = [
        bd.hoe_excess_bound(inputs, "theorem1"),
        bd.hoe_excess_bound(inputs, "lemma5_stated"),
        bd.hoe_excess_bound_radius(L, R, n, m, delta),
        bd.eoe_excess_bound(L, n * R * R, R * R, n, m, delta),
        bd.eoe_excess_bound_radius(L, R, n, m, delta),
    ]
    eoe_total = reps[4].total
    ratio = reps[2].total / eoe_total if eoe_total > 0 else math.inf
    return [{"variant": r.variant, "L": float(L), "R": float(R), "C": float(R), "n": int(n),
             "m": int(m), "delta": float(delta), "complexity_term": r.complexity_term,
             "concentration_term": r.concentration_term, "total": r.total,
             "hoe_eoe_ratio": ratio} for r in reps]


def run_bound_sweep(cfg: Dict, seed: int = 0, threads: int = 1) -> List[Dict]:
    grid = [(L, R, n, m, dl) for L in cfg["L"] for R in cfg["R"] for n in cfg["n"]
            for m in cfg["m"] for dl in cfg["delta"]]
    _require(len(grid) > 0, "bound grid is empty")
    try:
        chunks = run_jobs(lambda g: bound_rows_for(*g), grid, threads)
    except HypOrdinalError as exc:
        raise ConfigError(f"invalid bound grid: {exc}") from exc
    return [row for chunk in chunks for row in chunk]


def check_bound_rows(path, tol: float = 1e-12) -> List[str]:
    """Re-evaluate every row of a bound CSV from its echoed parameters.

    Returns a list of mismatch descriptions (empty when consistent).
    """
    problems = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(BOUND_HEADER[:10]) - set(reader.fieldnames or [])
        if missing:
            raise ConfigError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, 2):
            fresh = {r["variant"]: r for r in bound_rows_for(
                float(row["L"]), float(row["R"]), int(row["n"]), int(row["m"]),
                float(row["delta"]))}
            ref = fresh.get(row["variant"])
            if ref is None:
                problems.append(f"line {lineno}: unknown variant {row['variant']}")
                continue
            for col in ("complexity_term", "concentration_term", "total"):
                got, want = float(row[col]), ref[col]
                if abs(got - want) > tol * max(1.0, abs(want)):
                    problems.append(f"line {lineno}: {col} {got!r} != {want!r}")
    return problems


# ---------------------------------------------------------------------------
# Rademacher validation


RADEMACHER_HEADER = ["n", "m", "C", "d", "draws", "opt_budget", "estimate", "stderr",
                     "bound", "pass"]


def run_rademacher_check(cfg: Dict, seed: int = 0, threads: int = 1) -> List[Dict]:
    """Monte Carlo lower estimate against the analytic bound; a row passes
    when ``estimate + 3 stderr <= bound``."""
    _require(all(3 <= n <= 12 for n in cfg["n"]), "rademacher needs 3 <= n <= 12")
    _require(cfg["draws"] >= 2, "need at least 2 draws")
    grid = [(n, m, C) for n in cfg["n"] for m in cfg["m"] for C in cfg["C"]]

    def job(args):
        n, m, C = args
        point_seed = int(np.random.SeedSequence([int(seed), n, m, int(round(C * 1e6))])
                         .generate_state(1)[0])
        est, se = bd.estimate_rademacher_mc(n, m, C, cfg["d"], cfg["draws"],
                                            cfg["opt_budget"], point_seed)
        bound = bd.rademacher_bound_hoe(C, n, m, "theorem1")
        return {"n": n, "m": m, "C": float(C), "d": cfg["d"], "draws": cfg["draws"],
                "opt_budget": cfg["opt_budget"], "estimate": est, "stderr": se,
                "bound": bound, "pass": est + 3.0 * se <= bound}

    return run_jobs(job, grid, threads)


# ---------------------------------------------------------------------------
# Tree comparison


TREE_HEADER = ["method", "n", "d", "R", "alpha", "expected_ramp_risk", "floor", "restarts",
               "hoe_le_eoe", "status"]


def comparison_tree(cfg, seed):
    kind = cfg["tree"]
    if kind == "star":
        return star_tree(cfg["leaves"], seed=seed)
    if kind == "random":
        return generate_weighted_tree(cfg["n"], seed=seed)
    return read_tree(kind)


def run_tree_comparison(cfg: Dict, seed: int = 0, threads: int = 1, tree=None):
    """Certificate, HOE and EOE expected ramp risks for each ``alpha``.

    Returns ``(rows, margin_embedding_or_None)``.
    """
    _require(cfg["restarts"] >= 1, "restarts must be >= 1")
    tree = tree if tree is not None else comparison_tree(cfg, seed)
    D = tree_distances(tree)
    ramp = LossFunction("ramp")
    fit_cfg = FitConfig(BallRestriction(cfg["R"]), step_size=cfg["step_size"],
                        epochs=cfg["epochs"], seed=seed, init_scale=cfg["init_scale"],
                        max_step=cfg["max_step"], restarts=cfg["restarts"])
    jobs = [(a, sp) for a in cfg["alpha"] for sp in (HYPERBOLIC, EUCLIDEAN)]

    def job(args):
        alpha, space = args
        link = LinkFunction.step(alpha)
        try:
            emb = minimize_expected_risk(D, link, ramp, space, fit_cfg, cfg["d"])
            return expected_risk_exact(emb, D, link, ramp), "ok"
        except (HypOrdinalError, FloatingPointError) as exc:
            return math.nan, type(exc).__name__

    fitted = dict(zip(jobs, run_jobs(job, jobs, threads)))
    margin_emb, cert_status = None, "ok"
    rows = []
    for alpha in cfg["alpha"]:
        link = LinkFunction.step(alpha)
        try:
            margin_emb, cert = zero_risk_certificate(tree, link, ramp, embedding=margin_emb)
        except (HypOrdinalError, ArithmeticError) as exc:
            cert, cert_status = math.nan, type(exc).__name__
        hoe, hoe_status = fitted[(alpha, HYPERBOLIC)]
        eoe, eoe_status = fitted[(alpha, EUCLIDEAN)]
        flag = bool(hoe <= eoe)
        common = {"n": tree.n, "d": cfg["d"], "R": cfg["R"], "alpha": float(alpha),
                  "floor": 0.5 - alpha, "hoe_le_eoe": flag}
        rows.append(dict(common, method="margin_certificate", expected_ramp_risk=cert,
                         restarts=0, status=cert_status))
        rows.append(dict(common, method="hoe", expected_ramp_risk=hoe,
                         restarts=cfg["restarts"], status=hoe_status))
        rows.append(dict(common, method="eoe", expected_ramp_risk=eoe,
                         restarts=cfg["restarts"], status=eoe_status))
    return rows, margin_emb
