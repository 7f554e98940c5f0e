"""Command-line harness: ``corrnoise {generate,validate,compare,cluster}``.

Exit codes: 0 success, 1 configuration/parse error, 2 inadmissible noise
level or invalid matrix, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Optional

import numpy as np

from . import baseline, clustereval
from .config import ConfigError, ScenarioConfig, load_config, parse_noise
from .errors import AdmissibilityError, BoundsUnavailable, CorrNoiseError, ParameterError
from .noise import basic_kappa_bound, epsilon_for_kappa, perturb
from .spectra import DEFAULT_TOL, SymmetricMatrix, eigenvalues, validate_correlation
from .templates import Kind, analytic_bounds, build_template

log = logging.getLogger("corrnoise")

EXIT_OK, EXIT_CONFIG, EXIT_ADMISSIBILITY, EXIT_IO = 0, 1, 2, 3


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_matrix_csv(path: Path, m: SymmetricMatrix) -> None:
    with open(path, "w", newline="") as fh:
        for row in m.dense:
            fh.write(",".join(_fmt(v) for v in row))
            fh.write("\n")


def read_matrix_csv(path) -> SymmetricMatrix:
    try:
        with open(path) as fh:
            rows = [line.strip() for line in fh if line.strip()]
    except OSError:
        raise
    try:
        a = np.array([[float(v) for v in r.split(",")] for r in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: not a numeric CSV matrix ({exc})") from None
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise ConfigError(f"{path}: expected a non-empty square matrix, got shape {a.shape}")
    try:
        return SymmetricMatrix.from_dense(a, atol=1e-12)
    except ParameterError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return _json_safe(x.item())
    return x


def write_json(path: Path, obj) -> None:
    with open(path, "w", newline="") as fh:
        json.dump(_json_safe(obj), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def write_rows(path: Path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


def _fanout(fn: Callable, items: list, workers: int) -> list:
    """Ordered map; results come back in item order regardless of workers."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- generate ---------------------------------------------------------------


def _resolve_epsilon(cfg: ScenarioConfig):
    """Template, noise spec with final epsilon, and (lambda_1, lambda_N, certified) of Sigma."""
    if cfg.template is None or cfg.noise is None:
        raise ConfigError("generate needs 'template' and 'noise' sections")
    t = cfg.template
    try:
        b = analytic_bounds(t)
        lam1, lam_n, certified = b.lambda1_upper, b.lambdaN_lower, True
    except BoundsUnavailable:
        spec = eigenvalues(build_template(t))
        lam1, lam_n, certified = spec.largest, spec.smallest, False
    noise = cfg.noise
    if cfg.budget is not None:
        eps_budget = epsilon_for_kappa((lam1, lam_n), cfg.budget, t.n)
        explicit = cfg.raw["noise"].get("epsilon")
        if explicit is None:
            noise = noise.with_epsilon(eps_budget)
        elif explicit > eps_budget:
            raise AdmissibilityError(
                f"epsilon={explicit} exceeds the kappa_max budget limit {eps_budget:.6g}",
                constraint="epsilon <= (kappa_max lambda_N - lambda_1) / (kappa_max + N - 1)",
            )
    return t, noise, (lam1, lam_n, certified)


def _generate_one(args):
    t, noise, r, lam_n_computed = args
    s = perturb(t, noise, r, lambda_n=lam_n_computed)
    return r, s


def cmd_generate(cfg: ScenarioConfig, out: Path, workers: int = 1) -> int:
    t, noise, (lam1, lam_n, certified) = _resolve_epsilon(cfg)
    sigma = build_template(t)
    if certified:
        kappa_bound = analytic_bounds(t).kappa_bound(noise.epsilon)
    else:
        kappa_bound = basic_kappa_bound(lam1, lam_n, t.n, noise.epsilon)
    lam_n_computed = None if certified or t.kind is not Kind.HUB else lam_n
    # admissibility is checked once up front so no partial output is written
    perturb(t, noise, 0, lambda_n=lam_n_computed)
    out.mkdir(parents=True, exist_ok=True)
    results = _fanout(_generate_one, [(t, noise, r, lam_n_computed) for r in range(cfg.replicates)], workers)
    rows = []
    for r, s in results:
        stem = f"replicate_{r:04d}"
        report = validate_correlation(s)
        dev = float(np.max(np.abs(s.dense - sigma.dense)))
        if "matrix" in cfg.outputs:
            write_matrix_csv(out / f"{stem}.csv", s)
        if "validity" in cfg.outputs:
            write_json(out / f"{stem}_validity.json", report.to_dict())
        if "diff_histogram" in cfg.outputs:
            ds = baseline.diff_summary(s, sigma, cfg.get("bins", baseline.DEFAULT_BINS), _range(cfg))
            write_rows(out / f"{stem}_diff.csv", ("bin_left", "bin_right", "count"), ds.histogram)
        if "spectra" in cfg.outputs:
            ev = eigenvalues(s).values
            write_rows(out / f"{stem}_spectrum.csv", ("eigenvalue",), ([float(v)] for v in ev))
        rows.append(
            {
                "replicate": r,
                "file": f"{stem}.csv" if "matrix" in cfg.outputs else None,
                "kappa": report.condition_number,
                "kappa_bound": kappa_bound,
                "lambda_min": report.min_eigenvalue,
                "lambda_max": report.max_eigenvalue,
                "max_deviation": dev,
                "valid": report.valid,
                "positive_definite": report.positive_definite,
            }
        )
    manifest = {
        "schema_version": 1,
        "seed": cfg.seed,
        "epsilon": noise.epsilon,
        "m": noise.m,
        "generator": noise.generator.value,
        "n": t.n,
        "template": cfg.raw["template"],
        "sigma_lambda1_bound": lam1,
        "sigma_lambdaN_bound": lam_n,
        "bounds_certified": certified,
        "kappa_bound": kappa_bound,
        "kappa_max": cfg.budget.kappa_max if cfg.budget is not None else None,
        "replicates": rows,
    }
    write_json(out / "manifest.json", manifest)
    n_bad = sum(not row["positive_definite"] for row in rows)
    log.info("wrote %d replicates to %s (%d not positive definite)", len(rows), out, n_bad)
    return EXIT_OK


def _range(cfg: ScenarioConfig):
    rng = cfg.get("range")
    return tuple(rng) if rng is not None else baseline.DEFAULT_RANGE


# --- validate ---------------------------------------------------------------


def cmd_validate(path, tol: float = DEFAULT_TOL, stream=None) -> int:
    stream = stream or sys.stdout
    m = read_matrix_csv(path)
    report = validate_correlation(m, tol)
    json.dump(_json_safe(report.to_dict()), stream, indent=2, sort_keys=True, allow_nan=False)
    stream.write("\n")
    return EXIT_OK if report.valid else EXIT_ADMISSIBILITY


# --- compare ----------------------------------------------------------------


def _pool(summaries: list[baseline.DiffSummary]):
    """Counts summed over replicates; moments of the pooled differences."""
    counts = np.sum([[c for _, _, c in s.histogram] for s in summaries], axis=0)
    hist = [(a, b, int(c)) for (a, b, _), c in zip(summaries[0].histogram, counts)]
    means = np.array([s.mean for s in summaries])
    second = np.array([s.sd**2 + s.mean**2 for s in summaries])
    mean = float(means.mean())
    sd = math.sqrt(max(float(second.mean()) - mean**2, 0.0))
    return hist, mean, sd, max(s.max_abs for s in summaries)


def _method_arm_matrix(args):
    t, spec, r = args
    return perturb(t, spec, r)


def _gauss_arm_matrix(args):
    sigma, spec, r = args
    return baseline.gaussian_sample_correlation(sigma, spec, r)


def cmd_compare(cfg: ScenarioConfig, out: Path, workers: int = 1) -> int:
    t = cfg.template
    if t is None or t.kind is not Kind.CONSTANT:
        raise ConfigError("compare needs a constant-correlation 'template'")
    methods = cfg.get("method_arms", [])
    gauss = cfg.get("gaussian_arms", [])
    if not methods and not gauss:
        raise ConfigError("compare needs at least one method or gaussian arm")
    names = [a["name"] for a in methods + gauss]
    if len(set(names)) != len(names):
        raise ConfigError("arm names must be unique")
    sigma = build_template(t)
    bins = cfg.get("bins", baseline.DEFAULT_BINS)
    vrange = _range(cfg)
    arms = []
    for a in methods:
        try:
            spec = parse_noise(a, cfg.seed)
        except ParameterError as exc:
            raise ConfigError(f"arm {a['name']}: {exc}") from None
        perturb(t, spec, 0)
        jobs = [(t, spec, r) for r in range(cfg.replicates)]
        arms.append((a["name"], "method", _fanout(_method_arm_matrix, jobs, workers)))
    for a in gauss:
        spec = baseline.GaussianSampleSpec(a["sample_size"], cfg.seed)
        jobs = [(sigma, spec, r) for r in range(cfg.replicates)]
        arms.append((a["name"], "gaussian", _fanout(_gauss_arm_matrix, jobs, workers)))
    out.mkdir(parents=True, exist_ok=True)
    summary = []
    first = {}
    for name, kind, mats in arms:
        first[name] = mats[0]
        hist, mean, sd, max_abs = _pool([baseline.diff_summary(s, sigma, bins, vrange) for s in mats])
        write_rows(out / f"{name}_hist.csv", ("bin_left", "bin_right", "count"), hist)
        summary.append((name, kind, len(mats), mean, sd, max_abs))
    write_rows(out / "summary.csv", ("arm", "kind", "replicates", "mean", "sd", "max_abs"), summary)
    pairs = cfg.get("spectrum_pairs", [])
    if pairs:
        rows = []
        for a, b in pairs:
            if a not in first or b not in first:
                raise ConfigError(f"spectrum pair ({a}, {b}) names an unknown arm")
            _, gap = baseline.spectrum_compare(first[a], first[b])
            rows.append((a, b, gap))
        write_rows(out / "spectrum_gaps.csv", ("arm_a", "arm_b", "max_eigenvalue_gap"), rows)
    return EXIT_OK


# --- cluster ----------------------------------------------------------------


def _cluster_one(args):
    t, spec, truth, k_max, r = args
    res = clustereval.run_scenario(t, spec, truth, 1, k_max, start=r)
    return res.chosen_k[0], res.adjusted_rand[0]


def cmd_cluster(cfg: ScenarioConfig, out: Path, workers: int = 1) -> int:
    name = cfg.get("scenario")
    if name is None:
        raise ConfigError("cluster needs a 'scenario' (hTC1..hTC6, iris or custom)")
    k_max = cfg.get("k_max", clustereval.DEFAULT_K_MAX)
    if name == "iris":
        spec = cfg.noise if cfg.noise is not None and cfg.noise.epsilon > 0 else None
        result = clustereval.iris_scenario(clustereval.load_iris(), spec, cfg.replicates, k_max)
    else:
        if name in clustereval.HTC_SCENARIOS:
            if cfg.template is not None or cfg.noise is not None:
                raise ConfigError(f"{name} is predefined; drop 'template'/'noise' or use scenario 'custom'")
            t, spec = clustereval.htc_scenario(name, cfg.seed)
        elif name == "custom":
            if cfg.template is None or cfg.noise is None:
                raise ConfigError("custom scenario needs 'template' and 'noise'")
            t, spec = cfg.template, cfg.noise
        else:
            raise ConfigError(f"unknown scenario {name!r}")
        truth = clustereval.truth_partition(t)
        perturb(t, spec, 0)
        jobs = [(t, spec, truth, k_max, r) for r in range(cfg.replicates)]
        pairs = _fanout(_cluster_one, jobs, workers)
        result = clustereval.ScenarioResult([k for k, _ in pairs], [a for _, a in pairs], name)
    result.name = name
    out.mkdir(parents=True, exist_ok=True)
    write_rows(
        out / "results.csv",
        ("replicate", "chosen_k", "adjusted_rand"),
        ((r, k, float(a)) for r, (k, a) in enumerate(zip(result.chosen_k, result.adjusted_rand))),
    )
    s = result.summary()
    write_rows(
        out / "summary.csv",
        ("scenario", "min_k", "median_k", "max_k", "median_adj_rand"),
        [(s["scenario"], s["min_k"], float(s["median_k"]), s["max_k"], float(s["median_adj_rand"]))],
    )
    write_json(out / "summary.json", {**s, "replicates": len(result.chosen_k), "seed": cfg.seed, "notes": result.notes})
    return EXIT_OK


# --- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="corrnoise", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("generate", "compare", "cluster"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", required=True, type=Path)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--replicates", type=int, default=None)
        sp.add_argument("--workers", type=int, default=1)
    sp = sub.add_parser("validate")
    sp.add_argument("matrix", type=Path)
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
    return p


COMMANDS = {"generate": cmd_generate, "compare": cmd_compare, "cluster": cmd_cluster}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            return cmd_validate(args.matrix, args.tol)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = load_config(args.config, args.seed, args.replicates)
        return COMMANDS[args.command](cfg, args.out, args.workers)
    except AdmissibilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ADMISSIBILITY
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CorrNoiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
