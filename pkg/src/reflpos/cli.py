"""Command-line front end.

Subcommands
-----------
pd-scan   theoretical predicate vs empirical Gram verdicts over an s-grid
gns       reflection positive GNS diagnostics for a function on R
fit       recover a Laplace measure from samples by NNLS
verify    randomised identity suites (conformal, kernels, cayley)

Exit codes: 0 pass, 1 usage error, 2 inconclusive, 3 positivity violation.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .conformal import (
    compression_test,
    conformal_factor,
    cross_ratio,
    make_lorentz,
    random_lorentz,
    sharp,
    sphere_action,
    stereographic,
    stereographic_inv,
    cayley_map,
)
from .errors import ReflectionPositivityError, ValidationError
from .integral_reps import DiscreteMeasure, eval_rp_function, fit_measure
from .kernels import (
    KernelFamily,
    default_sampler,
    gram,
    kernel_matrix,
    pd_phase_predicate,
    sigma_reflect,
    witness_search,
)
from .numerics import psd_check
from .rp_hilbert import gns_from_function

EXIT_OK, EXIT_USAGE, EXIT_INCONCLUSIVE, EXIT_VIOLATION = 0, 1, 2, 3

SCAN_FAMILIES = (
    "riesz",
    "sphere_Q",
    "compactified_K",
    "ball_R",
    "halfspace_reflected",
    "cone_power",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt(x) -> str:
    """Full-precision scientific notation (17 significant digits)."""
    return format(float(x), ".16e")


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _sub_seeds(seed: int, k: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(k)
    return [int(c.generate_state(1)[0]) for c in children]


# ------------------------------------------------------------------ pd-scan


def s_grid(s_min: float, s_max: float, step: float) -> list[float]:
    if not step > 0:
        raise UsageError("--s-step must be > 0")
    if s_max < s_min:
        raise UsageError("--s-max must be >= --s-min")
    k = int(np.floor((s_max - s_min) / step + 1e-9))
    return [round(s_min + i * step, 12) for i in range(k + 1)]


def _numerical_rank(G, tol):
    w = np.linalg.eigvalsh(G)
    sc = np.abs(w).max()
    return int(np.sum(w > tol * sc)) if sc > 0 else 0


def scan_row(task: dict) -> dict:
    """Compute one pd-scan row (top level so worker processes can run it)."""
    fam = KernelFamily(task["family"], task["s"], task["n"])
    rng = np.random.default_rng(task["seed"])
    pred = pd_phase_predicate(fam)
    row = {
        "family": fam.tag,
        "n": fam.n,
        "s": fam.s,
        "predicate": pred,
        "verdict": "",
        "min_eig_relative": 0.0,
        "min_eig": 0.0,
        "rank": 0,
        "witness_path": "",
    }
    if pred:
        sample, project, d = default_sampler(fam)
        worst = None
        for _ in range(task["pd_trials"]):
            P = project(sample(rng.uniform(size=(task["points"], d))))
            G = gram(fam, P)
            v = psd_check(G, task["tol"])
            if worst is None or v.relative_min < worst[0].relative_min:
                worst = (v, G)
        v, G = worst
        row.update(
            verdict="psd" if v.is_psd else "violation",
            min_eig_relative=v.relative_min,
            min_eig=v.min_eigenvalue,
            rank=_numerical_rank(G, task["tol"]),
        )
        return row
    w = witness_search(
        fam, n_points=task["points"], restarts=task["restarts"],
        steps=task["steps"], seed=task["seed"],
    )
    if w is None:
        row["verdict"] = "inconclusive"
        return row
    G = gram(fam, w.points)
    v = psd_check(G, task["tol"])
    row.update(
        verdict="witness",
        min_eig_relative=v.relative_min,
        min_eig=v.min_eigenvalue,
        rank=_numerical_rank(G, task["tol"]),
    )
    if task.get("witness_dir"):
        os.makedirs(task["witness_dir"], exist_ok=True)
        path = os.path.join(
            task["witness_dir"], f"witness_{fam.tag}_n{fam.n}_s{fam.s:g}.json"
        )
        w.save(path)
        row["witness_path"] = path
    return row


SCAN_COLUMNS = (
    "family", "n", "s", "predicate", "verdict",
    "min_eig_relative", "min_eig", "rank", "witness_path",
)


def _format_row(row: dict) -> dict:
    out = dict(row)
    for k in ("s", "min_eig_relative", "min_eig"):
        out[k] = fmt(row[k])
    out["predicate"] = str(row["predicate"]).lower()
    return out


def cmd_pd_scan(args) -> int:
    if args.family not in SCAN_FAMILIES:
        raise UsageError(f"--family must be one of {', '.join(SCAN_FAMILIES)}")
    if args.restarts < 1 or args.points < 2:
        raise UsageError("--restarts must be >= 1 and --points >= 2")
    svals = (
        [float(v) for v in args.s_values.split(",")]
        if args.s_values
        else s_grid(args.s_min, args.s_max, args.s_step)
    )
    dims = [int(d) for d in args.dim.split(",")]
    cfg = {
        "family": args.family, "dims": dims, "s": svals, "points": args.points,
        "restarts": args.restarts, "steps": args.steps, "seed": args.seed,
        "tol": args.tol, "pd_trials": args.pd_trials,
    }
    keys = sorted((n, s) for n in dims for s in svals)
    for n, s in keys:
        try:
            KernelFamily(args.family, s, n)
        except ValidationError as exc:
            raise UsageError(str(exc)) from exc
    seeds = _sub_seeds(args.seed, len(keys))
    tasks = [
        {
            "family": args.family, "n": n, "s": s, "seed": sd,
            "points": args.points, "restarts": args.restarts, "steps": args.steps,
            "tol": args.tol, "pd_trials": args.pd_trials,
            "witness_dir": args.witness_dir,
        }
        for (n, s), sd in zip(keys, seeds)
    ]
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as ex:
            rows = list(ex.map(scan_row, tasks))
    else:
        rows = [scan_row(t) for t in tasks]

    header = (
        f"# reflpos pd-scan version={__version__} seed={args.seed} "
        f"tol={fmt(args.tol)} config_hash={_config_hash(cfg)}"
    )
    if args.format == "csv":
        buf = io.StringIO()
        buf.write(header + "\n")
        wr = csv.DictWriter(buf, fieldnames=SCAN_COLUMNS, lineterminator="\n")
        wr.writeheader()
        for r in rows:
            wr.writerow(_format_row(r))
        text = buf.getvalue()
    else:
        text = json.dumps(
            {"header": header, "rows": rows}, indent=2
        ) + "\n"
    _emit(text, args.out)
    verdicts = {r["verdict"] for r in rows}
    if "violation" in verdicts:
        return EXIT_VIOLATION
    if "inconclusive" in verdicts:
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------- gns

DEFAULT_GNS = {
    "phi": {"kind": "exp", "lambda": 1.0},
    "s_points": [0.3, 0.7, 1.2],
    "shifts": [0.5, 1.0],
}


def phi_from_config(spec: dict):
    kind = spec.get("kind")
    if kind == "exp":
        lam = float(spec.get("lambda", 1.0))
        return lambda x: np.exp(-lam * np.abs(x))
    if kind == "cos":
        return np.cos
    if kind == "const":
        return lambda x: np.ones_like(np.asarray(x, dtype=float))
    if kind == "measure":
        nu = DiscreteMeasure.from_dict(spec)
        return lambda x: eval_rp_function(nu, x)
    raise UsageError(f"unknown phi kind {kind!r}")


def cmd_gns(args) -> int:
    cfg = json.loads(json.dumps(DEFAULT_GNS))
    if args.config:
        try:
            with open(args.config) as fh:
                cfg.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config: {exc}") from exc
    if args.phi:
        cfg["phi"] = {"kind": args.phi, "lambda": args.lam}
    phi = phi_from_config(cfg["phi"])
    rep = gns_from_function(
        phi, cfg["s_points"], shifts=cfg.get("shifts", ()), tol=args.tol,
        raise_on_fail=False,
    )
    out = {"version": __version__, "config": cfg, **rep.to_dict()}
    if cfg["phi"].get("kind") == "exp" and rep.passed:
        lam = float(cfg["phi"].get("lambda", 1.0))
        out["expected_margins"] = {
            k: float(np.exp(-lam * float(k))) for k in rep.margins
        }
    _emit(json.dumps(out, indent=2, default=float) + "\n", args.out)
    if not rep.passed:
        print(f"reflection positivity fails: {', '.join(rep.failed)}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------- fit


def read_samples(path: str):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read samples: {exc}") from exc
    try:
        if path.endswith(".json"):
            d = json.loads(text)
            xs, ys = d["x"], d["phi"]
        else:
            rows = [
                r for r in csv.reader(io.StringIO(text))
                if r and not r[0].lstrip().startswith("#")
            ]
            if rows and not _is_number(rows[0][0]):
                rows = rows[1:]
            xs = [float(r[0]) for r in rows]
            ys = [float(r[1]) for r in rows]
    except (KeyError, ValueError, IndexError, json.JSONDecodeError) as exc:
        raise UsageError(f"malformed samples file: {exc}") from exc
    if len(xs) < 2:
        raise UsageError("need at least two samples")
    return np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def cmd_fit(args) -> int:
    xs, ys = read_samples(args.samples)
    grid = s_grid(args.grid_min, args.grid_max, args.grid_step)
    try:
        res = fit_measure(xs, ys, np.asarray(grid))
    except ValidationError as exc:
        raise UsageError(str(exc)) from exc
    out = {
        "version": __version__,
        **res.measure.to_dict(),
        "residual": res.residual,
        "max_abs_error": res.max_abs_error,
        "grid": {"min": args.grid_min, "max": args.grid_max, "step": args.grid_step},
    }
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    print(f"residual {fmt(res.residual)} atoms {len(res.measure.weights)}", file=sys.stderr)
    return EXIT_OK if res.residual < args.threshold else EXIT_INCONCLUSIVE


# ------------------------------------------------------------------- verify


def _unit(rng, k, d):
    X = rng.normal(size=(k, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def suite_conformal(trials: int, seed: int, dims, s=None) -> dict:
    """Maximum errors of the conformal identities over random trials."""
    rng = np.random.default_rng(seed)
    err = {k: 0.0 for k in (
        "group_law", "cocycle", "squeeze", "kernel_covariance",
        "cross_ratio", "sharp_closure",
    )}
    for t in range(trials):
        n = dims[t % len(dims)]
        g1, g2 = random_lorentz(n, rng), random_lorentz(n, rng)
        X = _unit(rng, 4, n + 1)
        x, y = X[:1], X[1:2]
        err["group_law"] = max(err["group_law"], float(np.abs(
            sphere_action(g1 @ g2, X) - sphere_action(g1, sphere_action(g2, X))).max()))
        err["cocycle"] = max(err["cocycle"], _rel(
            conformal_factor(g1, sphere_action(g2, X)) * conformal_factor(g2, X),
            conformal_factor(g1 @ g2, X)))
        gx, gy = sphere_action(g1, x), sphere_action(g1, y)
        J = conformal_factor(g1, X[:2])
        err["squeeze"] = max(err["squeeze"], _rel(
            np.sum((gx - gy) ** 2), J[0] * J[1] * np.sum((x - y) ** 2)))
        err["kernel_covariance"] = max(err["kernel_covariance"], _rel(
            1.0 - np.sum(gx * gy), J[0] * (1.0 - np.sum(x * y)) * J[1]))
        GX = sphere_action(g1, X)
        err["cross_ratio"] = max(err["cross_ratio"], _rel(
            cross_ratio(*GX), cross_ratio(*X)))
    # sharp closure on dilations composed with rotations of the equator
    for t in range(max(trials // 50, 1)):
        n = dims[t % len(dims)]
        R = np.eye(n + 1)
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        R[1:, 1:] = Q
        g = make_lorentz("rotation", n, R=R) @ make_lorentz(
            "dilation", n, t=rng.uniform(0.1, 1.0))
        a = compression_test(g, "ball", 200, 0.0, seed=t)
        b = compression_test(sharp(g), "ball", 200, 0.0, seed=t)
        err["sharp_closure"] = max(err["sharp_closure"], 0.0 if (a.inside and b.inside) else 1.0)
    return err


def suite_cayley(trials: int, seed: int, dims, s=None) -> dict:
    rng = np.random.default_rng(seed)
    err = {k: 0.0 for k in ("c_eta_eq_eta_phi", "phi_involution", "halfspace_to_ball", "stereo_roundtrip")}
    for t in range(trials):
        n = dims[t % len(dims)]
        c = make_lorentz("cayley_c", n)
        x = rng.normal(size=(1, n))
        err["c_eta_eq_eta_phi"] = max(err["c_eta_eq_eta_phi"], float(np.abs(
            sphere_action(c, stereographic(x)) - stereographic(cayley_map(x))).max()))
        h = x.copy()
        h[:, 0] = np.abs(h[:, 0]) + 1e-3
        err["phi_involution"] = max(err["phi_involution"], float(np.abs(
            cayley_map(cayley_map(h)) - h).max()))
        err["halfspace_to_ball"] = max(err["halfspace_to_ball"], 0.0 if np.linalg.norm(cayley_map(h)) < 1 else 1.0)
        err["stereo_roundtrip"] = max(err["stereo_roundtrip"], float(np.abs(
            stereographic_inv(stereographic(x)) - x).max()))
    return err


def suite_kernels(trials: int, seed: int, dims, s=None) -> dict:
    rng = np.random.default_rng(seed)
    err = {k: 0.0 for k in (
        "twisted_kernel", "n1_collapse", "tube_real_slice", "halfspace_ball_congruence",
    )}
    w = lambda z, e: (1.0 + np.sum(z * z, axis=-1)) ** e  # noqa: E731
    for t in range(trials):
        n = dims[t % len(dims)]
        sv = rng.uniform(0, n) if s is None else float(s)
        B = rng.uniform(-1, 1, (2, n))
        B *= 0.95 / np.maximum(np.linalg.norm(B, axis=1, keepdims=True), 0.95)
        x, y = B[:1], B[1:]
        R = kernel_matrix(KernelFamily("ball_R", sv, n), x, y)[0, 0]
        if sv < n:
            Q = kernel_matrix(KernelFamily("sphere_Q", sv, n),
                              sigma_reflect(stereographic(x)), stereographic(y))[0, 0]
            rhs = 2.0 ** (-sv / 2) * w(x, sv / 2)[0] * R * w(y, sv / 2)[0]
            err["twisted_kernel"] = max(err["twisted_kernel"], _rel(Q, rhs))
        u, v = rng.uniform(-0.99, 0.99, 2)
        err["n1_collapse"] = max(err["n1_collapse"], _rel(
            kernel_matrix(KernelFamily("ball_R", sv, 1), [[u]], [[v]])[0, 0],
            (1 - u * v) ** (-sv)))
        m = max(n, 2)
        P = rng.uniform(-1, 1, (2, m))
        P[:, 0] = np.linalg.norm(P[:, 1:], axis=1) + rng.uniform(0.05, 1, 2)
        err["tube_real_slice"] = max(err["tube_real_slice"], _rel(
            kernel_matrix(KernelFamily("tube_power", sv, m), P.astype(complex), P.astype(complex)).real,
            kernel_matrix(KernelFamily("cone_power", sv, m), P, P)))
        H = rng.normal(size=(2, n))
        H[:, 0] = np.abs(H[:, 0]) + 0.05
        Phi = cayley_map(H)
        hs = kernel_matrix(KernelFamily("halfspace_reflected", sv, n), H[:1], H[1:])[0, 0]
        pulled = (w(H, -sv / 2).prod() * w(Phi, sv / 2).prod()
                  * kernel_matrix(KernelFamily("ball_R", sv, n), Phi[:1], Phi[1:])[0, 0])
        err["halfspace_ball_congruence"] = max(err["halfspace_ball_congruence"], _rel(hs, pulled))
    return err


SUITES = {"conformal": suite_conformal, "kernels": suite_kernels, "cayley": suite_cayley}


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    dims = [int(d) for d in args.dim.split(",")]
    errs = SUITES[args.suite](args.trials, args.seed, dims, args.s)
    lines = [
        f"# reflpos verify suite={args.suite} version={__version__} seed={args.seed} "
        f"trials={args.trials} tol={fmt(args.tol)}",
        "identity,max_error,status",
    ]
    ok = True
    for name, e in errs.items():
        good = e < args.tol
        ok &= good
        lines.append(f"{name},{fmt(e)},{'pass' if good else 'fail'}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_VIOLATION


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reflpos", description="Reflection positivity toolkit.")
    p.add_argument("--version", action="version", version=f"reflpos {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    sc = sub.add_parser("pd-scan", help="predicate vs empirical Gram verdicts")
    sc.add_argument("--family", required=True)
    sc.add_argument("--dim", default="4", help="comma-separated dimensions")
    sc.add_argument("--s-min", type=float, default=0.0)
    sc.add_argument("--s-max", type=float, default=3.0)
    sc.add_argument("--s-step", type=float, default=1.0)
    sc.add_argument("--s-values", default=None, help="explicit comma-separated s values")
    sc.add_argument("--points", type=int, default=10)
    sc.add_argument("--restarts", type=int, default=10_000)
    sc.add_argument("--steps", type=int, default=200)
    sc.add_argument("--pd-trials", type=int, default=20)
    sc.add_argument("--seed", type=int, default=0)
    sc.add_argument("--tol", type=float, default=1e-10)
    sc.add_argument("--out", default=None)
    sc.add_argument("--format", choices=("csv", "json"), default="csv")
    sc.add_argument("--witness-dir", default=None)
    sc.add_argument("--workers", type=int, default=1)
    sc.set_defaults(func=cmd_pd_scan)

    g = sub.add_parser("gns", help="GNS diagnostics for a function on R")
    g.add_argument("config", nargs="?", default=None, help="JSON config file")
    g.add_argument("--phi", choices=("exp", "cos", "const"), default=None)
    g.add_argument("--lam", type=float, default=1.0)
    g.add_argument("--tol", type=float, default=1e-10)
    g.add_argument("--out", default=None)
    g.set_defaults(func=cmd_gns)

    f = sub.add_parser("fit", help="fit a Laplace measure to samples")
    f.add_argument("samples", help="CSV (x,phi) or JSON {x: [...], phi: [...]}")
    f.add_argument("--grid-min", type=float, default=0.0)
    f.add_argument("--grid-max", type=float, default=10.0)
    f.add_argument("--grid-step", type=float, default=0.05)
    f.add_argument("--threshold", type=float, default=1e-6)
    f.add_argument("--out", default=None)
    f.set_defaults(func=cmd_fit)

    v = sub.add_parser("verify", help="identity verification suites")
    v.add_argument("suite")
    v.add_argument("--trials", type=int, default=500)
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--dim", default="2,3")
    v.add_argument("--s", type=float, default=None)
    v.add_argument("--tol", type=float, default=1e-9)
    v.add_argument("--out", default=None)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"reflpos: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ReflectionPositivityError as exc:
        print(f"reflpos: {exc}", file=sys.stderr)
        return EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
