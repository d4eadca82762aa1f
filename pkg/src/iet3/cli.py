"""Command-line front end and reproducible experiment runner.

Every subcommand writes a JSON report (embedding the full configuration,
package version, and per-check margins) plus CSV data files where measures
or interval lists are produced.  Reports are byte-deterministic: one master
seed is split per sub-task with a stable hash, floats are formatted with 17
significant digits, and keys are sorted.

Exit codes: 0 success, 1 usage error, 2 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .iet_core import Iet3, RotationRep, from_rotation, orbit, to_rotation
from .params import documented_switch_iet, documented_tower_iet, golden_iet

USAGE_ERROR = 1
VERIFY_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(USAGE_ERROR)


def _fmt(x):
    if isinstance(x, float):
        return float(f"{x:.17g}")
    if isinstance(x, dict):
        return {k: _fmt(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_fmt(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_fmt(float(v)) for v in x]
    if isinstance(x, (np.floating,)):
        return float(f"{float(x):.17g}")
    if isinstance(x, (np.integer,)):
        return int(x)
    return x


def _write_report(out: Path, name: str, config: dict, body: dict) -> Path:
    config = {k: v for k, v in config.items()
              if k not in ("fn", "out")
              and (v is None or isinstance(v, (str, int, float, bool)))}
    report = {"tool": "iet3", "version": __version__, "command": name,
              "config": _fmt(config), **_fmt(body)}
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{name}.json"
    path.write_text(json.dumps(report, sort_keys=True, indent=1) + "\n",
                    encoding="utf-8")
    return path


def _resolve_iet(args) -> Iet3:
    if getattr(args, "l", None):
        parts = [float(v) for v in args.l.split(",")]
        if len(parts) != 3:
            raise SystemExit(USAGE_ERROR)
        return Iet3(*parts)
    alpha = None
    if getattr(args, "alpha_cf", None):
        name = args.alpha_cf
        if name == "golden":
            if getattr(args, "kappa", None):
                return golden_iet(float(args.kappa))
            return golden_iet()
        if name == "doc-switch":
            return documented_switch_iet()
        if name == "doc-tower":
            return documented_tower_iet()
        digits = [int(v) for v in name.split(",")]
        from .arith import cf_to_fraction
        alpha = float(cf_to_fraction(digits))
    if getattr(args, "alpha", None) is not None:
        alpha = float(args.alpha)
    if alpha is None:
        raise SystemExit(USAGE_ERROR)
    kappa = float(args.kappa) if getattr(args, "kappa", None) else (1 + alpha) / 2
    return from_rotation(RotationRep(alpha, kappa))


def _common(p: _Parser):
    p.add_argument("--l", help="three comma-separated lengths")
    p.add_argument("--alpha", type=float, help="rotation number")
    p.add_argument("--alpha-cf",
                   help="continued fraction digits, or golden|doc-switch|doc-tower")
    p.add_argument("--kappa", help="induced interval length")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["rational", "f64x"], default="f64x")
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--out", default="iet3-out", help="output directory")


def cmd_iet_info(args) -> int:
    iet = _resolve_iet(args)
    rep = to_rotation(iet)
    body = {"lengths": [float(iet.l1), float(iet.l2), float(iet.l3)],
            "alpha": float(rep.alpha), "kappa": float(rep.kappa),
            "iet_json": json.loads(iet.to_json())}
    path = _write_report(Path(args.out), "iet-info", vars(args), body)
    print(json.dumps(_fmt(body), sort_keys=True))
    return 0


def cmd_orbit(args) -> int:
    iet = _resolve_iet(args)
    seg = orbit(iet, args.x, args.length)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["i,x"] + [f"{i},{v:.17g}" for i, v in enumerate(seg.points)]
    (out / "orbit.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_report(out, "orbit", vars(args),
                  {"start": seg.start, "length": len(seg),
                   "last": float(seg.points[-1])})
    print(f"orbit of length {len(seg)} written")
    return 0


def cmd_renorm_find(args) -> int:
    from .renorm import scan_renorm_times
    iet = _resolve_iet(args)
    scan = scan_renorm_times(iet, delta=args.delta, t_max=args.t_max)
    body = {
        "times": [{"t": rt.t, "n_steps": rt.n_steps, "dist_hat": rt.dist_hat,
                   "rho": rt.rho, "V_len": rt.V_len, "m": rt.m,
                   "m_fractions": list(rt.m_fractions)} for rt in scan.times],
        "n_rejections": len(scan.rejections),
        "rejections_sample": [[t, r] for t, r in scan.rejections[:40]],
    }
    _write_report(Path(args.out), "renorm-find", vars(args), body)
    print(f"{len(scan.times)} accepted times; report written")
    return 0


def cmd_tower(args) -> int:
    from .towers import build_tower, suggest_towers, tower_stats
    iet = _resolve_iet(args)
    cands = suggest_towers(iet, k_max=args.k_max, t_max=args.t_max)
    rows = []
    out = Path(args.out)
    for I, n in cands:
        tw = build_tower(iet, I, n)
        st = tower_stats(tw, iet)
        rows.append({"base": [float(I[0]), float(I[1])], "height": n,
                     "coverage": st.coverage, "rigidity": st.rigidity,
                     "hat": st.hat_measure, "tilde": st.tilde_measure})
    body = {"candidates": rows}
    _write_report(out, "tower", vars(args), body)
    if rows:
        best = rows[-1]
        lines = ["a,b"]
        tw = build_tower(iet, cands[-1][0], cands[-1][1])
        w = float(tw.width)
        for lo in tw.level_lows:
            lines.append(f"{float(lo):.17g},{float(lo)+w:.17g}")
        (out / "tower_levels.csv").write_text("\n".join(lines) + "\n",
                                              encoding="utf-8")
        print(f"best tower: height {best['height']} coverage {best['coverage']:.6f} "
              f"rigidity {best['rigidity']:.3e}")
    else:
        print("no tower found")
    return 0 if rows else VERIFY_ERROR


def cmd_joining_sample(args) -> int:
    from .joinings import measure_histogram_csv, measure_to_csv, sample_power_joining
    iet = _resolve_iet(args)
    m = sample_power_joining(iet, args.power, args.atoms, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "joining.csv").write_text(measure_to_csv(m), encoding="utf-8")
    if args.heatmap:
        (out / "joining_heatmap.csv").write_text(
            measure_histogram_csv(m, args.heatmap), encoding="utf-8")
    _write_report(out, "joining-sample", vars(args),
                  {"atoms": len(m), "power": args.power})
    print(f"{len(m)} atoms written")
    return 0


def cmd_kr(args) -> int:
    from .joinings import kr_distance_detailed, measure_from_csv
    mu = measure_from_csv(Path(args.mu).read_text(encoding="utf-8"))
    nu = measure_from_csv(Path(args.nu).read_text(encoding="utf-8"))
    det = kr_distance_detailed(mu, nu, metric=args.metric)
    _write_report(Path(args.out), "kr", {"mu": args.mu, "nu": args.nu,
                                         "metric": args.metric}, det)
    print(f"{det['value']:.17g}")
    return 0


def cmd_approx_powers(args) -> int:
    from .joinings import approx_by_powers, product_sample, sample_power_joining
    from .towers import build_tower, suggest_towers
    iet = _resolve_iet(args)
    cands = suggest_towers(iet, k_max=args.k_max, t_max=args.t_max)
    if not cands:
        print("no tower available")
        return VERIFY_ERROR
    tower = build_tower(iet, cands[-1][0], cands[-1][1])
    if args.power is not None:
        m = sample_power_joining(iet, args.power, args.atoms, seed=args.seed)
    else:
        m = product_sample(args.atoms, seed=args.seed)
    coeff, errs = approx_by_powers(iet, m, tower, bins=args.bins)
    body = {"tower_height": tower.height, "coeff_total": coeff.total(),
            "errors": {k: v for k, v in errs.items()},
            "top_indices": [int(i) for i in
                            np.argsort(coeff.dense())[-5:][::-1]]}
    _write_report(Path(args.out), "approx-powers", vars(args), body)
    print(f"sum c = {coeff.total():.6f}; coord L2 error {errs['coord']:.4f}")
    return 0


def cmd_weak_closure(args) -> int:
    from .joinings import weak_closure_check
    iet = _resolve_iet(args)
    n, err, info = weak_closure_check(iet, k=args.k, horizon=args.horizon,
                                      N=args.atoms, seed=args.seed)
    body = {"best_n": n, "kr_error": err, "scan_N": info["scan_N"]}
    _write_report(Path(args.out), "weak-closure", vars(args), body)
    print(f"best n = {n}, kr error = {err:.6f}")
    return 0


def cmd_switch(args) -> int:
    from .construction import SwitchSpec, build_switch
    iet = _resolve_iet(args)
    spec = SwitchSpec(a=args.a, b=args.b, epsilon=args.eps)
    res = build_switch(iet, spec, verify_samples=args.samples, seed=args.seed)
    checks = res.diagnostics.get("verification", {}).get("checks", {})
    body = {"n": res.n, "m": res.m, "r": res.r, "L": res.L, "rho": res.rho,
            "V_len": res.V_len, "n_steps": res.n_steps,
            "J": [float(res.J[0]), float(res.J[1])],
            "lambda_A": res.lambda_A, "lambda_B": res.lambda_B,
            "return_lower_bound": res.return_lo, "status": res.status,
            "checks": checks}
    _write_report(Path(args.out), "switch", vars(args), body)
    print(f"status: {res.status}; n = {res.n}, r = {res.r}")
    return 0 if res.status == "verified" else VERIFY_ERROR


def cmd_schedule(args) -> int:
    from .construction import ksv_check, run_schedule
    iet = _resolve_iet(args)
    eps = [args.eps / 2 ** i for i in range(args.levels)]
    sched = run_schedule(iet, (0, 1), eps, args.levels, N_atoms=args.atoms,
                         seed=args.seed, verify_samples=args.samples)
    rep = ksv_check(sched, iet, seed=args.seed)
    body = {
        "aborted": sched.aborted, "abort_reason": sched.abort_reason,
        "levels": [{"k": lv.k, "epsilon": lv.epsilon, "n_steps": lv.n_steps,
                    "m": lv.m, "r": lv.r, "lambda_J": lv.lambda_J,
                    "exponents": [int(e) for e in lv.exponents],
                    "lambda_A": lv.lambda_A, "lambda_B": lv.lambda_B,
                    "U_mass": lv.U_mass} for lv in sched.levels],
        "ksv": rep,
    }
    _write_report(Path(args.out), "schedule", vars(args), body)
    ok = (not sched.aborted) and rep["all_pass"]
    print(f"levels: {len(sched.levels)}; conditions pass: {rep['all_pass']}")
    return 0 if ok else VERIFY_ERROR


def cmd_witness(args) -> int:
    from .construction import non_simplicity_witness
    from .joinings import measure_to_csv
    iet = _resolve_iet(args)
    rep = non_simplicity_witness(iet, K_levels=args.levels, N=args.atoms,
                                 seed=args.seed)
    out = Path(args.out)
    body = {k: v for k, v in rep.items() if k != "schedule"}
    sched = rep.get("schedule")
    if sched is not None:
        body["schedule_levels"] = [
            {"k": lv.k, "n_steps": lv.n_steps, "m": lv.m,
             "exponents": [int(e) for e in lv.exponents]}
            for lv in sched.levels]
        out.mkdir(parents=True, exist_ok=True)
        (out / "final_average.csv").write_text(measure_to_csv(sched.average),
                                               encoding="utf-8")
    _write_report(out, "witness", vars(args), body)
    print(f"witness passed: {rep['passed']}")
    return 0 if rep["passed"] else VERIFY_ERROR


def build_parser() -> _Parser:
    p = _Parser(prog="iet3", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)

    def add(name, fn, extra=None):
        q = sub.add_parser(name)
        _common(q)
        if extra:
            extra(q)
        q.set_defaults(fn=fn)
        return q

    add("iet-info", cmd_iet_info)
    add("orbit", cmd_orbit, lambda q: (q.add_argument("--x", type=float, default=0.1),
                                       q.add_argument("--length", type=int, default=100)))
    add("renorm-find", cmd_renorm_find,
        lambda q: (q.add_argument("--delta", type=float, default=0.3),
                   q.add_argument("--t-max", type=float, default=11.0)))
    add("tower", cmd_tower,
        lambda q: (q.add_argument("--k-max", type=int, default=20),
                   q.add_argument("--t-max", type=float, default=11.0)))
    add("joining-sample", cmd_joining_sample,
        lambda q: (q.add_argument("--power", type=int, default=1),
                   q.add_argument("--atoms", type=int, default=10000),
                   q.add_argument("--heatmap", type=int, default=0,
                                  help="also write a grid histogram CSV")))
    add("kr", cmd_kr, lambda q: (q.add_argument("--mu", required=True),
                                 q.add_argument("--nu", required=True),
                                 q.add_argument("--metric", default="interval",
                                                choices=["interval", "circle"])))
    add("approx-powers", cmd_approx_powers,
        lambda q: (q.add_argument("--power", type=int, default=None),
                   q.add_argument("--atoms", type=int, default=100000),
                   q.add_argument("--bins", type=int, default=128),
                   q.add_argument("--k-max", type=int, default=20),
                   q.add_argument("--t-max", type=float, default=11.0)))
    add("weak-closure", cmd_weak_closure,
        lambda q: (q.add_argument("--k", type=int, default=1),
                   q.add_argument("--horizon", type=int, default=200),
                   q.add_argument("--atoms", type=int, default=20000)))
    add("switch", cmd_switch,
        lambda q: (q.add_argument("--a", type=int, default=0),
                   q.add_argument("--b", type=int, default=1)))
    add("schedule", cmd_schedule,
        lambda q: q.add_argument("--atoms", type=int, default=20000))
    add("witness", cmd_witness,
        lambda q: q.add_argument("--atoms", type=int, default=100000))
    return p


def run_command(argv) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit as e:
        raise
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return VERIFY_ERROR


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
