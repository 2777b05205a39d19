"""Command-line front end.

Exit codes: 0 affirmative verdict, 1 negative verdict, 2 inconclusive,
3 input or usage error.  Input paths of the form ``bundled:<name>``
refer to the JSON fixtures shipped in ``behavdiss/examples``.
"""

import argparse
import json
import sys
from importlib import resources

import numpy as np

from . import analysis as an
from . import behavior as bh
from . import riccati as rc
from .exceptions import BehavDissError, StrictnessNotVerified
from .polymat import polymat_from_json, polymat_to_json
from .realization import StateSpace

EXIT_OK, EXIT_NEGATIVE, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# loaders

def load_json(path):
    if path.startswith("bundled:"):
        name = path[len("bundled:"):]
        ref = resources.files("behavdiss").joinpath("examples", name)
        if not ref.is_file():
            raise FileNotFoundError(f"no bundled example {name!r}")
        return json.loads(ref.read_text())
    with open(path) as f:
        return json.load(f)


def load_behavior(obj):
    if "kind" in obj and obj["kind"] in ("kernel", "image", "iso"):
        return bh.Behavior.from_json(obj)
    if "behavior" in obj:
        return bh.Behavior.from_json(obj["behavior"])
    if "state_space" in obj and "partition" in obj:
        io = (tuple(obj["partition"]["inputs"]), tuple(obj["partition"]["outputs"]))
        return bh.Behavior.iso(StateSpace.from_json(obj["state_space"]), io=io)
    raise ValueError("cannot interpret JSON as a behavior")


def load_sigma(obj):
    S = obj["sigma"] if isinstance(obj, dict) else obj
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.ndim != 2:
        raise ValueError("Sigma must be a matrix")
    return S


# ---------------------------------------------------------------------------
# rendering

def render_report(report, fmt="json"):
    """Deterministic rendering: sorted-key JSON or a plain text table."""
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    lines = [f"verdict: {report.get('verdict')}"]
    if "reason" in report:
        lines.append(f"reason: {report['reason']}")
    if "assumptions" in report:
        lines.append("assumptions:")
        width = max(len(k) for k in report["assumptions"])
        for k in rc.STAGES:
            if k in report["assumptions"]:
                v = report["assumptions"][k]
                mark = {True: "ok", False: "FAILED", None: "not reached"}[v]
                lines.append(f"  {k:<{width}}  {mark}")
    for key in sorted(report):
        if key in ("verdict", "reason", "assumptions", "details"):
            continue
        lines.append(f"{key}: {json.dumps(report[key], sort_keys=True)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands

def _cmd_certify(args):
    B = load_behavior(load_json(args.behavior))
    S = load_sigma(load_json(args.sigma))
    out = rc.certify(B, S, m_B=args.m, tol=args.tol, grid=args.grid,
                     check_popov=not args.no_popov)
    code = EXIT_OK if isinstance(out, rc.StorageCertificate) else EXIT_NEGATIVE
    return out.to_json(), code


def _cmd_analyze(args):
    obj = load_json(args.input)
    kind = obj.get("kind")
    if kind == "lossless":
        rep = an.lossless_obstruction(obj["A"], obj["C"], tol=args.tol)
        found = rep.verdict == "unobservable storage required"
    elif kind == "static":
        rep = an.static_part_nonexistence(StateSpace.from_json(obj["state_space"]),
                                          obj["J"], tol=args.tol)
        if rep.verdict == "unconfirmed":
            return rep.to_json(), EXIT_INCONCLUSIVE
        found = rep.verdict == "nonexistence"
    else:
        raise ValueError("analyze input needs kind 'lossless' or 'static'")
    return rep.to_json(), EXIT_OK if found else EXIT_NEGATIVE


def _cmd_superbehavior(args):
    B = load_behavior(load_json(args.behavior))
    B2, k = bh.superbehavior(B)
    report = {"verdict": "superbehavior", "k": k,
              "m": bh.input_cardinality(B), "m_superbehavior": bh.input_cardinality(B2),
              "contains": bh.contains(B2, B), "behavior": B2.to_json()}
    return report, EXIT_OK


def _cmd_orthogonality(args):
    B1 = load_behavior(load_json(args.b1))
    B2 = load_behavior(load_json(args.b2))
    S = load_sigma(load_json(args.sigma))
    v = an.orthogonality_check(B1, B2, S, tol=args.tol)
    code = {"pass": EXIT_OK, "fail": EXIT_NEGATIVE}.get(v.verdict, EXIT_INCONCLUSIVE)
    return v.to_json(), code


def _cmd_embed(args):
    obj = load_json(args.input)
    S = load_sigma(obj)
    Mp, Mm = polymat_from_json(obj["M_plus"]), polymat_from_json(obj["M_minus"])
    try:
        B, rep = an.embed_both_ways(S, Mp, Mm, tol=args.tol, grid=args.grid)
    except StrictnessNotVerified as exc:
        return {"kind": "embedding", "verdict": "strictness_not_verified",
                "reason": str(exc)}, EXIT_NEGATIVE
    rep["verdict"] = "autonomous" if rep["autonomous"] else "not_autonomous"
    rep["behavior"] = B.to_json()
    return rep, EXIT_OK if rep["autonomous"] else EXIT_NEGATIVE


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--tol", type=float, default=rc.CERT_TOL,
                        help="certificate tolerance (default 1e-8)")
    common.add_argument("--grid", type=int, default=2000,
                        help="number of frequency grid points (default 2000)")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "text"), default="json")

    p = _Parser(prog="behavdiss",
                description="Dissipativity certificates for uncontrollable behaviors.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    c = sub.add_parser("certify", parents=[common], help="certify Sigma-dissipativity")
    c.add_argument("--behavior", required=True)
    c.add_argument("--sigma", required=True)
    c.add_argument("--m", type=int, default=None, help="input cardinality override")
    c.add_argument("--no-popov", action="store_true",
                   help="skip the sampled Popov check of the controllable part")
    c.set_defaults(func=_cmd_certify)

    a = sub.add_parser("analyze", parents=[common],
                       help="static-part nonexistence or lossless obstruction")
    a.add_argument("--input", required=True)
    a.set_defaults(func=_cmd_analyze)

    s = sub.add_parser("superbehavior", parents=[common],
                       help="smallest controllable superbehavior")
    s.add_argument("--behavior", required=True)
    s.set_defaults(func=_cmd_superbehavior)

    o = sub.add_parser("orthogonality", parents=[common], help="Sigma-orthogonality check")
    o.add_argument("--b1", required=True)
    o.add_argument("--b2", required=True)
    o.add_argument("--sigma", required=True)
    o.set_defaults(func=_cmd_orthogonality)

    e = sub.add_parser("embed-demo", parents=[common],
                       help="intersection of strictly +/-Sigma-dissipative images")
    e.add_argument("--input", default="bundled:embed_pair.json")
    e.set_defaults(func=_cmd_embed)
    return p


def run(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if not args.tol > 0:
            raise UsageError("--tol must be positive")
        if args.grid < 2:
            raise UsageError("--grid must be at least 2")
        report, code = args.func(args)
        text = render_report(report, args.format)
        if args.out:
            with open(args.out, "w") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
        return code
    except (UsageError, OSError, ValueError, KeyError, TypeError,
            json.JSONDecodeError, BehavDissError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
