"""Command-line front end: ``swapcal {audit,boost,postprocess,separations,instance}``.

Exit codes: 0 on success, 1 when a check fails or boosting does not
converge, 2 on unreadable or invalid input.
"""

from __future__ import annotations

import argparse
import contextlib
import os
import sys
from pathlib import Path

from . import jsonio
from .audit import (audit, loss_oi_violations, omniprediction_regret, swap_agnostic_regret,
                    swap_loss_oi_violation, swap_omni_regret)
from .boost import BoostConfig, mcboost
from .distributions import DiscreteJoint, Predictor, image
from .errors import DidNotConverge, ParseError, SwapcalError, VerificationFailed
from .hypotheses import Hypothesis, HypothesisClass, lin_grid, validate_class
from .instances import random_instance
from .losses import LossFamily, optimal_action, parse_loss
from .separations import build_glm_instance, build_parity_instance, verify_separations

SHIPPED = {"parity": build_parity_instance, "glm": build_glm_instance}
DATA_DIR = Path(__file__).parent / "data"


class InputError(Exception):
    """Bad command-line input; maps to exit code 2."""


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _fraction(text: str) -> float:
    """Parse ``0.125`` or ``1/8``."""
    try:
        if "/" in text:
            num, den = text.split("/")
            return float(num) / float(den)
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _load_inputs(args, need_pred: bool = True):
    if args.instance:
        dist, pred, cls = SHIPPED[args.instance]()
        return dist, pred, cls
    flags = {"--dist": args.dist, "--class": args.cls}
    if need_pred:
        flags["--pred"] = args.pred
    missing = [flag for flag, value in flags.items() if not value]
    if missing:
        raise InputError("missing " + ", ".join(missing) + " (or use --instance)")
    dist = DiscreteJoint.from_json(jsonio.read(args.dist))
    pred = Predictor.from_json(jsonio.read(args.pred)) if need_pred else None
    cls = HypothesisClass.from_json(jsonio.read(args.cls))
    issues = validate_class(cls, dist)
    if issues:
        raise InputError("invalid class: " + "; ".join(f"{i.kind} {i.member} {i.detail}".strip() for i in issues))
    return dist, pred, cls


def _losses(specs: list[str] | None) -> list:
    return [parse_loss(s) for s in specs or []]


def cmd_audit(args) -> int:
    dist, pred, cls = _load_inputs(args)
    doc = audit(dist, pred, cls).to_json()
    losses = _losses(args.loss)
    if losses:
        grid = lin_grid(cls, args.budget, args.grid_step)
        per_loss = []
        for loss in losses:
            k = Hypothesis("k", {i: optimal_action(loss, v) for i, v in pred.values.items()})
            per_loss.append({
                "loss": loss.name,
                "omniprediction_regret": omniprediction_regret(dist, pred, loss, grid),
                "swap_agnostic_regret": swap_agnostic_regret(dist, k, loss, grid),
                "loss_oi_violation": float(loss_oi_violations(dist, pred, loss, grid).max()),
            })
        fam = LossFamily(tuple(losses))
        doc["regrets"] = {
            "budget": args.budget, "grid_step": args.grid_step, "competitors": len(grid),
            "per_loss": per_loss,
            "swap_omni_regret": swap_omni_regret(dist, pred, fam, grid),
            "swap_loss_oi_violation": swap_loss_oi_violation(dist, pred, fam, grid),
        }
    _emit(jsonio.dumps(doc, indent=2), args.out)
    return 0


def cmd_boost(args) -> int:
    dist, _, cls = _load_inputs(args, need_pred=False)
    config = BoostConfig(args.alpha, grid_step=args.delta, max_iterations=args.max_iterations)
    try:
        pred, trace = mcboost(dist, cls, config)
    except DidNotConverge as exc:
        if args.trace and exc.trace is not None:
            Path(args.trace).write_text(exc.trace.to_jsonl(jsonio.dumps))
        print(f"swapcal: {exc}", file=sys.stderr)
        return 1
    if args.trace:
        Path(args.trace).write_text(trace.to_jsonl(jsonio.dumps))
    doc = pred.to_json()
    doc["boost"] = {"config": config.to_json(), "iterations": len(trace),
                    "smce": audit(dist, pred, cls).smce}
    _emit(jsonio.dumps(doc, indent=2), args.out)
    return 0


def cmd_postprocess(args) -> int:
    if not args.pred:
        raise InputError("missing --pred")
    losses = _losses(args.loss)
    if not losses:
        raise InputError("postprocess needs at least one --loss")
    pred = Predictor.from_json(jsonio.read(args.pred))
    if args.dist:
        values = image(pred, DiscreteJoint.from_json(jsonio.read(args.dist)))
    else:
        values = sorted(set(pred.values.values()))
    doc = {"image": values, "losses": [
        {"loss": loss.name, "descriptor": loss.descriptor(),
         "actions": [{"v": v, "k": optimal_action(loss, v)} for v in values]}
        for loss in losses]}
    _emit(jsonio.dumps(doc, indent=2), args.out)
    return 0


def cmd_separations(args) -> int:
    report = verify_separations()
    text = jsonio.dumps(report.to_json(), indent=2)
    if args.out:
        _emit(text, args.out)
        print(report.table())
    else:
        _emit(text, None)
        print(report.table(), file=sys.stderr)
    return 0 if report.passed else 1


def cmd_instance(args) -> int:
    if args.name == "random":
        ri = random_instance(args.seed)
        dist, pred, cls = ri.dist, ri.pred, ri.cls
    else:
        dist, pred, cls = SHIPPED[args.name]()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jsonio.write(out / "dist.json", dist.to_json())
    jsonio.write(out / "pred.json", pred.to_json())
    jsonio.write(out / "class.json", cls.to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="swapcal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def inputs(p, pred=True):
        p.add_argument("--dist", help="distribution JSON")
        if pred:
            p.add_argument("--pred", help="predictor JSON")
        p.add_argument("--class", dest="cls", help="hypothesis class JSON")
        p.add_argument("--instance", choices=sorted(SHIPPED), help="use a built-in instance instead of files")
        p.add_argument("--out", help="write JSON here instead of stdout")

    p = sub.add_parser("audit", help="multicalibration metrics, optionally with loss regrets")
    inputs(p)
    p.add_argument("--loss", action="append", help="loss spec, e.g. squared or p_power:p=4 (repeatable)")
    p.add_argument("--budget", type=float, default=1.0, help="W for the Lin(C, W) competitor grid")
    p.add_argument("--grid-step", type=_fraction, default=0.125)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("boost", help="run MCBoost and emit the predictor")
    inputs(p, pred=False)
    p.add_argument("--alpha", type=_fraction, required=True)
    p.add_argument("--delta", type=_fraction, help="prediction lattice step (1/delta integral)")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--trace", help="write per-iteration JSON lines here")
    p.set_defaults(func=cmd_boost)

    p = sub.add_parser("postprocess", help="optimal actions over a predictor's image")
    p.add_argument("--pred")
    p.add_argument("--dist", help="restrict to values with positive mass")
    p.add_argument("--loss", action="append")
    p.add_argument("--out")
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("separations", help="verify the counterexample constants")
    p.add_argument("--out")
    p.set_defaults(func=cmd_separations)

    p = sub.add_parser("instance", help="write a built-in or random instance as JSON files")
    p.add_argument("--name", choices=sorted(SHIPPED) + ["random"], required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_instance)
    return parser


def _thread_limit():
    raw = os.environ.get("SWAPCAL_THREADS")
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
        if n < 1:
            raise ValueError
    except ValueError:
        raise InputError(f"SWAPCAL_THREADS must be a positive integer, got {raw!r}") from None
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with _thread_limit():
            return args.func(args)
    except (InputError, ParseError) as exc:
        print(f"swapcal: {exc}", file=sys.stderr)
        return 2
    except (DidNotConverge, VerificationFailed) as exc:
        print(f"swapcal: {exc}", file=sys.stderr)
        return 1
    except (SwapcalError, ValueError, KeyError) as exc:
        print(f"swapcal: invalid input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
