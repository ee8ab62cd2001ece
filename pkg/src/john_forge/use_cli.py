# Command-line pipeline: JSON in, JSON on stdout, diagnostics on stderr
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import click
import numpy as np

from . import config
from .body import ConvexBody, body_from_descriptor
from .errors import (
    DegenerateInput,
    DescriptorError,
    FullSphereContacts,
    JohnForgeError,
    MaxIterations,
    QuadratureBudgetExceeded,
    TooFewContacts,
)
from .flow import FlowConfig, derivative_check, minimize_Lr
from .isotropic import IsotropicMeasure, PipelineConfig, decompose, verify_john
from .loewner import contact_points, mvee, to_loewner
from .minimize import Status
from .objective import ObjectiveF, solvability_check
from .quadrature import QuadratureConfig

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_DEGENERATE = 2
EXIT_NOT_SOLVABLE = 3
EXIT_NOT_COERCIVE = 4
EXIT_VERIFY_FAILED = 5
EXIT_QUADRATURE = 6


def _dumps(obj: Any) -> str:
    """Deterministic JSON: insertion-ordered keys, floats with 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_dumps(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _dumps(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return format(x, ".17g") if math.isfinite(x) else "null"
    return json.dumps(obj)


def _emit(record: Dict[str, Any], out: Optional[str] = None) -> None:
    text = _dumps({"schema": config.SCHEMA, **record})
    click.echo(text)
    if out:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("a", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _fail(code: int, message: str) -> int:
    click.echo(f"error: {message}", err=True)
    return code


def _read_json(path: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise DescriptorError(f"cannot read {path}: {e.strerror or e}") from e
    except json.JSONDecodeError as e:
        raise DescriptorError(f"{path} is not valid JSON: {e}") from e


def _load_body(path: str) -> ConvexBody:
    desc = _read_json(path)
    if isinstance(desc, dict) and "body" in desc:
        desc = desc["body"]
    return body_from_descriptor(desc)


def _load_points(path: str) -> np.ndarray:
    data = _read_json(path)
    if isinstance(data, dict):
        data = data.get("points", data.get("vertices"))
    try:
        P = np.array(data, dtype=float)
    except (TypeError, ValueError) as e:
        raise DescriptorError(f"points must be a list of coordinate lists: {e}") from e
    if P.ndim != 2 or P.shape[1] < 2:
        raise DescriptorError("points must be an m x n array with n >= 2")
    return P


def _pair_json(p) -> Dict[str, Any]:
    return {"M": p.M.entries, "w": p.w}


def cmd_mvee(points: str, eps: float, out: Optional[str] = None) -> int:
    P = _load_points(points)
    E = mvee(P, eps)
    _emit({"Q": E.shape.entries, "center": E.center, "iterations": E.iterations,
           "volume": E.volume(), "support": np.flatnonzero(E.support_mask()).tolist()}, out)
    return EXIT_OK


def cmd_position(body: str, eps: float, out: Optional[str] = None) -> int:
    K, A, v = to_loewner(_load_body(body), eps)
    _emit({"A": A, "v": v, "body": K.descriptor()}, out)
    return EXIT_OK


def cmd_contacts(body: str, eps: float, tol: float, out: Optional[str] = None) -> int:
    K, _, _ = to_loewner(_load_body(body), eps)
    _emit({"contacts": contact_points(K, tol).to_json()}, out)
    return EXIT_OK


def cmd_check(body: str, eps: float, tol: float, out: Optional[str] = None) -> int:
    K, _, _ = to_loewner(_load_body(body), eps)
    check = solvability_check(contact_points(K, tol))
    _emit({"solvability": check.to_json()}, out)
    return EXIT_OK if check.minimum_exists else EXIT_NOT_SOLVABLE


def cmd_decompose(body: str, F: str, eps: float, tol: float, john_tol: float,
                  verbose: bool = False, out: Optional[str] = None) -> int:
    cfg = PipelineConfig(F=ObjectiveF.from_name(F), mvee_eps=eps, contact_tol=tol, john_tol=john_tol)
    try:
        d = decompose(_load_body(body), cfg)
    except FullSphereContacts as e:
        raise DescriptorError(f"{e}; its John measure is the uniform measure on the sphere, run `flow` instead") from e
    record: Dict[str, Any] = {"F": cfg.F.name}
    if verbose:
        record["position"] = {"A": d.A, "v": d.v}
        record["contacts"] = d.contacts.to_json()
    record["solvability"] = d.solvability.to_json()

    if not d.solvability.minimum_exists:
        _emit(record, out)
        return _fail(EXIT_NOT_SOLVABLE, f"I_c has no minimum: {d.solvability.status.value}")
    res = d.result
    if verbose or not res.converged:
        record["minimize"] = {**_pair_json(res.minimizer), "value": res.value, "grad_norm": res.grad_norm,
                              "iterations": res.iterations, "status": res.status.value}
    if not res.converged:
        _emit(record, out)
        why = "objective is not coercive" if res.status is Status.NOT_COERCIVE else "no convergence"
        return _fail(EXIT_NOT_COERCIVE, why)

    record["measure"] = d.measure.to_json()
    record["report"] = d.report.to_json()
    record["unique"] = d.unique
    _emit(record, out)
    if not d.report.passed:
        return _fail(EXIT_VERIFY_FAILED, "John's conditions fail at the requested tolerance")
    return EXIT_OK


def cmd_verify(measure: str, tol: float, out: Optional[str] = None) -> int:
    data = _read_json(measure)
    if isinstance(data, dict) and "measure" in data:
        data = data["measure"]
    try:
        meas = IsotropicMeasure.from_weights(data["points"], data["weights"])
    except (KeyError, TypeError, ValueError) as e:
        raise DescriptorError(f"measure needs 'points' and 'weights': {e}") from e
    report = verify_john(meas, tol)
    _emit({"report": report.to_json()}, out)
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def _parse_rs(text: str) -> List[float]:
    try:
        rs = [float(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise DescriptorError(f"--rs must be a comma separated list of numbers: {e}") from e
    if not rs:
        raise DescriptorError("--rs is empty")
    return rs


def cmd_flow(body: str, rs: str, quad_budget: int, tol: float, out: Optional[str] = None) -> int:
    K = _load_body(body)
    if K.dim not in (2, 3):
        raise DescriptorError("flow computations need n = 2 or n = 3")
    r_list = _parse_rs(rs)
    quad = QuadratureConfig(tol=tol, max_ang=max(quad_budget, QuadratureConfig.n_ang))
    cfg = FlowConfig(quad=quad)
    results = {}
    for r in r_list:
        res = minimize_Lr(K, r, cfg)
        results[r] = res
        _emit(res.to_json(), out)

    dist = [results[r].distance for r in r_list]
    summary = {
        "rs": r_list,
        "distance": dist,
        "distance_nonincreasing": all(b <= a + 1e-6 for a, b in zip(dist, dist[1:])),
        "trace_ratio": [results[r].trace_ratio for r in r_list],
        "derivative_check": derivative_check(K, r_list, cfg, results=results).to_json(),
    }
    _emit({"summary": summary}, out)
    return EXIT_OK


def _run(fn, *args, **kw) -> int:
    try:
        return fn(*args, **kw)
    except DescriptorError as e:
        return _fail(EXIT_INPUT, str(e))
    except DegenerateInput as e:
        return _fail(EXIT_DEGENERATE, str(e))
    except TooFewContacts as e:
        return _fail(EXIT_NOT_SOLVABLE, str(e))
    except MaxIterations as e:
        return _fail(EXIT_NOT_COERCIVE, str(e))
    except QuadratureBudgetExceeded as e:
        return _fail(EXIT_QUADRATURE, str(e))
    except (JohnForgeError, ValueError) as e:
        return _fail(EXIT_INPUT, str(e))


class _StderrHandler(logging.StreamHandler):
    pass


def _setup_logging(verbose: bool) -> None:
    # one handler on the package logger, bound to whatever stderr is now
    level = logging.DEBUG if verbose else getattr(logging, config.JOHN_FORGE_LOG_LEVEL, logging.WARNING)
    logger = logging.getLogger("john_forge")
    for h in [h for h in logger.handlers if isinstance(h, _StderrHandler)]:
        logger.removeHandler(h)
    handler = _StderrHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logger.addHandler(handler)
    logger.setLevel(level)


_out = click.option("--out", default=None, help="Also append the JSON output to this file")
_verbose = click.option("--verbose", is_flag=True, help="Debug logging; decompose also prints intermediates")
_eps = click.option("--eps", type=float, default=config.DEFAULT_MVEE_EPS, show_default=True,
                    help="MVEE tolerance")
_tol = click.option("--tol", type=float, default=config.DEFAULT_CONTACT_TOL, show_default=True,
                    help="Contact band")
_body = click.option("--body", required=True, help="Body descriptor JSON file")


@click.group(name="john-forge")
def cli() -> None:
    """John decompositions of convex bodies and the r-scaled flow."""


@cli.command("mvee")
@click.option("--points", required=True, help="JSON file with an m x n list of points")
@_eps
@_verbose
@_out
@click.pass_context
def mvee_command(ctx, points, eps, verbose, out):
    """Minimum-volume enclosing ellipsoid of a point set."""
    _setup_logging(verbose)
    ctx.exit(_run(cmd_mvee, points, eps, out))


@cli.command("position")
@_body
@_eps
@_verbose
@_out
@click.pass_context
def position_command(ctx, body, eps, verbose, out):
    """Affine map putting the body in Loewner position."""
    _setup_logging(verbose)
    ctx.exit(_run(cmd_position, body, eps, out))


@cli.command("contacts")
@_body
@_eps
@_tol
@_verbose
@_out
@click.pass_context
def contacts_command(ctx, body, eps, tol, verbose, out):
    """Contact points of the positioned body with the unit sphere."""
    _setup_logging(verbose)
    ctx.exit(_run(cmd_contacts, body, eps, tol, out))


@cli.command("check")
@_body
@_eps
@_tol
@_verbose
@_out
@click.pass_context
def check_command(ctx, body, eps, tol, verbose, out):
    """Is (I/n, 0) interior to the hull of the contact data?"""
    _setup_logging(verbose)
    ctx.exit(_run(cmd_check, body, eps, tol, out))


@cli.command("decompose")
@_body
@click.option("--F", "F", default="exp", show_default=True,
              type=click.Choice(["exp", "paperconv", "shiftedsquare"], case_sensitive=False))
@_eps
@_tol
@click.option("--john-tol", type=float, default=config.JOHN_TOL, show_default=True,
              help="Relative tolerance of the John conditions")
@_verbose
@_out
@click.pass_context
def decompose_command(ctx, body, F, eps, tol, john_tol, verbose, out):
    """Full pipeline: position, contacts, solvability, minimize, weights, verify.

    Bodies whose contacts fill the sphere (balls, ellipsoids) have no finite
    decomposition; use `flow` for those.
    """
    _setup_logging(verbose)
    ctx.exit(_run(cmd_decompose, body, F, eps, tol, john_tol, verbose, out))


@cli.command("verify")
@click.option("--measure", required=True, help="JSON with 'points' and 'weights'")
@click.option("--tol", type=float, default=config.JOHN_TOL, show_default=True)
@_verbose
@_out
@click.pass_context
def verify_command(ctx, measure, tol, verbose, out):
    """Check John's conditions for a weighted point set."""
    _setup_logging(verbose)
    ctx.exit(_run(cmd_verify, measure, tol, out))


@cli.command("flow")
@_body
@click.option("--rs", default="0.9,0.95,0.99", show_default=True, help="Comma separated r values in (1/2, 1)")
@click.option("--quad-budget", type=int, default=QuadratureConfig.max_ang, show_default=True,
              help="Largest angular node count before giving up")
@click.option("--tol", type=float, default=QuadratureConfig.tol, show_default=True,
              help="Agreement required between quadrature refinements")
@_verbose
@_out
@click.pass_context
def flow_command(ctx, body, rs, quad_budget, tol, verbose, out):
    """Minimize L_r for each r and report the r -> 1 trends."""
    _setup_logging(verbose)
    ctx.exit(_run(cmd_flow, body, rs, quad_budget, tol, out))


def main(argv: Optional[List[str]] = None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="john-forge", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_INPUT
    except click.exceptions.Abort:
        return EXIT_INPUT
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
