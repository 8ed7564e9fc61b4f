"""Command-line front end: config parsing, orchestration, CSV emission.

Configs are line-based ``key = value`` documents with ``#`` comments.
Every config key doubles as a CLI flag (``--key value``); flags override
file values.  Identical configs produce byte-identical CSV output (floats
are written in shortest round-trip decimal).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from . import certify as certify_mod
from . import omega_star
from .modulus import (
    HalfSpacePoint,
    Params,
    hyperbolic_distance,
    hyperbolic_modulus,
    theta,
    theta_params,
)
from .quadrature import Box, GridSpec, default_grading
from .omega_star import SolverConfig

__all__ = [
    "ConfigError",
    "RunConfig",
    "PairSource",
    "parse_config",
    "render_config",
    "run",
    "main",
    "COMMANDS",
    "CONFIG_KEYS",
]

COMMANDS = ("theta", "certify", "omega", "hyperbolic", "audit")

CONFIG_KEYS = (
    "command",
    "n",
    "gamma",
    "p",
    "x",
    "y",
    "points",
    "pairs",
    "pair_list",
    "sample_lo",
    "sample_hi",
    "sample_count",
    "seed",
    "grid_lo",
    "grid_hi",
    "grid_cells",
    "grid_grading",
    "max_iterations",
    "stop_rel_energy",
    "smoothing_epsilon",
    "line_search_shrink",
    "variant",
    "compact",
    "corpus",
    "out",
)


class ConfigError(ValueError):
    """Invalid configuration; the message carries the offending line."""


@dataclass(frozen=True)
class PairSource:
    mode: str  # "inline" or "sample"
    pairs: tuple = ()
    box: Optional[Box] = None
    count: int = 0
    seed: Optional[int] = None

    def resolve(self) -> list:
        if self.mode == "inline":
            return list(self.pairs)
        return certify_mod.sample_pairs(self.box, self.count, self.seed)


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: Params
    out: str
    pair_source: PairSource = PairSource("inline")
    points: tuple = ()
    grid: Optional[GridSpec] = None
    solver: SolverConfig = SolverConfig()
    variant: str = "full"
    compact: bool = False
    corpus: str = "default"
    seed: Optional[int] = None


def _err(line: int, msg: str) -> ConfigError:
    where = f"line {line}: " if line > 0 else ""
    return ConfigError(f"{where}{msg}")


def parse_items(text: str) -> list[tuple[str, str, int]]:
    """Split a config document into (key, value, line) triples."""
    items = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _err(lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        items.append((key.strip(), value.strip(), lineno))
    return items


def _parse_float(value: str, line: int, key: str) -> float:
    try:
        out = float(value)
    except ValueError:
        raise _err(line, f"malformed number for {key!r}: {value!r}") from None
    if not math.isfinite(out):
        raise _err(line, f"{key!r} must be finite, got {value!r}")
    return out


def _parse_int(value: str, line: int, key: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise _err(line, f"malformed integer for {key!r}: {value!r}") from None


def _parse_bool(value: str, line: int, key: str) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise _err(line, f"{key!r} must be true or false, got {value!r}")


def _parse_reals(value: str, line: int, key: str) -> tuple[float, ...]:
    parts = [p for p in value.split(",") if p.strip() != ""]
    if not parts:
        raise _err(line, f"{key!r} must be a comma list of reals")
    return tuple(_parse_float(p, line, key) for p in parts)


def _parse_point(value: str, line: int, key: str) -> HalfSpacePoint:
    coords = _parse_reals(value, line, key)
    if coords[-1] <= 0:
        raise _err(line, f"{key!r} must have positive height (last coordinate), got {value!r}")
    return HalfSpacePoint.from_coords(coords)


def _parse_points(value: str, line: int, key: str) -> tuple[HalfSpacePoint, ...]:
    chunks = [c for c in value.split(";") if c.strip() != ""]
    return tuple(_parse_point(c, line, key) for c in chunks)


def _parse_pairs(value: str, line: int, key: str) -> tuple:
    pairs = []
    for chunk in value.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "|" not in chunk:
            raise _err(line, f"each pair in {key!r} is 'point | point', got {chunk!r}")
        left, right = chunk.split("|", 1)
        pairs.append((_parse_point(left, line, key), _parse_point(right, line, key)))
    return tuple(pairs)


def build_config(items: Sequence[tuple[str, str, int]]) -> RunConfig:
    """Validate (key, value, line) triples into a RunConfig."""
    seen: dict[str, tuple[str, int]] = {}
    for key, value, line in items:
        if key not in CONFIG_KEYS:
            raise _err(line, f"unknown key {key!r}")
        seen[key] = (value, line)

    def get(key: str):
        return seen.get(key, (None, 0))

    command, line = get("command")
    if command is None:
        raise ConfigError("missing required key 'command'")
    if command not in COMMANDS:
        raise _err(line, f"unknown command {command!r}; expected one of {COMMANDS}")

    nv, nline = get("n")
    pv, pline = get("p")
    gv, gline = get("gamma")
    if nv is None or pv is None:
        raise ConfigError("keys 'n' and 'p' are required")
    n = _parse_int(nv, nline, "n")
    p = _parse_float(pv, pline, "p")
    if gv is None:
        if command != "hyperbolic":
            raise ConfigError("key 'gamma' is required")
        gamma = p - n  # the hyperbolic model weight
    else:
        gamma = _parse_float(gv, gline, "gamma")
    if n < 1:
        raise _err(nline, f"n must be >= 1, got {n}")
    if p <= n:
        raise _err(pline, f"need p > n, got p={p}, n={n}")
    params = Params(n, gamma, p)

    seed_v, seed_line = get("seed")
    seed = _parse_int(seed_v, seed_line, "seed") if seed_v is not None else None

    # Pair source.
    mode_v, mode_line = get("pairs")
    pair_list_v, pair_list_line = get("pair_list")
    x_v, x_line = get("x")
    y_v, y_line = get("y")
    if mode_v == "sample":
        lo_v, lo_line = get("sample_lo")
        hi_v, hi_line = get("sample_hi")
        cnt_v, cnt_line = get("sample_count")
        if lo_v is None or hi_v is None or cnt_v is None:
            raise _err(mode_line, "sampling needs sample_lo, sample_hi, and sample_count")
        if seed is None:
            raise _err(mode_line, "sampling needs an explicit seed")
        lo = _parse_reals(lo_v, lo_line, "sample_lo")
        hi = _parse_reals(hi_v, hi_line, "sample_hi")
        if len(lo) != n or len(hi) != n:
            raise _err(lo_line, f"sample box corners must have {n} coordinates")
        if lo[-1] <= 0:
            raise _err(lo_line, "sample box must have positive lower height")
        box = Box(lo, hi)
        if box.is_empty():
            raise _err(lo_line, "sample box must have positive volume")
        source = PairSource("sample", (), box, _parse_int(cnt_v, cnt_line, "sample_count"), seed)
    elif mode_v in (None, "inline"):
        if pair_list_v is not None:
            pairs = _parse_pairs(pair_list_v, pair_list_line, "pair_list")
        elif x_v is not None and y_v is not None:
            pairs = ((_parse_point(x_v, x_line, "x"), _parse_point(y_v, y_line, "y")),)
        else:
            pairs = ()
        for a, b in pairs:
            if a.dim != n or b.dim != n:
                raise _err(pair_list_line or x_line, f"points must have {n} coordinates")
        source = PairSource("inline", pairs)
    else:
        raise _err(mode_line, f"'pairs' must be 'inline' or 'sample', got {mode_v!r}")

    points_v, points_line = get("points")
    points = _parse_points(points_v, points_line, "points") if points_v is not None else ()
    for pt in points:
        if pt.dim != n:
            raise _err(points_line, f"points must have {n} coordinates")

    # Grid.
    grid = None
    glo_v, glo_line = get("grid_lo")
    ghi_v, ghi_line = get("grid_hi")
    gc_v, gc_line = get("grid_cells")
    gg_v, gg_line = get("grid_grading")
    if any(v is not None for v in (glo_v, ghi_v, gc_v)):
        if glo_v is None or ghi_v is None or gc_v is None:
            raise ConfigError("a grid needs grid_lo, grid_hi, and grid_cells")
        lo = _parse_reals(glo_v, glo_line, "grid_lo")
        hi = _parse_reals(ghi_v, ghi_line, "grid_hi")
        if len(lo) != n or len(hi) != n:
            raise _err(glo_line, f"grid corners must have {n} coordinates")
        cells = tuple(_parse_int(c, gc_line, "grid_cells") for c in gc_v.split(","))
        if len(cells) == 1:
            cells = cells * n
        if gg_v is not None:
            grading = _parse_float(gg_v, gg_line, "grid_grading")
        else:
            grading = default_grading(gamma) if lo[-1] == 0.0 else 1.0
        try:
            grid = GridSpec(Box(lo, hi), cells, grading)
        except ValueError as exc:
            raise _err(glo_line, str(exc)) from None
    elif gg_v is not None:
        raise _err(gg_line, "grid_grading given without a grid")

    # Solver.
    solver_kwargs = {}
    for key, cast in (
        ("max_iterations", _parse_int),
        ("stop_rel_energy", _parse_float),
        ("smoothing_epsilon", _parse_float),
        ("line_search_shrink", _parse_float),
    ):
        v, vline = get(key)
        if v is not None:
            solver_kwargs[key] = cast(v, vline, key)
    if seed is not None:
        solver_kwargs["seed"] = seed
    try:
        solver = SolverConfig(**solver_kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    variant_v, variant_line = get("variant")
    variant = variant_v if variant_v is not None else "full"
    if variant not in certify_mod.VARIANTS:
        raise _err(variant_line, f"unknown variant {variant!r}")

    compact_v, compact_line = get("compact")
    compact = _parse_bool(compact_v, compact_line, "compact") if compact_v is not None else False

    corpus_v, corpus_line = get("corpus")
    corpus = corpus_v if corpus_v is not None else "default"
    if corpus != "default":
        raise _err(corpus_line, f"unknown corpus {corpus!r}; only 'default' is available")

    out_v, _ = get("out")
    if out_v is None:
        raise ConfigError("missing required key 'out'")

    # Command-specific requirements.
    if command == "audit" and len(points) < 3:
        raise ConfigError("the audit command needs at least three points")
    if command == "certify" and grid is None:
        raise ConfigError("the certify command needs an explicit grid")

    return RunConfig(
        command=command,
        params=params,
        out=out_v,
        pair_source=source,
        points=points,
        grid=grid,
        solver=solver,
        variant=variant,
        compact=compact,
        corpus=corpus,
        seed=seed,
    )


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config document."""
    return build_config(parse_items(text))


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _point_str(pt: HalfSpacePoint) -> str:
    return ",".join(repr(float(c)) for c in pt.coords)


def render_config(cfg: RunConfig) -> str:
    """Canonical key = value document; parse_config round-trips it."""
    lines = [
        f"command = {cfg.command}",
        f"n = {cfg.params.n}",
        f"gamma = {_fmt(cfg.params.gamma)}",
        f"p = {_fmt(cfg.params.p)}",
    ]
    src = cfg.pair_source
    if src.mode == "sample":
        lines.append("pairs = sample")
        lines.append(f"sample_lo = {','.join(repr(c) for c in src.box.lo)}")
        lines.append(f"sample_hi = {','.join(repr(c) for c in src.box.hi)}")
        lines.append(f"sample_count = {src.count}")
    elif src.pairs:
        lines.append("pairs = inline")
        rendered = ";".join(f"{_point_str(a)}|{_point_str(b)}" for a, b in src.pairs)
        lines.append(f"pair_list = {rendered}")
    if cfg.points:
        lines.append(f"points = {';'.join(_point_str(pt) for pt in cfg.points)}")
    if cfg.grid is not None:
        lines.append(f"grid_lo = {','.join(repr(c) for c in cfg.grid.box.lo)}")
        lines.append(f"grid_hi = {','.join(repr(c) for c in cfg.grid.box.hi)}")
        lines.append(f"grid_cells = {','.join(str(c) for c in cfg.grid.cells_per_axis)}")
        lines.append(f"grid_grading = {_fmt(cfg.grid.grading_exponent)}")
    sv = cfg.solver
    lines.append(f"max_iterations = {sv.max_iterations}")
    lines.append(f"stop_rel_energy = {_fmt(sv.stop_rel_energy)}")
    lines.append(f"smoothing_epsilon = {_fmt(sv.smoothing_epsilon)}")
    lines.append(f"line_search_shrink = {_fmt(sv.line_search_shrink)}")
    if cfg.seed is not None:
        lines.append(f"seed = {cfg.seed}")
    lines.append(f"variant = {cfg.variant}")
    lines.append(f"compact = {_fmt(cfg.compact)}")
    lines.append(f"corpus = {cfg.corpus}")
    lines.append(f"out = {cfg.out}")
    return "\n".join(lines) + "\n"


def _csv_row(cells: Sequence[str]) -> str:
    return ",".join(cells)


def _quoted(s: str) -> str:
    return f'"{s}"'


def _write_csv(path: str, header: str, rows: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def _run_theta(cfg: RunConfig) -> None:
    tp = theta_params(cfg.params)
    rows = []
    for x, y in cfg.pair_source.resolve():
        rows.append(
            _csv_row(
                [
                    str(cfg.params.n),
                    _fmt(cfg.params.gamma),
                    _fmt(cfg.params.p),
                    _fmt(tp.alpha),
                    _fmt(tp.beta),
                    _fmt(tp.kappa),
                    _quoted(_point_str(x)),
                    _quoted(_point_str(y)),
                    _fmt(theta(tp, x, y)),
                ]
            )
        )
    _write_csv(cfg.out, "n,gamma,p,alpha,beta,kappa,x,y,theta", rows)


def _run_certify(cfg: RunConfig) -> None:
    corpus = certify_mod.standard_corpus(cfg.params)
    pairs = cfg.pair_source.resolve()
    if cfg.variant in ("compact", "hyperbolic_compact"):
        corpus = [f for f in corpus if f.support_box is not None and f.support_box.lo[-1] > 0]
    report = certify_mod.run_certification(corpus, pairs, cfg.params, cfg.variant, cfg.grid)
    rows = [
        _csv_row(
            [
                cfg.variant,
                rec.field_id,
                _quoted(_point_str(rec.x)),
                _quoted(_point_str(rec.y)),
                _fmt(rec.difference),
                _fmt(rec.energy),
                _fmt(rec.modulus),
                _fmt(rec.ratio),
            ]
        )
        for rec in report.records
    ]
    _write_csv(cfg.out, "variant,field_id,x,y,difference,energy,modulus,ratio", rows)


def _run_omega(cfg: RunConfig) -> None:
    tp = theta_params(cfg.params)
    rows = []
    for x, y in cfg.pair_source.resolve():
        grid = cfg.grid or omega_star.default_grid_for_pair(x, y, cfg.params)
        est = omega_star.solve(x, y, cfg.params, grid, cfg.solver)
        oracle = ""
        if cfg.params.n == 1:
            oracle = _fmt(omega_star.oned_exact(cfg.params, x.height, y.height))
        th = theta(tp, x, y)
        rows.append(
            _csv_row(
                [
                    str(cfg.params.n),
                    _fmt(cfg.params.gamma),
                    _fmt(cfg.params.p),
                    _quoted(_point_str(x)),
                    _quoted(_point_str(y)),
                    _fmt(est.value),
                    _fmt(est.min_energy),
                    str(est.iterations),
                    _fmt(est.converged),
                    oracle,
                    _fmt(th),
                    _fmt(est.value / th if th > 0 else math.inf),
                ]
            )
        )
    _write_csv(
        cfg.out,
        "n,gamma,p,x,y,omega_hat,min_energy,iterations,converged,oracle,theta,ratio_to_theta",
        rows,
    )


def _run_hyperbolic(cfg: RunConfig) -> None:
    variant = "hyperbolic_compact" if cfg.compact else "hyperbolic"
    rows = []
    for x, y in cfg.pair_source.resolve():
        d = hyperbolic_distance(x, y)
        rows.append(
            _csv_row(
                [
                    _quoted(_point_str(x)),
                    _quoted(_point_str(y)),
                    _fmt(d),
                    _fmt(float(hyperbolic_modulus(cfg.params, d, compact=cfg.compact))),
                    variant,
                ]
            )
        )
    _write_csv(cfg.out, "x,y,d_hyp,modulus,variant", rows)


def _run_audit(cfg: RunConfig) -> None:
    report = omega_star.distance_axiom_audit(
        list(cfg.points), cfg.params, cfg.grid, cfg.solver
    )
    rows = [
        _csv_row([entry.check, _fmt(entry.defect), entry.location])
        for entry in report.entries
    ]
    _write_csv(cfg.out, "check,defect,location", rows)


def run(cfg: RunConfig) -> int:
    """Execute the configured command; returns the process exit status."""
    dispatch = {
        "theta": _run_theta,
        "certify": _run_certify,
        "omega": _run_omega,
        "hyperbolic": _run_hyperbolic,
        "audit": _run_audit,
    }
    dispatch[cfg.command](cfg)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="halfmod",
        description="Certify two-point modulus inequalities and estimate the optimal modulus.",
    )
    parser.add_argument("--config", help="path to a key = value config file")
    for key in CONFIG_KEYS:
        parser.add_argument(f"--{key}", dest=f"key_{key}", metavar="VALUE")
    args = parser.parse_args(argv)

    try:
        items: list[tuple[str, str, int]] = []
        if args.config:
            with open(args.config, "r", encoding="utf-8") as fh:
                items = parse_items(fh.read())
        for key in CONFIG_KEYS:
            value = getattr(args, f"key_{key}")
            if value is not None:
                items.append((key, value, 0))  # flags override file values
        cfg = build_config(items)
    except (ConfigError, OSError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    try:
        return run(cfg)
    except Exception as exc:  # propagate module errors with context
        print(f"error: {cfg.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
