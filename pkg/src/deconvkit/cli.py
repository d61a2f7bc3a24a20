"""Command-line entry point: ``deconvkit <command> ...``.

Exit codes: 0 success, 2 input error, 3 missing weights, 4 degenerate
statistics, 5 no feasible design, 6 validation deviation, 7 equivalence failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import random
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, roofline, stats, tracesim
from .errors import (DegenerateSamples, DegenerateVariance, DeconvKitError, MissingWeight,
                     NoFeasibleDesign, ShapeMismatch)
from .fuzz import random_layer, run_equivalence
from .network import (Activation, ChannelAffine, Deconv, FullyConnected, LatentSampler,
                      NetworkSpec, WeightStore, infer, random_weights, sample)
from .quant import FixedPointFormat, quantized_infer
from .shapes import LayerConfig

log = logging.getLogger("deconvkit")

EXIT_OK, EXIT_INPUT, EXIT_WEIGHTS, EXIT_DEGENERATE = 0, 2, 3, 4
EXIT_INFEASIBLE, EXIT_DEVIATION, EXIT_EQUIV = 5, 6, 7

DSE_COLUMNS = ["t_oh", "t_ow", "t_oc", "t_ic", "b_in", "b_w", "b_out", "a_in", "a_w", "a_out",
               "ctc", "cr", "attainable", "dsp_ok", "bram_ok", "bounds_ok"]


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT):
        super().__init__(message)
        self.code = code


@dataclass
class RunManifest:
    command: str
    configs: dict = field(default_factory=dict)
    seed: int | None = None
    outputs: list = field(default_factory=list)
    version: str = __version__

    def write_beside(self, out_path) -> Path:
        path = Path(str(out_path) + ".manifest.json")
        path.write_text(json.dumps(asdict(self), indent=2) + "\n", encoding="utf-8")
        log.info("wrote %s", path)
        return path


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _resolved(*paths) -> dict:
    return {Path(p).name: str(Path(p).resolve()) for p in paths if p is not None}


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise CliError(f"cannot read {path}: {e}") from None


def _load_network(path) -> NetworkSpec:
    try:
        return NetworkSpec.from_dict(_load_json(path))
    except ShapeMismatch as e:
        where = f" (layer {e.layer_index})" if e.layer_index is not None else ""
        raise CliError(f"{path}: shape chain broken{where}: {e}") from None
    except DeconvKitError as e:
        raise CliError(f"{path}: {e}") from None


def _load_weights(path, net: NetworkSpec) -> WeightStore:
    if not Path(path).is_file():
        raise CliError(f"weights file {path} not found", EXIT_WEIGHTS)
    try:
        weights = WeightStore.load(path)
        weights.validate(net)
    except MissingWeight as e:
        raise CliError(f"{path}: missing tensor {e.args[0]}", EXIT_WEIGHTS) from None
    except DeconvKitError as e:
        raise CliError(f"{path}: {e}") from None
    return weights


def read_samples(path) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except (OSError, ValueError) as e:
        raise CliError(f"cannot read samples from {path}: {e}") from None
    return data


def write_samples(path, data: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in np.atleast_2d(data):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _print_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _layer_and_platform(args):
    try:
        layer = LayerConfig.from_dict(_load_json(args.layer))
        platform = roofline.PlatformConfig.from_dict(_load_json(args.platform))
    except DeconvKitError as e:
        raise CliError(str(e)) from None
    return layer, platform


def _mode(text: str) -> str:
    return text.replace("-", "_")


# commands

def cmd_shapes(args) -> int:
    net = _load_network(args.network)
    print(f"{'idx':>3}  {'type':<16}{'in':>16}  {'out':>16}")
    for idx, (layer, (din, dout)) in enumerate(zip(net.layers, net.shape_chain())):
        name = {FullyConnected: "fully_connected", Deconv: "deconv",
                ChannelAffine: "channel_affine", Activation: "activation"}[type(layer)]
        print(f"{idx:>3}  {name:<16}{'x'.join(map(str, din)):>16}  {'x'.join(map(str, dout)):>16}")
    return EXIT_OK


def cmd_init_weights(args) -> int:
    net = _load_network(args.network)
    random_weights(net, seed=args.seed).save(args.out)
    RunManifest("init-weights", _resolved(args.network), args.seed, [args.out]).write_beside(args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    net = _load_network(args.network)
    weights = _load_weights(args.weights, net)
    if args.n < 1:
        raise CliError("--n must be >= 1")
    if args.quant:
        try:
            fmt = FixedPointFormat.parse(args.quant)
        except DeconvKitError as e:
            raise CliError(str(e)) from None
        forward = lambda z: quantized_infer(net, weights, z, fmt)  # noqa: E731
    else:
        forward = lambda z: infer(net, weights, z)  # noqa: E731
    data = sample(net, weights, LatentSampler(net.latent_dim, args.seed), args.n, forward=forward)
    write_samples(args.out, data)
    RunManifest("run", _resolved(args.network, args.weights), args.seed,
                [args.out]).write_beside(args.out)
    return EXIT_OK


def cmd_rmmd(args) -> int:
    X, Y, Z = (read_samples(p) for p in (args.x, args.y, args.z))
    if args.sigma == "auto":
        sigma = None
    else:
        try:
            sigma = float(args.sigma)
        except ValueError:
            raise CliError(f"--sigma must be 'auto' or a number, got {args.sigma!r}") from None
    try:
        res = stats.rmmd_pvalue(X, Y, Z, sigma=sigma, n_bootstrap=args.bootstrap, seed=args.seed)
    except (DegenerateVariance, DegenerateSamples) as e:
        raise CliError(str(e), EXIT_DEGENERATE) from None
    except DeconvKitError as e:
        raise CliError(str(e)) from None
    _print_json(res.to_dict())
    return EXIT_OK


def _parse_bits(text: str) -> list[FixedPointFormat]:
    fmts = []
    for tok in text.split(","):
        tok = tok.strip()
        try:
            fmts.append(FixedPointFormat.parse(tok) if tok.startswith("Q")
                        else FixedPointFormat.default(int(tok)))
        except (ValueError, DeconvKitError) as e:
            raise CliError(f"bad --bits entry {tok!r}: {e}") from None
    return fmts


def _load_costs(path) -> dict[int, tuple[float, float]]:
    raw = _load_json(path)
    try:
        return {int(k): (float(v[0]), float(v[1])) for k, v in raw.items()}
    except (TypeError, ValueError, IndexError, AttributeError):
        raise CliError(f"{path}: expected {{\"<bits>\": [cost, merit], ...}}") from None


def cmd_sweep(args) -> int:
    net = _load_network(args.network)
    weights = _load_weights(args.weights, net)
    training = read_samples(args.training)
    fmts = _parse_bits(args.bits)
    costs = _load_costs(args.cost)
    missing = sorted({f.total_bits for f in fmts} - set(costs))
    if missing:
        raise CliError(f"{args.cost}: no cost entry for bitwidths {missing}")
    try:
        rows = stats.bitwidth_sweep(net, weights, training, fmts, args.n, args.seed, costs,
                                    n_bootstrap=args.bootstrap)
    except DegenerateVariance as e:
        raise CliError(str(e), EXIT_DEGENERATE) from None
    except DeconvKitError as e:
        raise CliError(str(e)) from None
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("bits,frac_bits,p,p_per_cost,p_times_merit\n")
        for r in rows:
            fh.write(f"{r.bits},{r.frac_bits},{_fmt(r.p)},{_fmt(r.p_per_cost)},"
                     f"{_fmt(r.p_times_merit)}\n")
    RunManifest("sweep", _resolved(args.network, args.weights, args.training, args.cost),
                args.seed, [args.out]).write_beside(args.out)
    _print_json({k: asdict(v) for k, v in stats.argmax_rows(rows).items()})
    return EXIT_OK


def _point_row(pt: roofline.DesignPoint) -> list:
    t, b, a = pt.tile, pt.buffers, pt.trips
    return [t.t_oh, t.t_ow, t.t_oc, t.t_ic, b.b_in, b.b_w, b.b_out, a.a_in, a.a_w, a.a_out,
            _fmt(pt.ctc), _fmt(pt.cr), _fmt(pt.attainable), int(pt.flags.dsp_ok),
            int(pt.flags.bram_ok), int(pt.flags.bounds_ok)]


def point_summary(pt: roofline.DesignPoint, platform: roofline.PlatformConfig,
                  in_bytes: bool = False) -> dict:
    d = dict(zip(DSE_COLUMNS, _point_row(pt)))
    for key in ("ctc", "cr", "attainable"):
        d[key] = float(d[key])
    for key in ("dsp_ok", "bram_ok", "bounds_ok"):
        d[key] = bool(d[key])
    if in_bytes:
        d["ctc_per_byte"] = pt.ctc / (platform.bitwidth / 8)
    return d


def cmd_dse(args) -> int:
    layer, platform = _layer_and_platform(args)
    mode = _mode(args.mode)
    points = roofline.enumerate_designs(layer, platform, mode)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DSE_COLUMNS)
        for pt in points:
            w.writerow(_point_row(pt))
    RunManifest("dse", _resolved(args.layer, args.platform), None,
                [args.out]).write_beside(args.out)
    try:
        best = roofline.select_best(points)
    except NoFeasibleDesign as e:
        raise CliError(str(e), EXIT_INFEASIBLE) from None
    _print_json({"mode": mode, "points": len(points),
                 "best": point_summary(best, platform, args.bytes)})
    return EXIT_OK


def cmd_validate(args) -> int:
    layer, platform = _layer_and_platform(args)
    rng = random.Random(args.seed)
    layers = [layer] + [random_layer(rng, max_dim=6, max_channels=6, stride_aligned=False)
                        for _ in range(args.random_layers)]
    reports = []
    for i, lay in enumerate(layers):
        for mode in ("generalized", "paper_exact"):
            reports.append(tracesim.cross_validate(lay, platform, args.samples,
                                                   seed=args.seed + i, mode=mode,
                                                   perturb=args.perturb))
    worst = {m: max(r["max_deviation"] for r in reports if r["mode"] == m)
             for m in ("generalized", "paper_exact")}
    mismatches = sum(r["count_mismatches"] for r in reports)
    ok = max(worst.values()) == 0.0 and mismatches == 0
    _print_json({"layers": len(layers), "tiles_per_layer": args.samples,
                 "max_deviation": worst, "count_mismatches": mismatches, "ok": ok,
                 "reports": reports if args.verbose else [r for r in reports
                                                          if r["max_deviation"] > 0]})
    return EXIT_OK if ok else EXIT_DEVIATION


def cmd_equiv(args) -> int:
    if args.trials < 1:
        raise CliError("--trials must be >= 1")
    report = run_equivalence(args.trials, args.seed, args.max_dim, args.max_channels,
                             indexing=args.indexing)
    _print_json(report)
    if args.out:
        Path(args.out).write_text(json.dumps(report) + "\n", encoding="utf-8")
        RunManifest("equiv", {}, args.seed, [args.out]).write_beside(args.out)
    return EXIT_OK if report["ok"] else EXIT_EQUIV


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="deconvkit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("shapes", help="print per-layer input/output dims")
    p.add_argument("network")
    p.set_defaults(func=cmd_shapes)

    p = sub.add_parser("init-weights", help="write seeded random weights for a network")
    p.add_argument("network")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_init_weights)

    p = sub.add_parser("run", help="generate a sample set")
    p.add_argument("network")
    p.add_argument("weights")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--quant", metavar="Qb.f")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("rmmd", help="relative MMD test of y vs z against reference x")
    p.add_argument("x")
    p.add_argument("y")
    p.add_argument("z")
    p.add_argument("--sigma", default="auto")
    p.add_argument("--bootstrap", type=int, default=stats.DEFAULT_BOOTSTRAP)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_rmmd)

    p = sub.add_parser("sweep", help="score fixed-point bitwidths by RMMD")
    p.add_argument("network")
    p.add_argument("weights")
    p.add_argument("training")
    p.add_argument("--bits", default="6,8,10,12,14,16",
                   help="comma list of bitwidths (default split) or Qb.f formats")
    p.add_argument("--cost", required=True, help='JSON {"<bits>": [cost, merit]}')
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bootstrap", type=int, default=stats.DEFAULT_BOOTSTRAP)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dse", help="roofline design-space exploration for one layer")
    p.add_argument("layer")
    p.add_argument("platform")
    p.add_argument("--mode", choices=["paper-exact", "generalized"], default="generalized")
    p.add_argument("--bytes", action="store_true", help="also report ctc in ops per byte")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_dse)

    p = sub.add_parser("validate", help="check analytic roofline terms against the trace simulator")
    p.add_argument("layer")
    p.add_argument("platform")
    p.add_argument("--samples", type=int, default=20, help="random tiles per layer and mode")
    p.add_argument("--random-layers", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("equiv", help="fuzz the tiled gather against the scatter reference")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-dim", type=int, default=8)
    p.add_argument("--max-channels", type=int, default=4)
    p.add_argument("--out")
    p.add_argument("--indexing", default="output-space", choices=["output-space", "untrimmed"],
                   help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_equiv)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
