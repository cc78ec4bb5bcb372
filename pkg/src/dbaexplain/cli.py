"""Command-line entry point: ``dbaexplain <subcommand> ...``.

Every file written embeds the resolved run configuration (including the
seed), so a run can be repeated from its outputs alone.  Precedence is
flags > ``--config`` file > built-in defaults.  Outputs go to ``--out``,
else ``output_dir`` from the config, else ``$DBAEXPLAIN_OUTPUT_DIR``, else
``./dbaexplain-output``.

Exit codes: 0 success, 1 a method failed on some point, 2 invalid usage or
configuration, 3 refusing to overwrite existing output.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Sequence

import jsonschema

from . import __version__
from .config import ConfigError, load_config_file, load_schema, resolve_config
from .core import DatasetError, Dataset, jsonable, write_dataset
from .datagen import AIRIS_FEATURES, AIRIS_RANGES, gen_airis_tab, gen_moons
from .pipeline import METHODS, POINT_ERRORS, build_run, curves, evaluate_run, explain_point, stability, sweep_radius

logger = logging.getLogger("dbaexplain")

OUTPUT_ENV = "DBAEXPLAIN_OUTPUT_DIR"
DEFAULT_OUTPUT = "dbaexplain-output"

EXIT_OK, EXIT_FAILURE, EXIT_USAGE, EXIT_EXISTS = 0, 1, 2, 3


class OutputExists(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _output_dir(args, config: dict[str, Any] | None = None) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if config and config.get("output_dir"):
        return Path(config["output_dir"])
    return Path(os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def _check_free(paths: Sequence[Path], force: bool) -> None:
    existing = [str(p) for p in paths if p.exists()]
    if existing and not force:
        raise OutputExists(f"refusing to overwrite {', '.join(existing)} (use --force)")


def _dump(obj: Any) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _echo_config(config: dict[str, Any]) -> dict[str, Any]:
    # the output location is not part of what was computed
    return {**config, "output_dir": None}


def _overrides(args) -> dict[str, Any]:
    """Translate flags into a config layer; unset flags are omitted."""
    o: dict[str, Any] = {}
    if getattr(args, "seed", None) is not None:
        o["seed"] = args.seed
    if getattr(args, "jobs", None) is not None:
        o["jobs"] = args.jobs
    if getattr(args, "methods", None):
        o["methods"] = list(dict.fromkeys(args.methods))
    if getattr(args, "dataset", None):
        ds: dict[str, Any] = {"kind": args.dataset}
        if args.dataset == "csv":
            if not args.train:
                raise ConfigError("--dataset csv needs --train")
            ds["train"] = args.train
            if args.test:
                ds["test"] = args.test
        o["dataset"] = ds
    elif getattr(args, "train", None):
        o["dataset"] = {"kind": "csv", "train": args.train, **({"test": args.test} if args.test else {})}
    if getattr(args, "classifier", None):
        clf: dict[str, Any] = {"kind": args.classifier}
        if args.bandwidth is not None:
            clf["bandwidth"] = args.bandwidth
        if args.scores:
            clf["path"] = args.scores
        if args.command:
            clf["command"] = args.command
        o["classifier"] = clf
    if getattr(args, "no_standardize", False):
        o["standardize"] = False
    dba = {key: getattr(args, attr) for key, attr in (("k", "k"), ("m", "m")) if getattr(args, attr, None)}
    if getattr(args, "r_grid", None):
        grid = args.r_grid
        dba["r_grid"] = grid if grid in ("default", "moons") else [float(v) for v in grid.split(",")]
    if dba:
        o["dba"] = dba
    if getattr(args, "lime_m", None):
        o["lime"] = {"m": args.lime_m}
    ev: dict[str, Any] = {}
    if getattr(args, "points", None):
        ev["points"] = args.points
    if getattr(args, "index", None):
        ev["indices"] = args.index
    if getattr(args, "label_stable_only", False):
        ev["label_stable_only"] = True
    if getattr(args, "curve_step", None):
        ev["curve_step"] = args.curve_step
    if ev:
        o["evaluation"] = ev
    if getattr(args, "codec", None):
        codec: dict[str, Any] = {"kind": args.codec}
        if args.codec == "affine" and args.components:
            codec["n_components"] = args.components
        if args.codec == "subprocess":
            if not args.codec_command:
                raise ConfigError("--codec subprocess needs --codec-command")
            codec["command"] = args.codec_command
        o["codec"] = codec
    return o


def _config(args) -> dict[str, Any]:
    base = load_config_file(args.config) if getattr(args, "config", None) else None
    return resolve_config(base, _overrides(args))


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------


def _write_generated(data: Dataset, args, sidecar: dict[str, Any], default_name: str) -> int:
    path = Path(args.out_file) if args.out_file else _output_dir(args) / default_name
    meta = path.with_suffix(path.suffix + ".json")
    _check_free([path, meta], args.force)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_dataset(data, path)
    sidecar = {
        **sidecar,
        "n": data.n,
        "features": list(data.feature_names),
        "class_balance": float((data.labels == 1).mean()),
        "label_mapping": data.label_mapping,
        "file": path.name,
        "version": __version__,
    }
    _write_text(meta, _dump(sidecar))
    print(path)
    return EXIT_OK


def cmd_gen_moons(args) -> int:
    data = gen_moons(args.n, args.noise, args.seed)
    sidecar = {"generator": "moons", "seed": args.seed, "noise": args.noise}
    return _write_generated(data, args, sidecar, f"moons_n{args.n}_seed{args.seed}.csv")


def cmd_gen_airis_tab(args) -> int:
    data = gen_airis_tab(args.n, args.seed, args.stream)
    sidecar = {
        "generator": "airis-tab",
        "seed": args.seed,
        "stream": args.stream,
        "ranges": {name: list(r) for name, r in zip(AIRIS_FEATURES, AIRIS_RANGES.tolist())},
        "attributes": list(data.attribute_names),
    }
    return _write_generated(data, args, sidecar, f"airis_{args.stream}_n{args.n}_seed{args.seed}.csv")


# ---------------------------------------------------------------------------
# explain / evaluate / sweep / stability
# ---------------------------------------------------------------------------


def cmd_explain(args) -> int:
    config = _config(args)
    method = args.method
    run = build_run(config)
    try:
        indices = run.select_points()
        out_dir = _output_dir(args, config)
        paths = [out_dir / f"explain_{method}_{i}.json" for i in indices]
        _check_free(paths, args.force)
        status = EXIT_OK
        for i, path in zip(indices, paths):
            try:
                expl = explain_point(run, method, i)
            except POINT_ERRORS as exc:
                logger.error("test point %d: %s: %s", i, type(exc).__name__, exc)
                status = EXIT_FAILURE
                continue
            doc = {"config": _echo_config(config), "test_index": i, "explanation": expl.to_dict()}
            _write_text(path, _dump(doc))
            print(path)
        return status
    finally:
        run.close()


def cmd_evaluate(args) -> int:
    config = _config(args)
    run = build_run(config)
    try:
        out_dir = _output_dir(args, config)
        report_path, table_path = out_dir / "report.json", out_dir / "table.csv"
        _check_free([report_path, table_path], args.force)
        report = evaluate_run(run)
        report.config = _echo_config(report.config)
        doc = json.loads(report.to_json())
        jsonschema.validate(doc, load_schema("report"))
        _write_text(report_path, report.to_json() + "\n")
        _write_text(table_path, report.to_table())
        print(report_path)
        print(table_path)
        if args.curves:
            seed = config["seed"]
            for (index, method), arr in curves(run, report).items():
                path = out_dir / "curves" / f"{method}_{index}.csv"
                _check_free([path], args.force)
                path.parent.mkdir(parents=True, exist_ok=True)
                with path.open("w", newline="", encoding="utf-8") as fh:
                    fh.write(f"# method={method} test_index={index} seed={seed}\n")
                    writer = csv.writer(fh, lineterminator="\n")
                    writer.writerow(["t", "probability"])
                    writer.writerows([repr(float(t)), repr(float(p))] for t, p in arr)
        errors = sum(agg["n_errors"] for agg in report.aggregate().values())
        return EXIT_FAILURE if errors else EXIT_OK
    finally:
        run.close()


def cmd_sweep_r(args) -> int:
    config = _config(args)
    run = build_run(config)
    try:
        indices = run.select_points()
        out_dir = _output_dir(args, config)
        paths = [out_dir / f"sweep_r_{i}.json" for i in indices]
        _check_free(paths, args.force)
        for i, path in zip(indices, paths):
            rows = sweep_radius(run, i)
            doc = {"config": _echo_config(config), "test_index": i, "rows": rows}
            _write_text(path, _dump(doc))
            print(path)
        return EXIT_OK
    finally:
        run.close()


def cmd_stability(args) -> int:
    config = _config(args)
    run = build_run(config)
    try:
        out_dir = _output_dir(args, config)
        path = out_dir / f"stability_{args.set}.json"
        _check_free([path], args.force)
        doc = {"config": _echo_config(config), **stability(run, args.set)}
        _write_text(path, _dump(doc))
        print(path)
        return EXIT_OK
    finally:
        run.close()


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, with_points: bool = True) -> None:
    p.add_argument("--config", help="JSON run config (flags override it)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    g = p.add_argument_group("data and model")
    g.add_argument("--dataset", choices=["airis-tab", "moons", "csv"])
    g.add_argument("--train", help="training CSV (implies --dataset csv)")
    g.add_argument("--test", help="test CSV; defaults to the training CSV")
    g.add_argument("--classifier", choices=["ground-truth", "kernel-smoother", "knn", "linear",
                                            "scored-csv", "subprocess"])
    g.add_argument("--bandwidth", type=float, help="kernel-smoother bandwidth")
    g.add_argument("--scores", help="scored-csv file with a 'p' column")
    g.add_argument("--command", nargs="+", help="scoring process command line")
    g.add_argument("--no-standardize", action="store_true")
    g.add_argument("--codec", choices=["identity", "affine", "subprocess"])
    g.add_argument("--components", type=int, help="latent size for --codec affine")
    g.add_argument("--codec-command", nargs="+")
    g = p.add_argument_group("method parameters")
    g.add_argument("--k", type=int, help="opposite-class neighbours")
    g.add_argument("--m", type=int, help="DBA sample size")
    g.add_argument("--r-grid", help="a named grid (default or moons) or comma-separated radii")
    g.add_argument("--lime-m", type=int, help="LIME sample size")
    if with_points:
        g = p.add_argument_group("test points")
        g.add_argument("--points", type=int, help="number of random test points")
        g.add_argument("--index", type=int, nargs="+", help="explicit test-set indices")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dbaexplain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command_name", required=True)

    p = sub.add_parser("gen-moons", help="write a moons dataset")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output directory")
    p.add_argument("--out-file", help="exact CSV path")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_gen_moons)

    p = sub.add_parser("gen-airis-tab", help="write a tabular AIris dataset")
    p.add_argument("--n", type=int, default=4000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", default="train", help="named random stream, e.g. train or test")
    p.add_argument("--out", help="output directory")
    p.add_argument("--out-file", help="exact CSV path")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_gen_airis_tab)

    p = sub.add_parser("explain", help="explain test points, one JSON each")
    p.add_argument("--method", required=True, choices=METHODS)
    _common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="evaluate methods on test points and write a report")
    p.add_argument("--methods", nargs="+", choices=METHODS)
    p.add_argument("--jobs", type=int)
    p.add_argument("--label-stable-only", action="store_true",
                   help="admit only points whose label survives the codec round trip")
    p.add_argument("--curves", action="store_true", help="write probability-along-direction CSVs")
    p.add_argument("--curve-step", type=float)
    _common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-r", help="per-radius DBA-Tab statistics")
    _common(p)
    p.set_defaults(func=cmd_sweep_r)

    p = sub.add_parser("stability", help="codec label and probability stability")
    p.add_argument("--set", choices=["train", "test"], default="test")
    _common(p, with_points=False)
    p.set_defaults(func=cmd_stability)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, DatasetError) as exc:
        print(f"dbaexplain: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except jsonschema.ValidationError as exc:
        print(f"dbaexplain: error: report failed schema validation: {exc.message}", file=sys.stderr)
        return EXIT_FAILURE
    except OutputExists as exc:
        print(f"dbaexplain: error: {exc}", file=sys.stderr)
        return EXIT_EXISTS


if __name__ == "__main__":
    sys.exit(main())
