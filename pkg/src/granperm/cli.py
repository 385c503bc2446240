"""Batch command line: ingest, synth, run, rules, predict.

Exit codes: 0 success, 1 usage or configuration error, 2 data validation
error, 3 no feasible candidate (the box is still written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, core_data, nfis, pipeline, rst, som
from .errors import (DimensionMismatch, EmptyInput, GranpermError, MissingColumn, NoFeasibleCandidate,
                     RowParseError)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3
MODEL_FORMAT = "granperm.model/1"

log = logging.getLogger("granperm")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- helpers -----------------------------------------------------------------

def _read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise UsageError(f"cannot read {path}: {err.strerror}") from None


def _prepare_out(out: Path, force: bool):
    if out.exists() and any(out.iterdir()) and not force:
        raise UsageError(f"output directory {out} is not empty (use --force to overwrite)")
    out.mkdir(parents=True, exist_ok=True)


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out: Path, config_path, inputs, seed, extra=None):
    manifest = {
        "config_path": str(config_path) if config_path else None,
        "input_paths": [str(p) for p in inputs],
        "input_sha256": {str(p): _sha256(p) for p in inputs},
        "output_dir": str(out),
        "seed": seed,
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _load_config(path):
    try:
        cfg, base = core_data._read_toml(path)
    except OSError as err:
        raise UsageError(f"cannot read config {path}: {err.strerror}") from None
    except Exception as err:  # TOML syntax errors carry line/column
        raise UsageError(f"{path}: {err}") from None
    return cfg, base


def model_to_dict(cand: pipeline.CandidateModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "rulebase": nfis.rulebase_to_dict(cand.rulebase),
        "error_level": cand.error_level,
        "n_rules": cand.n_rules,
        "som": {"rows": cand.som.rows, "cols": cand.som.cols},
        "radius": cand.radius,
        "init": cand.init_index,
        "iteration": cand.iteration,
    }


def load_model(path) -> nfis.TskRuleBase:
    """Read a selected-model file or a bare rule-base file."""
    try:
        d = json.loads(_read_text(path))
        return nfis.rulebase_from_dict(d["rulebase"] if "rulebase" in d else d)
    except (KeyError, TypeError, ValueError) as err:
        raise UsageError(f"malformed model file {path}: {err}") from None


# -- ingest ------------------------------------------------------------------

def cmd_ingest(args):
    text = _read_text(args.csv)
    try:
        report = core_data.scan_borehole_csv(text)
    except (MissingColumn, EmptyInput) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA
    lines = [f"{len(report.records)} accepted", f"{len(report.rejected)} rejected"]
    lines += [f"  {err}" for err in report.rejected]
    if report.extra_columns:
        lines.append(f"ignored columns: {', '.join(report.extra_columns)}")
    summary = "\n".join(lines) + "\n"
    sys.stdout.write(summary)
    if report.rejected and not args.allow_partial:
        return EXIT_DATA
    if args.out:
        out = Path(args.out)
        if out.exists() and not args.force:
            raise UsageError(f"{out} exists (use --force to overwrite)")
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(core_data.format_borehole_csv(report.records), encoding="utf-8")
        out.with_name(out.name + ".report.txt").write_text(summary, encoding="utf-8")
    return EXIT_OK


# -- synth -------------------------------------------------------------------

def _default_synth():
    return core_data.SyntheticSpec(nfis.published_rulebase(), 789, 0.5, core_data.fixture_input_ranges(), 0)


def cmd_synth(args):
    if args.config:
        _load_config(args.config)
        try:
            spec = core_data.load_synthetic_spec(args.config)
        except (KeyError, ValueError) as err:
            raise UsageError(f"{args.config}: bad synthetic spec field: {err}") from None
    else:
        spec = _default_synth()
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    data = core_data.generate_synthetic(spec)
    text = core_data.format_dataset_csv(data)
    if args.out:
        out = Path(args.out)
        if out.exists() and not args.force:
            raise UsageError(f"{out} exists (use --force to overwrite)")
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- run ---------------------------------------------------------------------

def _grid_specs(cfg):
    specs = []
    for k, g in enumerate(cfg.get("grid", [])):
        try:
            axes = tuple(pipeline.GridAxis(str(a[0]), float(a[1]), float(a[2]), int(a[3])) for a in g["axes"])
            specs.append((g.get("name", f"grid{k + 1}"), pipeline.GridSpec(axes, dict(g.get("fixed", {})))))
        except (KeyError, IndexError, TypeError, ValueError) as err:
            raise UsageError(f"grid[{k}]: {err}") from None
    return specs


def cmd_run(args):
    cfg, base = _load_config(args.config)
    if "data" not in cfg:
        raise UsageError(f"{args.config}: missing field 'data'")
    data_path = core_data._resolve(base, cfg["data"])
    mode = args.mode or cfg.get("mode", "both")
    if mode not in ("nfis", "rst", "both"):
        raise UsageError(f"{args.config}: field 'mode' must be nfis, rst or both")
    features = tuple(cfg.get("features", core_data.DEFAULT_FEATURES))
    target = cfg.get("target", core_data.DEFAULT_TARGET)
    try:
        pcfg = pipeline.PipelineConfig.from_mapping(cfg.get("pipeline", {}))
    except (TypeError, ValueError) as err:
        raise UsageError(f"{args.config}: [pipeline]: {err}") from None
    if args.seed is not None:
        pcfg = replace(pcfg, seed=args.seed, split=replace(pcfg.split, seed=args.seed))
    levels = int(cfg.get("rst", {}).get("levels", 5))
    grids = _grid_specs(cfg)
    out_arg = args.out or cfg.get("out")
    if not out_arg:
        raise UsageError("no output directory (use --out or set 'out' in the config)")
    out = Path(out_arg) if args.out else core_data._resolve(base, out_arg)

    try:
        data = core_data.parse_borehole_csv(_read_text(data_path), features, target)
    except (MissingColumn, RowParseError, EmptyInput) as err:
        print(f"error: {data_path}: {err}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as err:
        raise UsageError(f"{args.config}: {err}") from None

    _prepare_out(out, args.force)
    _write_manifest(out, args.config, [args.config, data_path], pcfg.seed, {"mode": mode})
    rules_text = []

    if mode in ("nfis", "both"):
        try:
            best, box = pipeline.run_close_open(data, pcfg)
        except NoFeasibleCandidate as err:
            (out / "box.csv").write_text(pipeline.format_box_csv(err.box), encoding="utf-8")
            print(f"error: {err}", file=sys.stderr)
            return EXIT_INFEASIBLE
        (out / "box.csv").write_text(pipeline.format_box_csv(box, best), encoding="utf-8")
        (out / "selected_model.json").write_text(json.dumps(model_to_dict(best), indent=2) + "\n",
                                                 encoding="utf-8")
        (out / "codebook.csv").write_text(som.format_codebook_csv(best.som), encoding="utf-8")
        rules_text.append("# TSK rules (selected model)\n" + nfis.format_rules(best.rulebase))
        for name, spec in grids:
            try:
                grid = pipeline.predict_grid(best, spec)
            except DimensionMismatch as err:
                raise UsageError(f"grid {name!r}: {err}") from None
            (out / f"grid_{name}.csv").write_text(grid.to_csv(), encoding="utf-8")
        print(f"selected: {best.n_rules} rules, error level {best.error_level:.4g} "
              f"({len(box)} candidates)")

    if mode in ("rst", "both"):
        res = pipeline.run_rst_branch(data, levels, seed=pcfg.seed)
        (out / "decision_table.csv").write_text(rst.format_table_csv(res.table), encoding="utf-8")
        red = "\n".join("{" + ", ".join(a for a in res.table.attributes if a in r) + "}"
                        for r in res.reducts)
        rules_text.append(f"# Rough-set rules over {{{', '.join(res.attributes)}}}\n"
                          f"# reducts:\n" + "".join(f"#   {line}\n" for line in red.splitlines())
                          + rst.format_rules(res.rules, target))
        print(f"rough sets: {len(res.rules)} rules over {', '.join(res.attributes) or 'no attributes'}")

    (out / "rules.txt").write_text("\n".join(rules_text), encoding="utf-8")
    return EXIT_OK


# -- rules -------------------------------------------------------------------

def cmd_rules(args):
    text = nfis.format_rules(load_model(args.model))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- predict -----------------------------------------------------------------

def _parse_axis(s):
    parts = s.split(":")
    if len(parts) != 4:
        raise UsageError(f"axis {s!r}: expected name:lo:hi:num")
    try:
        return pipeline.GridAxis(parts[0], float(parts[1]), float(parts[2]), int(parts[3]))
    except ValueError as err:
        raise UsageError(f"axis {s!r}: {err}") from None


def _parse_fixed(items):
    fixed = {}
    for s in items or ():
        name, sep, val = s.partition("=")
        if not sep:
            raise UsageError(f"fixed value {s!r}: expected name=value")
        try:
            fixed[name] = float(val)
        except ValueError:
            raise UsageError(f"fixed value {s!r}: not a number") from None
    return fixed


def cmd_predict(args):
    rb = load_model(args.model)
    if not args.axis or len(args.axis) != 2:
        raise UsageError("exactly two --axis options are required")
    spec = pipeline.GridSpec(tuple(_parse_axis(a) for a in args.axis), _parse_fixed(args.fixed))
    try:
        grid = pipeline.predict_grid(rb, spec)
    except DimensionMismatch as err:
        raise UsageError(str(err)) from None
    text = grid.to_csv()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.svg:
        from .plot import grid_svg

        Path(args.svg).write_text(grid_svg(grid), encoding="utf-8")
    return EXIT_OK


# -- entry point -------------------------------------------------------------

def build_parser():
    p = _Parser(prog="granperm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"granperm {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("ingest", help="validate a borehole CSV")
    s.add_argument("csv")
    s.add_argument("--out", help="write the validated dataset here")
    s.add_argument("--allow-partial", action="store_true", help="drop bad rows instead of failing")
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("synth", help="generate a synthetic borehole dataset")
    s.add_argument("--config", help="synthetic spec (TOML); default is the bundled rule fixture")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("run", help="close-open granulation and/or rough-set rules")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--mode", choices=("nfis", "rst", "both"))
    s.add_argument("--force", action="store_true")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("rules", help="print the if-then rules of a model file")
    s.add_argument("model")
    s.add_argument("--out")
    s.set_defaults(func=cmd_rules)

    s = sub.add_parser("predict", help="evaluate a model on a 2D grid")
    s.add_argument("model")
    s.add_argument("--axis", action="append", help="name:lo:hi:num (give twice)")
    s.add_argument("--fixed", action="append", help="name=value for every other input")
    s.add_argument("--out")
    s.add_argument("--svg", help="also write a heat map")
    s.set_defaults(func=cmd_predict)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except GranpermError as err:
        # Remaining library errors stem from the data (degenerate features and the like).
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
