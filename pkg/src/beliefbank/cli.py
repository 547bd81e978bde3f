"""Command-line entry point: ``beliefbank <command> [options]``.

Every option can also come from a JSON config file (``--config-file``); flags win.
Config file sections and keys:

  generator    n_concepts, n_entities, n_dev_entities, properties_per_concept,
               shared_property_rate, n_roots, max_children, mutex_siblings,
               forward_weight [lo, hi], backward_weight [lo, hi], seed
  oracle       kind ("synthetic" | "remote"), url, timeout, max_retries, backoff,
               tpr, tnr, target_precision, p_follow, correct_confidence [a, b],
               wrong_confidence [a, b]
  experiment   configurations [names], n_batches, k, seed, w_forward, w_backward
  solver       lam, exact_threshold, max_flips, restarts, noise, stall, seed
  grid         w_forward [..], w_backward [..], lam [..]
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from . import __version__
from .beliefs import BeliefBank, FormatError
from .constraints import consistency, ground_all, violated_constraints
from .datagen import (CONSTRAINTS_FILE, DEV_FACTS_FILE, FACTS_FILE, TEMPLATES_FILE, Dataset,
                      GeneratorConfig, generate, load_dir)
from .harness import (DEFAULT_GRID, BankSolver, CalibrationResult, Configuration, ExperimentAborted,
                      ExperimentConfig, calibrate, correct, read_csv, report, reweight, run,
                      text_table)
from .maxsat import SolverConfig, UnsatisfiableHardClauses, apply, diff, encode, export_wcnf
from .oracle import OracleUnavailable, RemoteOracle, SyntheticOracle, SyntheticOracleConfig

log = logging.getLogger("beliefbank")

ORACLE_URL_ENV = "BELIEFBANK_ORACLE_URL"
CONFIG_SECTIONS = {
    "generator": {f.name for f in fields(GeneratorConfig)},
    "oracle": {"kind", "url", "timeout", "max_retries", "backoff"}
              | {f.name for f in fields(SyntheticOracleConfig)} - {"seed"},
    "experiment": {"configurations", "n_batches", "k", "seed", "w_forward", "w_backward"},
    "solver": {f.name for f in fields(SolverConfig)},
    "grid": set(DEFAULT_GRID),
}
DATA_FILES = (TEMPLATES_FILE, CONSTRAINTS_FILE, FACTS_FILE, DEV_FACTS_FILE)


class CliError(Exception):
    """A user-facing failure; the message is printed as a one-line diagnostic."""


# ---------------------------------------------------------------- config + manifest

def load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        conf = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"--config-file: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CliError(f"--config-file: {path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(conf, dict):
        raise CliError(f"--config-file: {path}: top level must be an object")
    for section, body in conf.items():
        if section not in CONFIG_SECTIONS:
            raise CliError(f"--config-file: unknown section {section!r}")
        if not isinstance(body, dict):
            raise CliError(f"--config-file: section {section!r} must be an object")
        unknown = set(body) - CONFIG_SECTIONS[section]
        if unknown:
            raise CliError(f"--config-file: unknown key {section}.{sorted(unknown)[0]}")
    return conf


def _pick(flag, conf: dict, section: str, key: str, default=None):
    if flag is not None:
        return flag
    return conf.get(section, {}).get(key, default)


def _tuples(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}


def dataset_checksums(directory) -> dict[str, str]:
    out = {}
    for name in DATA_FILES:
        path = Path(directory) / name
        if path.exists():
            out[name] = hashlib.sha256(path.read_bytes()).hexdigest()
    return out


@dataclass
class RunManifest:
    """Everything needed to repeat a run: resolved settings, data checksums, seeds."""

    artifact_version: str
    dataset: str
    dataset_sha256: dict
    seed: int
    configurations: list
    experiment: dict
    solver: dict
    oracle: dict
    calibration: dict | None = None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            rec = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(**rec)
        except OSError as exc:
            raise CliError(f"--manifest: cannot read {path}: {exc.strerror}") from None
        except (json.JSONDecodeError, TypeError) as exc:
            raise CliError(f"--manifest: {path} is not a run manifest: {exc}") from None


# ---------------------------------------------------------------- shared helpers

def _load_data(path, flag="--data") -> Dataset:
    if path is None:
        raise CliError(f"{flag} is required")
    if not Path(path).is_dir():
        raise CliError(f"{flag}: {path} is not a directory")
    return load_dir(path)


def _load_bank(path, dataset: Dataset | None = None) -> BeliefBank:
    if path is None:
        raise CliError("--bank is required")
    if not Path(path).exists():
        raise CliError(f"--bank: {path} does not exist")
    return BeliefBank.load(path, dataset.templates if dataset else None)


def _oracle_settings(args, conf: dict) -> dict:
    section = conf.get("oracle", {})
    kind = args.oracle or section.get("kind", "synthetic")
    if kind == "remote":
        url = args.oracle_url or section.get("url") or os.environ.get(ORACLE_URL_ENV)
        if not url:
            raise CliError(f"--oracle remote needs --oracle-url or ${ORACLE_URL_ENV}")
        return {"kind": "remote", "url": url,
                "timeout": section.get("timeout", 10.0),
                "max_retries": section.get("max_retries", 3),
                "backoff": section.get("backoff", 0.5)}
    if kind != "synthetic":
        raise CliError(f"--oracle: unknown kind {kind!r}")
    synth = {k: v for k, v in section.items() if k in {f.name for f in fields(SyntheticOracleConfig)}}
    if args.p_follow is not None:
        synth["p_follow"] = args.p_follow
    return {"kind": "synthetic", **synth}


def build_oracle(settings: dict, dataset: Dataset, seed: int):
    settings = dict(settings)
    kind = settings.pop("kind")
    if kind == "remote":
        return RemoteOracle(settings["url"], dataset.templates, timeout=settings["timeout"],
                            max_retries=settings["max_retries"], backoff=settings["backoff"])
    cfg = SyntheticOracleConfig(**{**_tuples(settings), "seed": seed})
    return SyntheticOracle(dataset.gold, dataset.templates,
                           dataset.grounds(dataset.entities + dataset.dev_entities), cfg)


def _resolved_oracle(settings: dict, oracle) -> dict:
    if settings["kind"] == "synthetic":
        cfg = asdict(oracle.config)
        cfg.pop("seed")
        return {"kind": "synthetic", **cfg}
    return settings


def _solver_config(args, conf: dict) -> SolverConfig:
    base = _tuples(conf.get("solver", {}))
    if getattr(args, "lam", None) is not None:
        base["lam"] = args.lam
    return SolverConfig(**base)


def _grid(conf: dict) -> dict:
    grid = dict(DEFAULT_GRID)
    grid.update({k: tuple(v) for k, v in conf.get("grid", {}).items()})
    return grid


def _calibration_record(cal: CalibrationResult) -> dict:
    return {"w_forward": cal.w_forward, "w_backward": cal.w_backward, "lam": cal.lam,
            "dev_f1": cal.dev_f1}


def _answered_grounds(dataset: Dataset, bank: BeliefBank, w_forward=None, w_backward=None):
    constraints = reweight(dataset.constraints, w_forward, w_backward)
    entities = sorted(bank.entities())
    held = set(bank.beliefs)
    return [g for g in ground_all(constraints, entities, dataset.templates)
            if held.issuperset(g.keys())]


# ---------------------------------------------------------------- commands

def cmd_datagen(args, conf) -> int:
    base = _tuples(conf.get("generator", {}))
    for name in ("seed", "n_concepts", "n_entities", "n_dev_entities", "properties_per_concept"):
        value = getattr(args, name)
        if value is not None:
            base[name] = value
    data = generate(GeneratorConfig(**base))
    if args.out is None:
        raise CliError("--out is required")
    paths = data.save(args.out)
    print(f"wrote {len(data.facts)} facts about {len(data.entities)} entities, "
          f"{len(data.dev_facts)} dev facts, {len(data.constraints)} constraints "
          f"(positive rate {data.positive_rate():.3f}) to {Path(args.out)}")
    for name, path in paths.items():
        log.debug("%s -> %s", name, path)
    return 0


def cmd_calibrate(args, conf) -> int:
    data = _load_data(args.data)
    seed = _pick(args.seed, conf, "experiment", "seed", 0)
    oracle = build_oracle(_oracle_settings(args, conf), data, seed)
    cal = calibrate(data, oracle, _grid(conf), _solver_config(args, conf))
    rec = {**_calibration_record(cal),
           "grid": [dict(zip(("w_forward", "w_backward", "lam", "f1"), g)) for g in cal.grid]}
    print(f"best w_forward={cal.w_forward} w_backward={cal.w_backward} lam={cal.lam} "
          f"dev F1={100 * cal.dev_f1:.1f}")
    if args.out:
        Path(args.out).write_text(json.dumps(rec, indent=2) + "\n", encoding="utf-8")
    return 0


def _configurations(names) -> list[Configuration]:
    if not names or names == ["all"]:
        return list(Configuration)
    out = []
    for name in names:
        try:
            out.append(Configuration(name))
        except ValueError:
            valid = ", ".join(c.value for c in Configuration)
            raise CliError(f"--config: unknown configuration {name!r} (choose from {valid}, all)") from None
    return out


def _manifest_from_args(args, conf) -> tuple[RunManifest, Dataset, object]:
    data = _load_data(args.data)
    seed = _pick(args.seed, conf, "experiment", "seed", 0)
    settings = _oracle_settings(args, conf)
    oracle = build_oracle(settings, data, seed)
    solver = _solver_config(args, conf)
    wf = _pick(args.w_forward, conf, "experiment", "w_forward")
    wb = _pick(args.w_backward, conf, "experiment", "w_backward")
    calibration = None
    if args.calibration:
        try:
            calibration = json.loads(Path(args.calibration).read_text(encoding="utf-8"))
            calibration = {k: calibration[k] for k in ("w_forward", "w_backward", "lam", "dev_f1")}
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise CliError(f"--calibration: cannot use {args.calibration}: {exc}") from None
    elif not args.no_calibrate and data.dev_entities and None in (wf, wb, args.lam):
        calibration = _calibration_record(calibrate(data, oracle, _grid(conf), solver))
    if calibration is not None:
        wf = calibration["w_forward"] if wf is None else wf
        wb = calibration["w_backward"] if wb is None else wb
        if args.lam is None:
            solver = replace(solver, lam=calibration["lam"])
    names = args.config or conf.get("experiment", {}).get("configurations")
    experiment = {"n_batches": _pick(args.n_batches, conf, "experiment", "n_batches", 10),
                  "k": _pick(args.k, conf, "experiment", "k", 3),
                  "w_forward": wf, "w_backward": wb}
    manifest = RunManifest(__version__, str(Path(args.data)), dataset_checksums(args.data), seed,
                           [c.value for c in _configurations(names)], experiment, asdict(solver),
                           _resolved_oracle(settings, oracle), calibration)
    return manifest, data, oracle


def _manifest_from_file(args) -> tuple[RunManifest, Dataset, object]:
    m = RunManifest.load(args.manifest)
    path = args.data or m.dataset
    data = _load_data(path, "--data (from manifest)")
    sums = dataset_checksums(path)
    if sums != m.dataset_sha256:
        changed = sorted(k for k in set(sums) | set(m.dataset_sha256)
                         if sums.get(k) != m.dataset_sha256.get(k))
        raise CliError(f"--manifest: dataset {path} differs from the manifest ({', '.join(changed)})")
    oracle = build_oracle(m.oracle, data, m.seed)
    return m, data, oracle


def execute(m: RunManifest, data: Dataset, oracle, banks_dir=None, reports: list | None = None) -> list:
    """Run every configuration in the manifest, appending batch reports to ``reports``."""
    solver = SolverConfig(**_tuples(m.solver))
    reports = [] if reports is None else reports
    for name in m.configurations:
        cfg = ExperimentConfig(Configuration(name), n_batches=m.experiment["n_batches"],
                               shuffle_seed=m.seed, feedback_seed=m.seed, k=m.experiment["k"],
                               solver=solver, w_forward=m.experiment["w_forward"],
                               w_backward=m.experiment["w_backward"])
        sink = None
        if banks_dir is not None:
            Path(banks_dir).mkdir(parents=True, exist_ok=True)
            sink = lambda bank, name=name: bank.save(Path(banks_dir) / f"{name}.jsonl")
        try:
            reports.extend(run(cfg, data, oracle, final_bank=sink))
        except ExperimentAborted as exc:
            reports.extend(exc.reports)
            raise
        last = reports[-1]
        print(f"{name:38s} F1 {100 * last.f1_true:5.1f}  consistency {100 * last.consistency:5.1f}")
    return reports


def cmd_run(args, conf) -> int:
    if args.manifest:
        m, data, oracle = _manifest_from_file(args)
    else:
        if args.data is None:
            raise CliError("run: --data is required (or pass --manifest)")
        m, data, oracle = _manifest_from_args(args, conf)
    reports: list = []
    try:
        execute(m, data, oracle, args.save_banks, reports)
    finally:
        # partial results are flushed even when the oracle gives up mid-run
        paths = report(reports, args.out)
        manifest_path = paths["csv"].with_suffix(".manifest.json")
        m.save(manifest_path)
    print(f"wrote {paths['csv']}, {paths['txt']} and {manifest_path}")
    return 0


def cmd_solve(args, conf) -> int:
    data = _load_data(args.data)
    bank = _load_bank(args.bank, data)
    cfg = _solver_config(args, conf)
    grounds = _answered_grounds(data, bank, args.w_forward, args.w_backward)
    a = BankSolver(grounds, cfg).assignment(bank)
    flipped = diff(bank, a)
    before = consistency(bank, grounds).consistency
    apply(bank, a, "cli-solve")
    for key in flipped:
        b = bank.beliefs[key]
        print(f"flip {key.entity} {key.template_id} -> {'T' if b.label else 'F'}")
    print(f"{len(flipped)} flips, cost {a.cost:.4f}, consistency "
          f"{100 * before:.1f} -> {100 * consistency(bank, grounds).consistency:.1f}")
    if args.out:
        bank.save(args.out)
    return 0


def cmd_export_wcnf(args, conf) -> int:
    data = _load_data(args.data)
    bank = _load_bank(args.bank, data)
    beliefs = [b for b in bank if args.entity is None or b.key.entity == args.entity]
    if not beliefs:
        raise CliError(f"--entity: no beliefs about {args.entity!r}")
    grounds = [g for g in _answered_grounds(data, bank, args.w_forward, args.w_backward)
               if args.entity is None or g.entity == args.entity]
    inst = encode(beliefs, grounds, _solver_config(args, conf))
    export_wcnf(inst, args.out)
    print(f"wrote {inst.n_vars} variables, {len(inst.soft)} soft and {len(inst.hard)} hard "
          f"clauses to {args.out}")
    return 0


def cmd_inspect(args, conf) -> int:
    data = _load_data(args.data) if args.data else None
    bank = _load_bank(args.bank, data)
    beliefs = bank.beliefs_about(args.entity)
    if not beliefs:
        raise CliError(f"no beliefs about {args.entity!r} in {args.bank}")
    for b in beliefs:
        text = bank.registry.render(b.key, b.label) if bank.registry else ""
        print(f"{b.key.template_id:24s} {'T' if b.label else 'F'}  w={b.weight:.3f}  "
              f"{b.provenance.value:14s} batch {b.batch_index}  {text}")
    if data is not None:
        grounds = [g for g in _answered_grounds(data, bank) if g.entity == args.entity]
        rep = consistency(bank, grounds)
        print(f"consistency {100 * rep.consistency:.1f} ({rep.violated}/{rep.applicable} violated)")
        for g in violated_constraints(bank, grounds):
            rhs = " or ".join(f"{k.template_id} {'T' if l else 'F'}" for k, l in g.conclusion)
            print(f"  violated: {g.premise[0].template_id} {'T' if g.premise[1] else 'F'} -> {rhs}"
                  f"  (w={g.weight:g}, {g.kind.value})")
    return 0


def cmd_correct(args, conf) -> int:
    data = _load_data(args.data)
    bank = _load_bank(args.bank, data)
    grounds = _answered_grounds(data, bank)
    source = open(args.script, encoding="utf-8") if args.script else sys.stdin
    transcript = open(args.transcript, "w", encoding="utf-8") if args.transcript else sys.stdout
    try:
        correct(bank, source, grounds, transcript, args.batch)
    finally:
        if args.script:
            source.close()
        if args.transcript:
            transcript.close()
    bank.save(args.out or args.bank)
    return 0


def cmd_report(args, conf) -> int:
    reports = []
    for path in args.csv:
        if not Path(path).exists():
            raise CliError(f"report: {path} does not exist")
        reports.extend(read_csv(path))
    if args.out:
        paths = report(reports, args.out)
        print(f"wrote {paths['csv']} and {paths['txt']}")
    for metric in ("f1_true", "consistency"):
        print(text_table(reports, metric))
    return 0


def cmd_stub_server(args, conf) -> int:
    from .stubserver import StubServer

    data = _load_data(args.data)
    oracle = build_oracle({**_oracle_settings(args, conf), "kind": "synthetic"}, data, args.seed or 0)
    server = StubServer(oracle, data.templates, data.entities + data.dev_entities,
                        host=args.host, port=args.port, fail_first=args.fail_first,
                        always_fail=args.always_fail)
    print(f"serving on {server.url} (Ctrl-C to stop)", flush=True)
    try:
        server.httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.httpd.server_close()
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beliefbank", description=__doc__.split("\n")[0],
                                epilog="Config file keys are listed in the module docstring and README.")
    p.add_argument("--config-file", metavar="FILE", help="JSON config file; flags override it")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def data_flag(sp, required_note=""):
        sp.add_argument("--data", metavar="DIR", help=f"dataset directory written by datagen{required_note}")

    def oracle_flags(sp):
        sp.add_argument("--oracle", choices=("synthetic", "remote"), help="oracle kind (default synthetic)")
        sp.add_argument("--oracle-url", metavar="URL",
                        help=f"remote oracle endpoint (default ${ORACLE_URL_ENV})")
        sp.add_argument("--p-follow", type=float, metavar="P",
                        help="synthetic oracle: probability of following a context vote")
        sp.add_argument("--seed", type=int, metavar="S", help="oracle, shuffle and feedback seed (default 0)")

    def weight_flags(sp):
        sp.add_argument("--w-forward", type=float, metavar="W", help="override forward and mutex weights")
        sp.add_argument("--w-backward", type=float, metavar="W", help="override backward-disjunction weights")
        sp.add_argument("--lam", type=float, metavar="L", help="scale of model confidences against constraints")

    s = sub.add_parser("datagen", help="generate a synthetic taxonomy dataset")
    s.add_argument("--out", metavar="DIR", help="output directory (required)")
    s.add_argument("--seed", type=int, help="generator seed")
    s.add_argument("--n-concepts", type=int, help="number of concepts (default 12)")
    s.add_argument("--n-entities", type=int, help="number of test entities (default 20)")
    s.add_argument("--n-dev-entities", type=int, help="number of development entities (default 7)")
    s.add_argument("--properties-per-concept", type=int, help="properties per concept (default 6)")
    s.set_defaults(func=cmd_datagen)

    s = sub.add_parser("calibrate", help="grid-search constraint weights and lambda on dev entities")
    data_flag(s, " (required)")
    oracle_flags(s)
    s.add_argument("--lam", type=float, help=argparse.SUPPRESS)
    s.add_argument("--out", metavar="FILE", help="write the result and full grid as JSON")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("run", help="run experiment configurations and write reports")
    data_flag(s, " (required unless --manifest)")
    oracle_flags(s)
    weight_flags(s)
    s.add_argument("--config", action="append", metavar="NAME",
                   help="configuration to run; repeatable; 'all' (default) runs every one: "
                        + ", ".join(c.value for c in Configuration))
    s.add_argument("--n-batches", type=int, metavar="N", help="number of batches (default 10)")
    s.add_argument("-k", type=int, metavar="K", help="feedback beliefs per query (default 3)")
    s.add_argument("--calibration", metavar="FILE", help="use weights from a calibrate --out file")
    s.add_argument("--no-calibrate", action="store_true",
                   help="skip automatic calibration when weights are not given")
    s.add_argument("--manifest", metavar="FILE", help="repeat the run recorded in a manifest")
    s.add_argument("--out", metavar="PREFIX", default="reports/run",
                   help="report prefix; writes PREFIX.csv, PREFIX.txt, PREFIX.manifest.json")
    s.add_argument("--save-banks", metavar="DIR", help="save each configuration's final bank here")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("solve", help="repair a saved bank with the MaxSAT solver")
    s.add_argument("--bank", metavar="FILE", help="bank file (required)")
    data_flag(s, " (required, for constraints)")
    weight_flags(s)
    s.add_argument("--out", metavar="FILE", help="write the repaired bank")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("export-wcnf", help="write a bank's MaxSAT instance in WCNF format")
    s.add_argument("--bank", metavar="FILE", help="bank file (required)")
    data_flag(s, " (required, for constraints)")
    weight_flags(s)
    s.add_argument("--entity", help="export one entity only")
    s.add_argument("--out", metavar="FILE", required=True, help="output .wcnf path")
    s.set_defaults(func=cmd_export_wcnf)

    s = sub.add_parser("inspect", help="show the beliefs held about one entity")
    s.add_argument("entity")
    s.add_argument("--bank", metavar="FILE", help="bank file (required)")
    data_flag(s, " (optional; adds violated constraints)")
    s.set_defaults(func=cmd_inspect)

    s = sub.add_parser("correct", help="interactive correction session on a saved bank")
    s.add_argument("--bank", metavar="FILE", help="bank file (required)")
    data_flag(s, " (required, for constraints)")
    s.add_argument("--script", metavar="FILE", help="read commands from FILE instead of stdin")
    s.add_argument("--transcript", metavar="FILE", help="write the session transcript to FILE")
    s.add_argument("--batch", type=int, default=0, help="batch index stamped on corrections")
    s.add_argument("--out", metavar="FILE", help="write the corrected bank (default: overwrite --bank)")
    s.set_defaults(func=cmd_correct)

    s = sub.add_parser("report", help="re-render CSV reports as text tables")
    s.add_argument("csv", nargs="+", help="CSV files written by run")
    s.add_argument("--out", metavar="PREFIX", help="also write a merged PREFIX.csv and PREFIX.txt")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("stub-server", help="serve the synthetic oracle over HTTP for testing")
    data_flag(s, " (required)")
    oracle_flags(s)
    s.add_argument("--host", default="127.0.0.1", help="bind address (default 127.0.0.1)")
    s.add_argument("--port", type=int, default=8765, help="port (default 8765)")
    s.add_argument("--fail-first", type=int, default=0, metavar="N", help="fail the first N requests with 503")
    s.add_argument("--always-fail", action="store_true", help="fail every request with 503")
    s.set_defaults(func=cmd_stub_server)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        conf = load_config_file(args.config_file)
        return args.func(args, conf)
    except (CliError, FormatError, OracleUnavailable, ExperimentAborted,
            UnsatisfiableHardClauses) as exc:
        print(f"beliefbank {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"beliefbank {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
