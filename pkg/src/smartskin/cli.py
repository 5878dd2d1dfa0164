"""
Command-line entry point.

    smartskin train      --config CFG --out DIR
    smartskin synthesize --config CFG --model MODEL --out DIR
    smartskin evaluate   LAYOUT --config CFG --model MODEL --out DIR
    smartskin footprint  [LAYOUT] --config CFG [--model MODEL] [--out DIR]
    smartskin report     DIR [--config CFG]

Exit codes: 0 ok, 2 config, 3 training, 4 scenario/model mismatch,
5 data mismatch.
"""
from __future__ import annotations

import argparse
import datetime
import json
import os
import platform
import sys

import numpy as np
import scipy

from . import __version__, io
from .config import (ConfigError, build_mounting, build_scenario, build_wave,
                     config_hash, kriging_config, load_config, oracle_params, surrogate_hash,
                     synthesis_config, window_shape, bounds as config_bounds)
from .em import Direction, footprint_point
from .errors import IllConditioned, NoGroundIntersection, SmartSkinError
from .ipt import uniform_reference_power
from .sbd import evaluate_layout, synthesize
from .surrogate import KrigingModel, build_training_set, fit_ok, lhs_sampler, synthetic_oracle
from .surrogate.kriging import predict_outputs

EXIT_OK, EXIT_CONFIG, EXIT_TRAINING, EXIT_MODEL, EXIT_DATA = 0, 2, 3, 4, 5
MANIFEST = "manifest.json"


class CliError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _versions():
    return {"smartskin": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(out, command, doc, extra=None):
    """Config hash, versions, file hashes and a timestamp for an output directory.

    The timestamp is the only field that changes between identical runs.
    """
    files = {}
    for root, _, names in os.walk(out):
        for name in names:
            full = os.path.join(root, name)
            rel = os.path.relpath(full, out)
            if rel != MANIFEST:
                files[rel.replace(os.sep, "/")] = io.sha256_file(full)
    doc_out = {
        "command": command,
        "config_hash": config_hash(doc),
        "versions": _versions(),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
        "files": dict(sorted(files.items())),
    }
    doc_out.update(extra or {})
    io.write_json(os.path.join(out, MANIFEST), doc_out)
    return doc_out


def _load_model(path, doc):
    if path is None:
        raise CliError(EXIT_MODEL, "a --model path is required")
    if not os.path.isfile(path):
        raise CliError(EXIT_MODEL, f"model file not found: {path}")
    try:
        model = KrigingModel.load(path)
    except (ValueError, KeyError) as exc:
        raise CliError(EXIT_MODEL, f"cannot read model {path}: {exc}") from exc
    Pp, Qp = window_shape(doc)
    D = doc["uc"]["D"]
    if (model.Pp, model.Qp, model.D) != (Pp, Qp, D):
        raise CliError(EXIT_MODEL, f"model {path} has (P', Q', D) = "
                       f"{(model.Pp, model.Qp, model.D)}, config asks for {(Pp, Qp, D)}")
    if not np.allclose(model.bounds, config_bounds(doc), rtol=0, atol=0):
        raise CliError(EXIT_MODEL, f"model {path} was trained on different descriptor bounds")
    trained = model.meta.get("config_hash")
    if trained is not None and trained != surrogate_hash(doc):
        raise CliError(EXIT_MODEL, f"model {path} was trained for a different wave, unit cell "
                       "or surrogate configuration")
    return model


def _scenario(doc, model):
    try:
        return build_scenario(doc, model)
    except ValueError as exc:
        raise CliError(EXIT_MODEL, str(exc)) from exc


def _read_layout(path, scenario):
    P, Q = scenario.lattice.shape
    shape = (P, Q, scenario.model.D)
    if not os.path.isfile(path):
        raise CliError(EXIT_DATA, f"layout file not found: {path}")
    try:
        G = io.read_layout(path)
    except io.LayoutFormatError as exc:
        raise CliError(EXIT_DATA, str(exc)) from exc
    if G.shape != shape:
        raise CliError(EXIT_DATA, f"{path}: layout is {G.shape}, config expects {shape}")
    lo, hi = scenario.bounds[:, 0], scenario.bounds[:, 1]
    if np.any(G < lo) or np.any(G > hi):
        raise CliError(EXIT_DATA, f"{path}: descriptor values outside the configured bounds")
    return G


def interpolation_error(model, train):
    """Max relative misfit at the training inputs, over cells and outputs."""
    X = train.inputs()
    T = train.targets()
    worst = 0.0
    for q in range(model.Qp):
        for p in range(model.Pp):
            k = p + model.Pp * q
            Y = T[:, p, q]
            err = np.abs(predict_outputs(model, X, k) - Y).max(axis=0)
            scale = np.maximum(np.abs(Y).max(axis=0), 1e-300)
            worst = max(worst, float(np.max(err / scale)))
    return worst


# ---------------------------------------------------------------------------
# commands


def cmd_train(args, doc):
    out = args.out or "model_out"
    os.makedirs(out, exist_ok=True)
    wave = build_wave(doc)
    params = oracle_params(doc)
    s = doc["surrogate"]
    try:
        train = build_training_set(lambda G: synthetic_oracle(G, wave, params), lhs_sampler,
                                   s["B"], config_bounds(doc), s["seed"],
                                   shape=window_shape(doc), meta={"oracle": params.to_dict()})
    except (ValueError, SmartSkinError) as exc:
        raise CliError(EXIT_TRAINING, f"training set generation failed: {exc}") from exc
    try:
        model = fit_ok(train, kriging_config(doc))
    except (IllConditioned, ValueError, np.linalg.LinAlgError) as exc:
        raise CliError(EXIT_TRAINING, f"surrogate fit failed: {exc}") from exc
    model.meta["config_hash"] = surrogate_hash(doc)
    train.save(os.path.join(out, "training_set"))
    model_path = os.path.join(out, "model.json")
    model.save(model_path)
    c_all = np.concatenate([m.c for m in model.cells])
    summary = {"B": train.B, "max_interpolation_error": interpolation_error(model, train),
               "c_min": float(c_all.min()), "c_max": float(c_all.max()),
               "max_nugget": float(max(m.nugget for m in model.cells)),
               "tuning": model.tuning}
    io.write_json(os.path.join(out, "training_summary.json"), summary)
    write_manifest(out, "train", doc)
    print(f"model written to {model_path}")
    print(f"max interpolation error {summary['max_interpolation_error']:.3e}, "
          f"c in [{summary['c_min']:.4g}, {summary['c_max']:.4g}]")


def cmd_synthesize(args, doc):
    model = _load_model(args.model, doc)
    scenario = _scenario(doc, model)
    cfg = synthesis_config(doc, threads=args.threads)
    grid = scenario.grid(scenario.ipt_oversample)
    mask = scenario.mask(grid, uniform_reference_power(scenario.lattice, scenario.wave, cfg.ipt.C))
    report = synthesize(mask, scenario, cfg)
    out = args.out or "synthesis_out"
    report.save(out)
    write_manifest(out, "synthesize", doc, {"model_sha256": io.sha256_file(args.model)})
    m = report.metrics["achieved"]
    xi = m.get("xi_pen_db", m.get("xi_sha_db"))
    print(f"IPT: {report.ipt.termination_reason} after {report.ipt.iterations_run} iterations, "
          f"Gamma = {report.ipt.gamma_history[-1]:.4g}")
    print(f"SbD: Delta {report.delta_history[0]:.4g} -> {report.delta_history[-1]:.4g}")
    print(f"xi = {xi:.2f} dB, peak (theta, phi) = ({m['peak_theta_deg']:.2f}, {m['peak_phi_deg']:.2f}) deg")
    print(f"report written to {out}")


def _evaluate(args, doc):
    model = _load_model(args.model, doc)
    scenario = _scenario(doc, model)
    G = _read_layout(args.layout, scenario)
    return scenario, evaluate_layout(G, scenario)


def cmd_evaluate(args, doc):
    _, ev = _evaluate(args, doc)
    out = args.out or "evaluation_out"
    os.makedirs(out, exist_ok=True)
    io.write_json(os.path.join(out, "metrics.json"), ev["metrics"])
    io.write_currents(os.path.join(out, "currents_achieved.csv"), ev["currents"])
    io.write_farfield(os.path.join(out, "farfield.csv"), ev["far"])
    io.write_footprint(os.path.join(out, "footprint.csv"), ev["footprint"])
    write_manifest(out, "evaluate", doc, {"layout_sha256": io.sha256_file(args.layout)})
    m = ev["metrics"]["achieved"]
    xi = m.get("xi_pen_db", m.get("xi_sha_db"))
    print(f"xi = {xi:.2f} dB, peak (theta, phi) = ({m['peak_theta_deg']:.2f}, {m['peak_phi_deg']:.2f}) deg")


def cmd_footprint(args, doc):
    obj = doc["objective"]
    mount = build_mounting(doc)
    if "pencil" in obj:
        target = Direction.from_degrees(obj["pencil"]["theta_deg"], obj["pencil"]["phi_deg"])
        try:
            x, y = footprint_point(target, mount)
            print(f"target ground point ({x:.3f}, {y:.3f}) m")
        except NoGroundIntersection:
            print("target direction does not reach the ground")
    if args.layout is None:
        return
    scenario, ev = _evaluate(args, doc)
    fp = ev["footprint"]
    out = args.out or "footprint_out"
    os.makedirs(out, exist_ok=True)
    io.write_footprint(os.path.join(out, "footprint.csv"), fp)
    write_manifest(out, "footprint", doc, {"layout_sha256": io.sha256_file(args.layout)})
    x, y = fp.peak()
    print(f"footprint peak ({x:.3f}, {y:.3f}) m")


def cmd_report(args, doc):
    path = args.directory
    man_path = os.path.join(path, MANIFEST)
    if not os.path.isfile(man_path):
        raise CliError(EXIT_DATA, f"no {MANIFEST} in {path}")
    with open(man_path) as fh:
        man = json.load(fh)
    if doc is not None and man.get("config_hash") != config_hash(doc):
        raise CliError(EXIT_DATA, f"{path} was produced from a different config "
                       f"({man.get('config_hash')} vs {config_hash(doc)})")
    bad = [name for name, digest in man.get("files", {}).items()
           if io.sha256_file(os.path.join(path, name)) != digest]
    if bad:
        raise CliError(EXIT_DATA, f"files changed since they were written: {', '.join(bad)}")
    index = {"command": man.get("command"), "config_hash": man.get("config_hash"),
             "csv": sorted(n for n in man.get("files", {}) if n.endswith(".csv")),
             "json": sorted(n for n in man.get("files", {}) if n.endswith(".json"))}
    for name in ("report.json", "metrics.json", "training_summary.json"):
        full = os.path.join(path, name)
        if os.path.isfile(full):
            with open(full) as fh:
                index["summary"] = json.load(fh)
            break
    io.write_json(os.path.join(path, "index.json"), index)
    print(io.dumps(index))


COMMANDS = {"train": cmd_train, "synthesize": cmd_synthesize, "evaluate": cmd_evaluate,
            "footprint": cmd_footprint, "report": cmd_report}


def build_parser():
    ap = argparse.ArgumentParser(prog="smartskin", description=__doc__.split("\n\n")[0].strip())
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="scenario YAML")
        p.add_argument("--model", help="trained surrogate (model.json)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed-override", type=int, help="replace the seeds this command owns (sampler for train, IPT and PSO otherwise)")
        p.add_argument("--threads", type=int, default=1, help="parallel cost evaluations")
        return p

    common(sub.add_parser("train", help="generate training data and fit the surrogate"))
    common(sub.add_parser("synthesize", help="IPT reference currents + PSO layout"))
    common(sub.add_parser("evaluate", help="re-evaluate a saved layout")).add_argument("layout")
    common(sub.add_parser("footprint", help="ground footprint of a layout or target")
           ).add_argument("layout", nargs="?")
    common(sub.add_parser("report", help="verify and index an output directory"),
           config_required=False).add_argument("directory")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise CliError(EXIT_CONFIG, "--threads must be >= 1")
        doc = None
        if args.config is not None:
            try:
                # training owns the sampler seed, everything downstream the IPT/PSO seeds
                sections = ("surrogate",) if args.command == "train" else ("ipt", "sbd")
                doc = load_config(args.config, args.seed_override, sections)
            except ConfigError as exc:
                raise CliError(EXIT_CONFIG, str(exc)) from exc
        COMMANDS[args.command](args, doc)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
