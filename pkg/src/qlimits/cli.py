"""Command-line interface.

Usage::

    qlimits COMMAND [key=value ...] [--config FILE] [--output PATH]
                    [--format json|csv] [--seed N] [--quadrature NT NP]

Parameters come from the command's defaults, then a config file
(``key = value`` lines, ``#`` comments), then ``key=value`` arguments, with
later sources winning. The resolved configuration is echoed in every output.

Exit status: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bayes import (
    NuisancePrior,
    PriorInfo,
    bound_with_nuisance,
    jensen_gap,
    pair_prior,
    thermal_barJ,
    thermal_bound_asymptote,
    thermal_bound_closed_form,
    two_source_partial_coherence_bound,
)
from .errors import ConfigError, NumericalError
from .numcore import DEFAULT_N_PHI, DEFAULT_N_THETA, make_gauss_sphere, sym_invert
from .qfi import (
    AXES,
    PairTemplate,
    base_scale,
    centroid_separation_qfi,
    kappa_curve,
    repeated_trials,
    shot_noise_bound,
    single_photon_qfi,
    squeeze_factor,
    two_source_qfi,
    w_constants_numeric,
)
from .radiation import DipoleSpec, SinglePhotonSpec, SourceConfig
from .simulate import (
    HeterodyneModel,
    QuadratureModel,
    simulate_heterodyne,
    simulate_homodyne,
)

SCHEMA_VERSION = "1.0"
SCHEMA_DIR = Path(__file__).with_name("schemas")
RESERVED = ("seed", "quadrature", "format", "output")


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _float_list(text):
    return [float(t) for t in str(text).split(",") if t.strip()]


def _phase(text):
    return "uniform" if str(text).strip() == "uniform" else float(text)


# name -> (parser, default)
COMMANDS = {
    "qfi-single": {
        "kind": (str, "linear-z"),
        "N": (float, 2e4),
        "lambda0_nm": (float, 342.0),
    },
    "squeeze": {
        "kind": (str, "linear-z"),
        "N": (float, 2e4),
        "lambda0_nm": (float, 342.0),
        "N0": (_float_list, [0.0, 1.0, 10.0, 100.0]),
    },
    "kappa-curve": {
        "dmin": (float, 0.0),
        "dmax": (float, 2.0),
        "steps": (_int, 81),
        "phase": (float, 0.0),
        "dipole": (str, "x"),
    },
    "reparam": {
        "separation": (float, 0.1),
        "phase": (float, 0.0),
        "dipole": (str, "x"),
    },
    "bayes-thermal": {
        "Nbar": (float, 1e4),
        "C": (float, 1.0),
        "j": (float, 1.0),
        "lambda0": (float, 1.0),
        "samples": (_int, 0),
    },
    "bayes-two": {
        "separation": (float, 0.1),
        "N": (float, 100.0),
        "Nprime": (float, 100.0),
        "phase": (_phase, "uniform"),
        "thermal": (_bool, False),
        "jxx": (float, 0.0),
        "dipole": (str, "x"),
        "samples": (_int, 100_000),
    },
    "single-photon": {
        "dipole": (str, "z"),
        "M": (_int, 1),
        "lambda0_nm": (float, 342.0),
    },
    "simulate": {
        "measurement": (str, "homodyne"),
        "kind": (str, "linear-z"),
        "N": (float, 100.0),
        "axis": (str, "x"),
        "N0": (float, 0.0),
        "offset": (float, 0.01),
        "trials": (_int, 100_000),
        "separation": (float, 0.0),
        "modes_theta": (_int, 8),
        "modes_phi": (_int, 16),
    },
}

USES_SEED = {"bayes-thermal", "bayes-two", "simulate"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qlimits", description="Quantum limits to point-source localization.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("params", nargs="*", metavar="key=value")
    p.add_argument("--config", type=Path, help="key = value parameter file")
    p.add_argument("--output", "-o", type=Path, help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--seed", type=int)
    p.add_argument("--quadrature", type=int, nargs=2, metavar=("NT", "NP"))
    p.add_argument("--version", action="version", version=f"qlimits {__version__}")
    return p


def read_config_file(path: Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key] = value
    return out


def _split_pairs(tokens) -> dict:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ConfigError(f"expected key=value, got {tok!r}")
        key, value = tok.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve_config(args) -> dict:
    """Merge defaults, config file and command-line values into one dict."""
    spec = COMMANDS[args.command]
    raw = read_config_file(args.config) if args.config else {}
    raw.update(_split_pairs(args.params))

    reserved = {k: raw.pop(k) for k in RESERVED if k in raw}
    unknown = sorted(set(raw) - set(spec))
    if unknown:
        raise ConfigError(
            f"unknown parameter(s) for {args.command}: {', '.join(unknown)}; "
            f"allowed: {', '.join(spec)}"
        )
    params = {}
    for key, (parse, default) in spec.items():
        if key in raw:
            try:
                params[key] = parse(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw[key]!r} ({exc})") from exc
        else:
            params[key] = default

    try:
        seed = args.seed if args.seed is not None else _int(reserved.get("seed", 0))
        if args.quadrature:
            quad = tuple(args.quadrature)
        elif "quadrature" in reserved:
            quad = tuple(_int(t) for t in reserved["quadrature"].split(","))
        else:
            quad = (DEFAULT_N_THETA, DEFAULT_N_PHI)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if len(quad) != 2:
        raise ConfigError("quadrature needs two sizes: n_theta, n_phi")
    fmt = args.format or reserved.get("format") or (
        "csv" if args.command == "kappa-curve" else "json"
    )
    if fmt not in ("json", "csv"):
        raise ConfigError(f"format must be json or csv, got {fmt!r}")
    output = args.output or (Path(reserved["output"]) if "output" in reserved else None)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    return {
        "command": args.command,
        "params": params,
        "seed": seed if args.command in USES_SEED else None,
        "quadrature": [int(quad[0]), int(quad[1])],
        "format": fmt,
        "output": output,
    }


# ---------------------------------------------------------------- commands


def _dipole(name, N=1.0):
    try:
        return DipoleSpec.from_name(name, N)
    except ValueError as exc:
        raise ConfigError(f"unknown dipole {name!r} (x, y, z, linear-z, circular-xy)") from exc


def _axis_table(values: dict) -> tuple[list, list]:
    header = ["axis"] + list(values)
    rows = [[ax] + [float(v[i]) for v in values.values()] for i, ax in enumerate(AXES)]
    return header, rows


def cmd_qfi_single(p, q, seed):
    d = _dipole(p["kind"], p["N"])
    lam = p["lambda0_nm"]
    b = shot_noise_bound(d, lam, q)
    numeric = w_constants_numeric(d, q, lam)
    results = {
        "base_scale_nm": base_scale(p["N"], lam),
        "W_nm": b.W.tolist(),
        "W_numeric_nm": numeric.tolist(),
        "rms_bound_nm": b.rms.tolist(),
        "qcrb_diag_nm2": b.qcrb_diag.tolist(),
    }
    table = _axis_table({
        "W_nm": b.W, "W_numeric_nm": numeric, "rms_bound_nm": b.rms,
        "qcrb_diag_nm2": b.qcrb_diag,
    })
    return results, table


def cmd_squeeze(p, q, seed):
    d = _dipole(p["kind"], p["N"])
    b = shot_noise_bound(d, p["lambda0_nm"], q)
    rows = []
    for n0 in p["N0"]:
        f = squeeze_factor(n0)
        rows.append([n0, f] + (b.rms * math.sqrt(f)).tolist())
    header = ["N0", "f", "rms_x_nm", "rms_y_nm", "rms_z_nm"]
    results = {
        "shot_noise_rms_nm": b.rms.tolist(),
        "rows": [dict(zip(header, r)) for r in rows],
    }
    return results, (header, rows)


def cmd_kappa_curve(p, q, seed):
    if p["steps"] < 1:
        raise ConfigError("steps must be >= 1")
    if p["dmin"] < 0 or p["dmax"] < p["dmin"]:
        raise ConfigError("need 0 <= dmin <= dmax")
    seps = np.linspace(p["dmin"], p["dmax"], p["steps"]).tolist()
    template = PairTemplate(_dipole(p["dipole"]), p["phase"])
    curve = kappa_curve(template, seps, q)
    header = ["separation_over_lambda0", "kappa"]
    results = {"curve": [dict(zip(header, row)) for row in curve]}
    return results, (header, [list(r) for r in curve])


def cmd_reparam(p, q, seed):
    template = PairTemplate(_dipole(p["dipole"]), p["phase"])
    t = two_source_qfi(*template.sources(p["separation"]), q)
    cs = centroid_separation_qfi(t)
    results = {
        "qfi": t.matrix.to_dict(),
        "kappa": t.kappa,
        "singular": t.singular,
        "raised_bound_xx": None if math.isinf(t.raised_bound_xx) else t.raised_bound_xx,
        "centroid_separation_qfi": cs.to_dict(),
    }
    rows = []
    for name, m in (("xx'", t.matrix), ("cs", cs)):
        for i, a in enumerate(m.labels):
            for j, b in enumerate(m.labels):
                rows.append([name, a, b, float(m.values[i, j])])
    return results, (["matrix", "row", "col", "value"], rows)


def cmd_bayes_thermal(p, q, seed):
    args = (p["Nbar"], p["C"], p["lambda0"], p["j"])
    closed = thermal_bound_closed_form(*args)
    asym = thermal_bound_asymptote(*args)
    c = p["C"] * p["lambda0"] ** 2
    results = {
        "closed_form": closed,
        "asymptote": asym,
        "ratio": closed / asym,
        "before_inverse": 1.0 / (p["Nbar"] / c + p["j"]),
        "mc_bound": None,
        "mc_std_error": None,
        "samples": p["samples"],
    }
    if p["samples"] > 0:
        prior = NuisancePrior.thermal(p["Nbar"])
        rep = bound_with_nuisance(prior, thermal_barJ(p["C"], p["lambda0"], p["j"]),
                                  p["samples"], seed, vectorized=True)
        results["mc_bound"] = rep.bound[0, 0]
        results["mc_std_error"] = float(rep.std_error[0, 0])
    keys = list(results)
    return results, (keys, [[results[k] for k in keys]])


def cmd_bayes_two(p, q, seed):
    template = PairTemplate(_dipole(p["dipole"]))
    a, b = template.sources(p["separation"])
    prior = pair_prior(p["N"], p["Nprime"], p["phase"], p["thermal"])
    info = PriorInfo.diagonal([p["jxx"], p["jxx"]], ("x", "x'"))
    rep = two_source_partial_coherence_bound(a, b, prior, info, p["samples"], seed, q)
    ref_a = SourceConfig(a.position, a.dipole.replace(N=p["N"]))
    ref_b = SourceConfig(b.position, b.dipole.replace(N=p["Nprime"]))
    coherent = two_source_qfi(ref_a, ref_b, q)
    results = {
        "bound_xx": rep.bound[0, 0],
        "std_error": float(rep.std_error[0, 0]),
        "n_samples": rep.n_samples,
        "n_clipped": rep.n_clipped,
        "prior": prior.description,
        "in_phase_kappa": coherent.kappa,
        "no_overlap_bound_xx": 1.0 / (coherent.matrix["x", "x"] + p["jxx"]),
    }
    keys = [k for k in results if k != "prior"]
    return results, (keys, [[results[k] for k in keys]])


def cmd_single_photon(p, q, seed):
    d = _dipole(p["dipole"])
    s = SinglePhotonSpec(d.vector)
    lam = p["lambda0_nm"]
    J = repeated_trials(single_photon_qfi(s, q, lam), p["M"])
    bound = np.diag(sym_invert(J).values)
    results = {
        "qfi_per_nm2": J.to_dict(),
        "trials": p["M"],
        "qcrb_diag_nm2": bound.tolist(),
        "rms_bound_nm": np.sqrt(bound).tolist(),
    }
    return results, _axis_table({"qfi_diag_per_nm2": np.diag(J.values),
                                 "qcrb_diag_nm2": bound, "rms_bound_nm": np.sqrt(bound)})


def cmd_simulate(p, q, seed):
    d = _dipole(p["kind"], p["N"])
    if p["measurement"] == "homodyne":
        W = float(shot_noise_bound(d, 1.0, q).W[AXES.index(p["axis"])])
        if p["N0"] > 0:
            model = QuadratureModel.squeezed(p["axis"], W, p["N0"])
        else:
            model = QuadratureModel.vacuum(p["axis"], W)
        reports = [simulate_homodyne(model, p["offset"], p["trials"], seed)]
    elif p["measurement"] == "heterodyne":
        grid = make_gauss_sphere(p["modes_theta"], p["modes_phi"])
        sources = [SourceConfig((0.0, 0.0, 0.0), d)]
        offsets = [p["offset"]]
        if p["separation"] > 0:
            sources.append(SourceConfig((p["separation"], 0.0, 0.0), d))
            offsets.append(p["offset"])
        model = HeterodyneModel(tuple(sources), grid, tuple(offsets))
        reports = list(simulate_heterodyne(model, p["trials"], seed))
    else:
        raise ConfigError("measurement must be homodyne or heterodyne")
    header = ["label", "trials", "empirical_mse", "mse_std_error", "bound_compared", "qcrb"]
    rows = [[r.label, r.trials, r.empirical_mse, r.mse_std_error, r.bound_compared, r.qcrb]
            for r in reports]
    results = {"reports": [dict(zip(header, r)) for r in rows]}
    return results, (header, rows)


HANDLERS = {
    "qfi-single": cmd_qfi_single,
    "squeeze": cmd_squeeze,
    "kappa-curve": cmd_kappa_curve,
    "reparam": cmd_reparam,
    "bayes-thermal": cmd_bayes_thermal,
    "bayes-two": cmd_bayes_two,
    "single-photon": cmd_single_photon,
    "simulate": cmd_simulate,
}


# ---------------------------------------------------------------- output


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def metadata(cfg) -> dict:
    return {
        "tool": "qlimits",
        "version": __version__,
        "command": cfg["command"],
        "config": _jsonable(cfg["params"]),
        "seed": cfg["seed"],
        "quadrature": cfg["quadrature"],
    }


def emit_json(results: dict, cfg: dict) -> str:
    doc = {
        "schema": f"qlimits/{cfg['command']}",
        "schema_version": SCHEMA_VERSION,
        "metadata": metadata(cfg),
        "results": _jsonable(results),
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def emit_csv(table, cfg: dict) -> str:
    header, rows = table
    buf = io.StringIO()
    meta = metadata(cfg)
    for key in ("tool", "version", "command"):
        buf.write(f"# {key}: {meta[key]}\n")
    buf.write(f"# schema_version: {SCHEMA_VERSION}\n")
    buf.write(f"# config: {json.dumps(meta['config'], sort_keys=True)}\n")
    buf.write(f"# seed: {json.dumps(meta['seed'])}\n")
    buf.write(f"# quadrature: {json.dumps(meta['quadrature'])}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_csv(path) -> tuple[dict, list, list]:
    """Inverse of :func:`emit_csv`: (metadata, header, rows); numbers become floats."""
    meta, lines = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition(": ")
                meta[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    rows = []
    for rec in reader:
        row = []
        for cell in rec:
            try:
                row.append(float(cell))
            except ValueError:
                row.append(cell)
        rows.append(row)
    return meta, header, rows


def run(cfg: dict) -> str:
    """Execute a resolved configuration and return the rendered output text."""
    quad = make_gauss_sphere(*cfg["quadrature"])
    results, table = HANDLERS[cfg["command"]](cfg["params"], quad, cfg["seed"])
    return emit_json(results, cfg) if cfg["format"] == "json" else emit_csv(table, cfg)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_intermixed_args(argv)
        cfg = resolve_config(args)
        text = run(cfg)
    except NumericalError as exc:
        print(f"qlimits: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"qlimits: error: {exc}", file=sys.stderr)
        return 1
    out = cfg["output"]
    if out is None:
        sys.stdout.write(text)
        return 0
    try:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"qlimits: cannot write {out}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
