"""Command-line entry point: ``hyperresp {resp,tomo,beam,conventions,report}``.

Every run resolves its parameters as defaults < ``--config`` JSON < explicit
flags, writes its artifacts into ``--out-dir`` and finishes with a
``manifest.json`` (config hash, seed, artifact list, version, duration).

Exit codes: 0 success, 2 invalid configuration, 3 file I/O or schema error,
4 numerical convergence failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, beams, metrics, protocol, states, tomography
from .hilbert import HilbertError
from .seeding import derive_seed, fresh_seed
from .serialize import SCHEMA_VERSION, SchemaError, check_schema, tagged

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


class InputFileError(OSError):
    pass


class NumericError(RuntimeError):
    pass


# Command -> field -> default.  Config files may set exactly these keys.
FIELDS: dict[str, dict] = {
    "resp": {"target": "psi+", "family": None, "arbitrary": None, "heralded": False,
             "runs": 1, "bob_frame": "mirror"},
    "tomo": {"state": "phi+", "counts_file": None, "mean_total": 1e6, "noiseless": False,
             "depolarizing": 0.0, "monte_carlo": 0},
    "beam": {"state": "radial", "nx": 16, "ny": 16, "step": 0.2, "waist": 1.15, "pinhole": beams.DEFAULT_PINHOLE,
             "offset": "0,0", "counts_per_projection": 0.0, "depolarizing": 0.0, "register": False},
    "conventions": {},
    "report": {"mean_total": 1e6, "noiseless": False, "depolarizing": 0.0, "monte_carlo": 0},
}
GLOBAL_FIELDS = ("seed", "out_dir", "format")


def parse_angle(text) -> float:
    """``"45deg"``, ``"0.3rad"`` or a bare number (radians)."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip().lower()
    try:
        if s.endswith("deg"):
            return math.radians(float(s[:-3]))
        if s.endswith("rad"):
            return float(s[:-3])
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot parse angle {text!r}") from None


def _pairs(text) -> dict:
    if isinstance(text, dict):
        return dict(text)
    out = {}
    for item in str(text).split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_family(text) -> states.FamilyParams:
    vals = _pairs(text)
    unknown = set(vals) - {"alpha", "beta", "eta", "theta", "phi"}
    if unknown:
        raise ConfigError(f"unknown family parameters {sorted(unknown)}")
    return states.FamilyParams(**{k: parse_angle(v) for k, v in vals.items()})


def parse_quad(text) -> states.AmplitudeQuad:
    vals = _pairs(text)
    if set(vals) != set("abcd"):
        raise ConfigError("arbitrary state needs a, b, c and d")
    try:
        return states.AmplitudeQuad(*(complex(str(vals[k]).replace(" ", "")) for k in "abcd"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def resolve_state(name: str):
    cat = states.catalog()
    if name in states.TARGET_STATES:
        return states.TARGET_STATES[name][1]
    if name not in cat:
        raise ConfigError(f"unknown state {name!r}; choose from {sorted(cat) + sorted(states.TARGET_STATES)}")
    return cat[name]


def _check_prob(p, name) -> float:
    p = float(p)
    if not 0 <= p <= 1:
        raise ConfigError(f"{name} must lie in [0, 1]")
    return p


def _positive(v, name, integer=False):
    v = int(v) if integer else float(v)
    if not v > 0:
        raise ConfigError(f"{name} must be positive")
    return v


def validate(command: str, cfg: dict) -> dict:
    """Type-check and normalize a resolved configuration."""
    out = dict(cfg)
    try:
        if command == "resp":
            if sum(x is not None and x is not False for x in (out["family"], out["arbitrary"])) > 1:
                raise ConfigError("choose at most one of family and arbitrary")
            states.BellKind(out["target"])
            if out["bob_frame"] not in ("mirror", "source"):
                raise ConfigError("bob_frame must be 'mirror' or 'source'")
            out["runs"] = _positive(out["runs"], "runs", integer=True)
            if out["family"] is not None:
                parse_family(out["family"])
            if out["arbitrary"] is not None:
                parse_quad(out["arbitrary"])
            out["heralded"] = bool(out["heralded"])
        elif command in ("tomo", "report"):
            out["mean_total"] = _positive(out["mean_total"], "mean_total")
            out["depolarizing"] = _check_prob(out["depolarizing"], "depolarizing")
            out["monte_carlo"] = int(out["monte_carlo"])
            if out["monte_carlo"] == 1 or out["monte_carlo"] < 0:
                raise ConfigError("monte_carlo must be 0 (off) or at least 2")
            out["noiseless"] = bool(out["noiseless"])
            if command == "tomo" and out["counts_file"] is None:
                resolve_state(out["state"])
        elif command == "beam":
            st = resolve_state(out["state"])
            if not hasattr(st, "amplitudes") or st.dim != 4:
                raise ConfigError("beam profiles need a pure single-photon state")
            for k in ("nx", "ny"):
                out[k] = _positive(out[k], k, integer=True)
            for k in ("step", "waist", "pinhole"):
                out[k] = _positive(out[k], k)
            out["counts_per_projection"] = float(out["counts_per_projection"])
            if out["counts_per_projection"] < 0:
                raise ConfigError("counts_per_projection must be nonnegative")
            out["depolarizing"] = _check_prob(out["depolarizing"], "depolarizing")
            dx, dy = (float(v) for v in str(out["offset"]).split(","))
            out["offset"] = f"{dx},{dy}"
            out["register"] = bool(out["register"])
            beams.GridSpec(out["nx"], out["ny"], out["step"], (dx, dy), out["waist"])
    except (ValueError, TypeError, HilbertError, beams.BeamError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return out


def load_config(path: str | None, command: str) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputFileError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    try:
        check_schema(doc)
    except SchemaError as exc:
        raise ConfigError(str(exc)) from None
    body = {k: v for k, v in doc.items() if k not in ("schema_version", "command", "kind")}
    if doc.get("command", command) != command:
        raise ConfigError(f"config is for command {doc['command']!r}, not {command!r}")
    unknown = set(body) - set(FIELDS[command]) - set(GLOBAL_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    return body


def config_hash(command: str, cfg: dict) -> str:
    canon = json.dumps({"command": command, **cfg}, sort_keys=True, default=str)
    return hashlib.sha256(canon.encode()).hexdigest()


class Run:
    """Output directory bookkeeping; files are written atomically."""

    def __init__(self, out_dir: str):
        self.out = Path(out_dir)
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise InputFileError(f"cannot create {out_dir}: {exc}") from None
        self.artifacts: list[str] = []

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        try:
            fd, tmp = tempfile.mkstemp(dir=self.out, prefix=f".{name}.")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except OSError as exc:
            raise InputFileError(f"cannot write {path}: {exc}") from None
        if name not in self.artifacts:
            self.artifacts.append(name)
        return path

    def write_json(self, name: str, doc) -> Path:
        return self.write(name, json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=True) + "\n")


def _rows_csv(rows: list[dict]) -> str:
    if not rows:
        return f"# schema_version={SCHEMA_VERSION}\n"
    keys = list(rows[0])
    lines = [f"# schema_version={SCHEMA_VERSION}", ",".join(keys)]
    for r in rows:
        lines.append(",".join("" if r[k] is None else str(r[k]) for k in keys))
    return "\n".join(lines) + "\n"


def cmd_resp(cfg: dict, seed: int, run: Run, fmt: str) -> dict:
    transcripts = []
    extra = {}
    for k in range(cfg["runs"]):
        s = derive_seed(seed, k)
        if cfg["arbitrary"] is not None:
            q = parse_quad(cfg["arbitrary"])
            transcripts.append(protocol.run_arbitrary_resp(q, s, heralded=cfg["heralded"]))
        elif cfg["family"] is not None:
            p = parse_family(cfg["family"])
            transcripts.append(protocol.run_family(p, s, bob_frame=cfg["bob_frame"]))
        else:
            transcripts.append(protocol.run_resp(cfg["target"], s))
    if cfg["family"] is not None:
        p = parse_family(cfg["family"])
        conds = protocol.family_conditionals(p, cfg["bob_frame"])
        bell = [max(abs(np.vdot(states.spin_orbit_bell(b).amplitudes, o.bob_state.amplitudes))
                    for b in states.BELL_ORDER) for o in conds]
        extra["canonical_equivalent"] = bool(min(bell) > 1 - 1e-10)
    rows = []
    for t in transcripts:
        q = metrics.quality_report(t.bob_state, t.target)
        rows.append({"protocol": t.protocol, "alice_outcome": t.alice_outcome, "cbits_sent": t.cbits_sent,
                     "ebits_consumed": t.ebits_consumed, "correction": t.correction, "message": t.message,
                     "success": t.success, "fidelity": q.fidelity, "tangle": q.tangle,
                     "linear_entropy": q.linear_entropy})
    run.write_json("transcripts.json", tagged("transcripts", {"runs": [t.to_dict() for t in transcripts]}))
    report = tagged("resp-report", {"runs": rows, **extra})
    if fmt == "csv":
        run.write("report.csv", _rows_csv(rows))
    else:
        run.write_json("report.json", report)
    for r in rows:
        print(f"{r['protocol']}: outcome {r['alice_outcome']}, correction {r['correction']}, "
              f"cbits {r['cbits_sent']}, success {r['success']}, F={r['fidelity']:.12f}")
    if "canonical_equivalent" in extra:
        print(f"family conditionals are spin-orbit Bell states: {extra['canonical_equivalent']}")
    return report


def _noise(p: float):
    return None if p == 0 else (lambda rho: tomography.depolarizing(rho, p))


def table_row(label: str, counts: tomography.CountRecord, target, mc: int, seed: int) -> dict:
    res = tomography.mle_reconstruct(counts)
    if not res.converged:
        raise NumericError(f"{label}: reconstruction did not converge (gradient {res.gradient_norm:.2e})")
    q = metrics.quality_report(res.rho, target)
    row = {"state": label, "F": q.fidelity, "T": q.tangle, "S_L": q.linear_entropy,
           "dF": None, "dT": None, "dS_L": None, "mc_unconverged": None}
    if mc:
        summ = tomography.monte_carlo_errors(counts, mc, seed, target)
        row.update(dF=summ.fidelity.std, dT=summ.tangle.std, dS_L=summ.linear_entropy.std,
                   mc_unconverged=summ.n_unconverged)
    row["row"] = ", ".join(f"{name}={metrics.format_uncertain(row[name], row['d' + name])}"
                           for name in ("F", "T", "S_L"))
    return row, res


def _simulate(state, cfg, seed):
    cat = tomography.setting_catalog()
    if cfg["noiseless"]:
        return tomography.expected_counts(state, cat, cfg["mean_total"], _noise(cfg["depolarizing"]))
    return tomography.simulate_counts(state, cat, cfg["mean_total"], seed, _noise(cfg["depolarizing"]))


def cmd_tomo(cfg: dict, seed: int, run: Run, fmt: str) -> dict:
    if cfg["counts_file"] is not None:
        path = Path(cfg["counts_file"])
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise InputFileError(f"cannot read {path}: {exc}") from None
        try:
            counts = (tomography.CountRecord.from_dict(json.loads(text)) if path.suffix == ".json"
                      else tomography.CountRecord.from_csv(text))
        except (SchemaError, KeyError, ValueError) as exc:
            raise InputFileError(f"{path}: {exc}") from None
    else:
        counts = _simulate(resolve_state(cfg["state"]), cfg, derive_seed(seed, 0))
    target = resolve_state(cfg["state"])
    row, res = table_row(cfg["state"], counts, target, cfg["monte_carlo"], derive_seed(seed, 1))
    run.write("counts.csv", counts.to_csv())
    run.write_json("reconstruction.json", res.to_dict())
    report = tagged("tomo-report", row)
    if fmt == "csv":
        run.write("report.csv", _rows_csv([row]))
    else:
        run.write_json("report.json", report)
    print(f"{cfg['state']}: {row['row']}")
    return report


def cmd_report(cfg: dict, seed: int, run: Run, fmt: str) -> dict:
    rows = []
    for k, (key, (label, target)) in enumerate(states.TARGET_STATES.items()):
        counts = _simulate(target, cfg, derive_seed(seed, 2 * k))
        row, _ = table_row(key, counts, target, cfg["monte_carlo"], derive_seed(seed, 2 * k + 1))
        reported = metrics.REPORTED_VALUES[key]
        row.update(target=label, reported_F=reported[0], reported_T=reported[2], reported_S_L=reported[4])
        rows.append(row)
        print(f"{key}  {label:<24} {row['row']}")
    report = tagged("table", {"rows": rows})
    if fmt == "csv":
        run.write("table.csv", _rows_csv(rows))
    else:
        run.write_json("table.json", report)
    return report


def cmd_beam(cfg: dict, seed: int, run: Run, fmt: str) -> dict:
    ideal = resolve_state(cfg["state"])
    offset = tuple(float(v) for v in cfg["offset"].split(","))
    grid = beams.GridSpec(cfg["nx"], cfg["ny"], cfg["step"], offset, cfg["waist"])
    source = ideal if cfg["depolarizing"] == 0 else tomography.depolarizing(ideal, cfg["depolarizing"])
    scan = beams.pinhole_scan(source, grid, cfg["pinhole"], cfg["counts_per_projection"], derive_seed(seed, 0))
    nominal = replace(grid, origin_offset=(0.0, 0.0))
    scan_nominal = beams.ScanResult(nominal, scan.pinhole_diameter, scan.counts_per_projection, scan.samples)
    summary = {"state": cfg["state"]}
    evaluated = scan
    if cfg["register"]:
        reg = beams.register_center(scan_nominal, ideal)
        summary["registration"] = {"offset_mm": list(reg.offset), "degenerate": reg.degenerate,
                                   "objective": reg.objective}
        evaluated = beams.ScanResult(replace(grid, origin_offset=reg.offset), scan.pinhole_diameter,
                                     scan.counts_per_projection, scan.samples)
    fid = beams.profile_fidelity(evaluated, ideal)
    summary["fidelity"] = {"mean": fid.mean, "std": fid.std, "weighted_mean": fid.weighted_mean,
                           "n_points": fid.n_points}
    svg, csv_text = beams.render_profile(scan, "ellipse-grid")
    run.write("samples.csv", csv_text)
    run.write("ellipses.svg", svg)
    run.write("projections.svg", beams.render_profile(scan, "intensity-projections")[0])
    ideal_svg, _ = beams.render_profile(beams.field_of_state(ideal, nominal), "ellipse-grid")
    run.write("ideal_ellipses.svg", ideal_svg)
    report = tagged("beam-summary", summary)
    if fmt == "csv":
        run.write("summary.csv", _rows_csv([{"state": cfg["state"], **summary["fidelity"]}]))
    else:
        run.write_json("summary.json", report)
    print(f"{cfg['state']}: F_av = {fid.mean:.4f} ± {fid.std:.4f} (equal weight), "
          f"{fid.weighted_mean:.4f} (intensity weighted), {fid.n_points} points")
    return report


def conventions_document() -> dict:
    conv = states.DEFAULT_CIRCULAR
    checks = {
        "resource_bell_sum_residual": states.resource_identity_residual(),
        "radial_identity_residual": states.radial_identity_residual(conv),
        "lc1_unitary_residual": float(np.abs(protocol.family_unitary(protocol.LC1_PRESET)
                                             - protocol.LC1_UNITARY).max()),
    }
    return tagged("conventions", {
        "single_photon_basis": list(states.SINGLE_LABELS),
        "pair_basis_order": "(polarization A, orbit A, polarization B, orbit B)",
        "polarization": {"D": "(H+V)/√2", "A": "(H−V)/√2", "R": "(H+iV)/√2", "L": "(H−iV)/√2"},
        "spatial": {"l": "LG₀^{+1} = −g e^{iφ}", "r": "LG₀^{−1} = +g e^{−iφ}", "h": "(l+r)/√2",
                    "v": "i(l−r)/√2", "d": "(l+ir)/√2", "a": "(l−ir)/√2"},
        "stokes": "S1=|E_H|²−|E_V|², S2=2Re(E_H* E_V), S3=2Im(E_H* E_V); R has S3=+1",
        "radial_state": "(|Hv>+|Vh>)/√2 = −i(|Rr>−|Ll>)/√2",
        "azimuthal_state": "(|Hh>−|Vv>)/√2 = (|Rr>+|Ll>)/√2",
        "bob_mirror_frame": "V→−V on polarization and l↔r on orbit",
        "checks": checks,
    })


def cmd_conventions(cfg: dict, seed: int, run: Run, fmt: str) -> dict:
    doc = conventions_document()
    run.write_json("conventions.json", doc)
    for k, v in doc.items():
        if k == "checks":
            for name, val in v.items():
                print(f"check {name}: residual {val:.3e}")
        elif k not in ("schema_version", "kind"):
            print(f"{k}: {v}")
    return doc


COMMANDS = {"resp": cmd_resp, "tomo": cmd_tomo, "beam": cmd_beam, "conventions": cmd_conventions,
            "report": cmd_report}


def _add_globals(p: argparse.ArgumentParser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="top-level 64-bit seed (drawn from entropy if absent)")
    p.add_argument("--out-dir", dest="out_dir", default=d, help="artifact directory (default hyperresp-out)")
    p.add_argument("--config", default=d, help="JSON config file")
    p.add_argument("--format", choices=("json", "csv"), default=d, help="format of the report file (default json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperresp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_globals(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, suppress=True)

    p = sub.add_parser("resp", parents=[common], help="run a preparation protocol")
    p.add_argument("--target", help="Bell target: phi+, phi-, psi+, psi-")
    p.add_argument("--family", help="rotated-BSA family, e.g. alpha=45deg,theta=0,eta=0,phi=0")
    p.add_argument("--arbitrary", help="arbitrary state amplitudes, e.g. a=0.5,b=0.5,c=0.5,d=0.5")
    p.add_argument("--heralded", action="store_true", default=None, help="1-cbit heralded variant")
    p.add_argument("--runs", type=int, help="number of protocol runs")
    p.add_argument("--bob-frame", dest="bob_frame", choices=("mirror", "source"))

    p = sub.add_parser("tomo", parents=[common], help="simulate and reconstruct one state")
    p.add_argument("--state", help="state key (phi+, radial, 2e, ...)")
    p.add_argument("--counts-file", dest="counts_file", help="reconstruct persisted counts (CSV or JSON)")
    p.add_argument("--mean-total", dest="mean_total", type=float)
    p.add_argument("--noiseless", action="store_true", default=None)
    p.add_argument("--depolarizing", type=float)
    p.add_argument("--monte-carlo", dest="monte_carlo", type=int, help="number of resamples (0 = off)")

    p = sub.add_parser("beam", parents=[common], help="pinhole scan of a vector beam")
    p.add_argument("--state")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--step", type=float, help="mm")
    p.add_argument("--waist", type=float, help="mm")
    p.add_argument("--pinhole", type=float, help="pinhole diameter in mm")
    p.add_argument("--offset", help="beam center dx,dy in mm")
    p.add_argument("--counts-per-projection", dest="counts_per_projection", type=float)
    p.add_argument("--depolarizing", type=float)
    p.add_argument("--register", action="store_true", default=None, help="fit the beam center")

    sub.add_parser("conventions", parents=[common], help="print the phase conventions and their checks")

    p = sub.add_parser("report", parents=[common], help="quality table for all target states")
    p.add_argument("--mean-total", dest="mean_total", type=float)
    p.add_argument("--noiseless", action="store_true", default=None)
    p.add_argument("--depolarizing", type=float)
    p.add_argument("--monte-carlo", dest="monte_carlo", type=int)
    return parser


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    started = time.perf_counter()
    try:
        file_cfg = load_config(getattr(args, "config", None), command)
        cfg = dict(FIELDS[command])
        cfg.update({k: v for k, v in file_cfg.items() if k in cfg})
        cfg.update({k: v for k, v in vars(args).items() if k in cfg and v is not None})
        cfg = validate(command, cfg)
        seed = args.seed if args.seed is not None else file_cfg.get("seed")
        seed = fresh_seed() if seed is None else int(seed)
        out_dir = args.out_dir or file_cfg.get("out_dir") or "hyperresp-out"
        fmt = args.format or file_cfg.get("format") or "json"
        if fmt not in ("json", "csv"):
            raise ConfigError("format must be json or csv")
        run = Run(out_dir)
        COMMANDS[command](cfg, seed, run, fmt)
        run.write_json("manifest.json", tagged("manifest", {
            "command": command,
            "config": cfg,
            "config_hash": config_hash(command, cfg),
            "seed": seed,
            "artifacts": sorted(run.artifacts),
            "version": __version__,
            "duration_s": round(time.perf_counter() - started, 6),
        }))
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, "config", str(exc))
    except InputFileError as exc:
        return _fail(EXIT_IO, "io", str(exc))
    except (NumericError, tomography.ConvergenceError) as exc:
        return _fail(EXIT_NUMERIC, "numeric", str(exc))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
