"""Command-line front end: ``nvsweep run`` / ``nvsweep list`` / ``nvsweep show``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .config import ENV_PREFIX, ConfigError, Scenario, config_hash, expand
from .dynamics import NumericalContractError, SweepSchedule, write_columns
from .ensemble import (
    BulkEstimateInputs,
    TransferScenario,
    averaged_transfer,
    bulk_polarization,
    lz_polarization_rate,
)
from .geometry import GeometryConfig, QuadratureError, ensemble_ax, ensemble_ax_numeric
from .hamiltonians import SPECIES, HyperfineParams, P1Params
from .initialization import MWConfig, polarization_vs_theta
from .lz import transfer_map
from .sampling import DisorderModel, TruncatedGaussian

log = logging.getLogger("nvsweep")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


# ---------------------------------------------------------------- presets

def preset_names() -> list[str]:
    files = resources.files("nvsweep").joinpath("presets").iterdir()
    return sorted(f.name[:-4] for f in files if f.name.endswith(".ini"))


def preset_text(name: str) -> str:
    path = resources.files("nvsweep").joinpath("presets", f"{name}.ini")
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path.read_text(encoding="utf-8")


def list_scenarios() -> list[tuple[str, str, str]]:
    """``(name, kind, description)`` for every built-in preset."""
    rows = []
    for name in preset_names():
        cfg = Scenario.from_text(preset_text(name), f"preset:{name}").resolve()
        rows.append((name, cfg["scenario"]["kind"], cfg["scenario"]["description"]))
    return rows


# ---------------------------------------------------------------- builders

def _disorder(c, names) -> DisorderModel:
    e = c["ensemble"]
    params = {n: TruncatedGaussian(e[f"{n}_sigma"], e[f"{n}_lo"], e[f"{n}_hi"]) for n in names}
    tmax = e["theta_max_deg"]
    return DisorderModel(
        params=params,
        theta=math.radians(e["theta_deg"]),
        theta_max=None if tmax is None else math.radians(tmax),
        n_samples=e["n_samples"],
        seed=e["seed"],
    )


def _mw(c) -> MWConfig:
    m = c["mw"]
    return MWConfig(Omega=m["Omega"], omega=m["omega"], P_i=m["P_i"], t_pulse=m["t_pulse"])


def transfer_scenario(c) -> TransferScenario:
    s, w = c["system"], c["sweep"]
    p1 = P1Params(g1=s["p1_g1"], g2=s["p1_g2"]) if (s["p1_g1"] or s["p1_g2"]) else None
    return TransferScenario(
        species=SPECIES[s["species"]],
        a_x=s["a_x"],
        a_z=s["a_z"],
        E_perp=s["E_perp"],
        schedule=SweepSchedule(w["omega_start"], w["omega_end"], w["v"], w["cycles"], w["reinit"]),
        T2=w["T2"],
        host=HyperfineParams() if s["host_14N"] else None,
        p1=p1,
        n_sweeps=w["n_sweeps"],
        stride=w["stride"],
        init=_mw(c) if c["ensemble"]["mw_init"] else None,
    )


# ---------------------------------------------------------------- runners
# each returns (columns, summary dict)

def _run_protocol(c, threads, single_sweep=False):
    sc = transfer_scenario(c)
    if single_sweep:
        sc = sc.with_(n_sweeps=1)
    H = sc.hamiltonian()
    tr = sc.run(H, c["sweep"]["p_nv"], c["sweep"]["dt"])
    label = sc.species.name
    ends = tr.segment_end_polarization(label)
    return tr.columns(), {
        "final_polarization": float(ends[-1]),
        "segment_end_polarization": [float(x) for x in ends],
        "dt_us": tr.dt,
        "step_doubling_error": tr.step_doubling_error,
        "max_trace_drift": float(np.max(np.abs(tr.trace - 1))),
    }


def _run_ensemble(c, threads):
    sc = transfer_scenario(c)
    names = ["E_perp", "delta_b"] + (["E_z"] if c["ensemble"]["mw_init"] else [])
    res = averaged_transfer(sc, _disorder(c, names), threads=threads, dt=c["sweep"]["dt"])
    ends = res.segment_end_mean()
    return res.columns(), {
        "final_mean_polarization": float(res.mean[-1]),
        "final_stderr": float(res.stderr[-1]),
        "segment_end_mean": [float(x) for x in ends],
        "dt_us": res.dt,
        "step_doubling_error": res.step_doubling_error,
        "max_trace_drift": res.max_trace_drift,
    }


def _run_map(c, threads):
    m = c["map"]
    ax = np.linspace(m["ax_min"], m["ax_max"], m["ax_n"])
    ep = np.linspace(m["eperp_min"], m["eperp_max"], m["eperp_n"])
    P = transfer_map(ax, ep, c["sweep"]["v"], SPECIES[c["system"]["species"]].Qbar)
    # long format; one row per cell
    A, E = np.meshgrid(ax, ep, indexing="ij")
    cols = {"a_x_MHz": A.ravel(), "E_perp_MHz": E.ravel(), "P": P.ravel()}
    return cols, {"max_P": float(P.max()), "fraction_above_0.9": float(np.mean(P > 0.9))}


def _run_init(c, threads):
    m = c["mw"]
    thetas = np.linspace(m["theta_start_deg"], m["theta_stop_deg"], m["theta_n"])
    model = _disorder(c, ["delta_b", "E_z"])
    p = polarization_vs_theta(_mw(c), np.radians(thetas), model)
    return {"theta_deg": thetas, "P_NV": p}, {
        "P_NV_at": {f"{t:g}": float(x) for t, x in zip(thetas, p)},
    }


def _run_coupling(c, threads):
    k = c["coupling"]
    g = GeometryConfig(d_NV=k["d_NV"], rho_n=k["rho_n"], beta=math.radians(k["beta_deg"]))
    ax = ensemble_ax(g)
    cols = {"d_NV_nm": [g.d_NV], "a_x_MHz": [ax]}
    out = {"a_x_MHz": ax}
    if k["numeric"]:
        num = ensemble_ax_numeric(g)
        cols["a_x_numeric_MHz"] = [num]
        out["a_x_numeric_MHz"] = num
    return cols, out


def _run_bulk(c, threads):
    b = c["bulk"]
    if b["rate_source"] == "given":
        rate = b["P_1"] / (b["P_1_time_ms"] * 1e-3)
    else:
        sc = transfer_scenario(c)
        e = c["ensemble"]
        a_x = ensemble_ax(GeometryConfig(d_NV=b["d_NV"]))
        rate = lz_polarization_rate(
            a_x, sc.species.Qbar, sc.schedule.v, sc.schedule.duration,
            TruncatedGaussian(e["E_perp_sigma"], e["E_perp_lo"], e["E_perp_hi"]),
            e["n_samples"], e["seed"],
        )
    pb = bulk_polarization(BulkEstimateInputs(b["rho_NV"], b["rho_n"], b["T_o"], rate))
    return {"P_1_per_s": [rate], "bulk_polarization": [pb]}, {"P_1_per_s": rate, "bulk_polarization": pb}


RUNNERS = {
    "sweep": lambda c, t: _run_protocol(c, t, single_sweep=True),
    "protocol": _run_protocol,
    "ensemble": _run_ensemble,
    "transfer-map": _run_map,
    "init-polarization": _run_init,
    "coupling": _run_coupling,
    "bulk-estimate": _run_bulk,
}


def _fmt_summary(kind, varying, s) -> str:
    tag = " ".join(f"{k.split('.')[-1]}={v}" for k, v in varying.items())
    if kind == "coupling":
        msg = f"a_x = {s['a_x_MHz']:.5f} MHz"
        if "a_x_numeric_MHz" in s:
            msg += f" (numeric {s['a_x_numeric_MHz']:.5f} MHz)"
    elif kind in ("protocol", "sweep"):
        msg = "polarization after each sweep: " + ", ".join(f"{x:+.4f}" for x in s["segment_end_polarization"])
    elif kind == "ensemble":
        msg = "mean polarization after each sweep: " + ", ".join(f"{x:+.4f}" for x in s["segment_end_mean"])
        msg += f" (stderr {s['final_stderr']:.4f})"
    elif kind == "bulk-estimate":
        msg = f"P_1 = {s['P_1_per_s']:.4g} /s, bulk polarization = {s['bulk_polarization']:.4f}"
    elif kind == "transfer-map":
        msg = f"max P = {s['max_P']:.4f}"
    else:
        msg = ", ".join(f"P_NV({k} deg)={v:.3f}" for k, v in list(s["P_NV_at"].items())[:: max(1, len(s["P_NV_at"]) // 6)])
    return f"{tag + ': ' if tag else ''}{msg}"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def execute(scenario: Scenario, out_dir: Path, stem: str, threads: int, precision: int, echo=print) -> dict:
    """Run every expansion of ``scenario``, write CSVs and the manifest, return the manifest."""
    cfg = scenario.resolve()
    kind = cfg["scenario"]["kind"]
    runs = expand(cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_runs = []
    for i, (varying, full) in enumerate(runs):
        cols, summary = RUNNERS[kind](full, threads)
        name = f"{stem}.csv" if len(runs) == 1 else f"{stem}_{i:03d}.csv"
        path = out_dir / name
        write_columns(path, cols, precision)
        echo(_fmt_summary(kind, varying, summary))
        manifest_runs.append({
            "index": i, "varying": varying, "output": name, "sha256": _sha256(path), "summary": summary,
        })
    text = scenario.to_text()
    manifest = {
        "program": "nvsweep",
        "version": __version__,
        "source": scenario.source,
        "kind": kind,
        "config": text,
        "config_sha256": config_hash(text),
        "seed": cfg["ensemble"]["seed"],
        "precision": precision,
        "resolved": cfg,
        "runs": manifest_runs,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return manifest


# ---------------------------------------------------------------- argparse

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nvsweep", description="Zero-field NV sweep polarization simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a scenario")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", type=Path, help="scenario file")
    src.add_argument("--preset", help="built-in scenario name (see 'nvsweep list')")
    src.add_argument("--manifest", type=Path, help="re-run the scenario recorded in a manifest.json")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config key (section.key or bare key); repeatable")
    r.add_argument("--out", type=Path, default=None, help="output directory (default ./out)")
    r.add_argument("--seed", type=int, default=None, help="ensemble seed")
    r.add_argument("--threads", type=int, default=None, help="worker threads for ensembles")
    r.add_argument("--precision", type=int, default=None, help="significant digits in CSV (default 6)")

    sub.add_parser("list", help="list built-in scenarios")
    s = sub.add_parser("show", help="print a built-in scenario file")
    s.add_argument("name")
    return p


def _load(args) -> tuple[Scenario, str]:
    if args.preset:
        return Scenario.from_text(preset_text(args.preset), f"preset:{args.preset}"), args.preset
    if args.manifest:
        try:
            data = json.loads(args.manifest.read_text(encoding="utf-8"))
            text = data["config"]
        except (OSError, ValueError, KeyError) as e:
            raise ConfigError(f"cannot read manifest: {e}", None, str(args.manifest)) from None
        stem = Path(data["runs"][0]["output"]).stem if data.get("runs") else "result"
        if len(data.get("runs", [])) > 1:
            stem = stem.rsplit("_", 1)[0]
        if args.precision is None and "precision" in data:
            args.precision = data["precision"]
        return Scenario.from_text(text, str(args.manifest)), stem
    return Scenario.from_file(args.config), args.config.stem


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "list":
        rows = list_scenarios()
        w = max(len(r[0]) for r in rows)
        k = max(len(r[1]) for r in rows)
        for name, kind, desc in rows:
            print(f"{name:<{w}}  {kind:<{k}}  {desc}")
        return 0
    if args.command == "show":
        try:
            print(preset_text(args.name), end="")
        except ConfigError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_CONFIG
        return 0

    try:
        scenario, stem = _load(args)
        scenario.apply_env()
        for ov in args.overrides:
            if "=" not in ov:
                raise ConfigError(f"--set expects KEY=VALUE, got {ov!r}")
            key, value = ov.split("=", 1)
            scenario.override(key.strip(), value.strip())
        if args.seed is not None:
            scenario.override("ensemble.seed", str(args.seed), origin="--seed")
        threads = args.threads or int(os.environ.get(ENV_PREFIX + "THREADS", 0)) or os.cpu_count() or 1
        out = args.out or Path(os.environ.get(ENV_PREFIX + "OUT", "out"))
        precision = args.precision or 6
        if not 1 <= precision <= 17:
            raise ConfigError("--precision must be between 1 and 17")
        execute(scenario, out, stem, threads, precision)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalContractError, QuadratureError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
