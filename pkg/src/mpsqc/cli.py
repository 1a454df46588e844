"""Command-line front end.

One TOML file describes a run: where the target comes from, whether the
qubits get reordered, which builder and which refiner to use, and the
bond ceilings for simulation and for the independent verification pass.
`run` executes the whole pipeline and leaves four artifacts in the output
directory (circuit.json, circuit_lowered.json + circuit.qasm, trace.json,
metrics.csv, summary.json); the other subcommands expose the stages one
at a time on serialized artifacts so they can be chained by hand.

The metrics CSV has a fixed column set:

    run_id, stage, layer, sweep_or_iter, infidelity, n_cnot, d_cnot,
    max_entropy, discarded_weight, norm_error, chi_tilde, wall_time_s

Cells that do not apply to a stage are left empty.  Numbers are written
with a fixed format, so two runs of the same config on the same platform
produce byte-identical files except for the wall_time_s column.
"""

import csv
import hashlib
import io
import json
import math
import time
from pathlib import Path

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:          # 3.10
    import tomli as tomllib

from .bmpd import BmpdConfig, bmpd_build
from .circuit import Circuit, cnot_metrics, lower, simulate
from .loader import (csv_stacked_amplitudes, gaussian_amplitudes,
                     ising_groundstate_exact, levy_amplitudes, lorenz_series)
from .mps import GAUGES, MPS, overlap
from .optimize import ev_sweep, interleaved_pipeline, riemannian_adam
from .reorder import apply_permutation, optimize_permutation
from .smpd import SmpdConfig, smpd_build
from .tci import tci_build


# ---------------------------------------------------------------- MPS files

def save_mps(mps, path):
    """Write an MPS to a .npz file (tensors, gauge data, log-norm)."""
    arrays = {f"t{i}": t for i, t in enumerate(mps.tensors)}
    if mps.singular_values is not None:
        arrays.update({f"s{i}": s
                       for i, s in enumerate(mps.singular_values)})
    meta = {"n": mps.n_sites, "gauge": mps.gauge, "center": mps.center,
            "norm_log": mps.norm_log,
            "discarded_weight": mps.discarded_weight}
    np.savez(path, meta=np.array(json.dumps(meta)), **arrays)


def load_mps(path):
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        tensors = [z[f"t{i}"] for i in range(meta["n"])]
        sv = None
        if meta["gauge"] == "vidal":
            sv = [z[f"s{i}"] for i in range(meta["n"] - 1)]
    return MPS(tensors, meta["gauge"], meta["center"], sv,
               meta["norm_log"], meta["discarded_weight"])


# ----------------------------------------------------------- config schema

_REQUIRED = object()

# (type, default); default None means "optional, pass through as None".
_SOURCE_PARAMS = {
    "ghz": {"n": ("int", _REQUIRED)},
    "basis": {"bits": ("str", _REQUIRED)},
    "gaussian": {"n": ("int", _REQUIRED), "mu": ("float", 0.5),
                 "sigma": ("float", 0.1), "ell": ("float", 1.0),
                 "route": ("str", "tci"), "chi": ("int", 64),
                 "tol": ("float", 1e-12)},
    "levy": {"n": ("int", _REQUIRED), "c": ("float", 32.0),
             "ell": ("float", 2.0 ** 30), "route": ("str", "tci"),
             "chi": ("int", 64), "tol": ("float", 1e-12)},
    "lorenz": {"total_time": ("float", None), "dt": ("float", None),
               "sigma": ("float", 10.0), "rho": ("float", 28.0),
               "beta": ("float", 2.667), "paper_scale": ("bool", False),
               "chi": ("int", 64)},
    "ising": {"n": ("int", _REQUIRED), "hx": ("float", 0.5),
              "eps_svd": ("float", 1e-12)},
    "random": {"n": ("int", _REQUIRED), "chi": ("int", 4)},
    "dense_file": {"path": ("str", _REQUIRED), "chi": ("int", None),
                   "eps_svd": ("float", 1e-12)},
    "mps_file": {"path": ("str", _REQUIRED)},
    "csv_stacked": {"path": ("str", _REQUIRED),
                    "series_length": ("int", _REQUIRED),
                    "max_series": ("int", _REQUIRED), "chi": ("int", None),
                    "eps_svd": ("float", 1e-12)},
}

_HEURISTIC_KEYS = {
    "method": ("str", "smpd"), "layers": ("int", 2),
    "chi_tilde": ("int", 64), "eps_svd": ("float", 1e-8),
    "gauge": ("str", "mixed"), "center": ("int", None),
    "skip_disentangled_bonds": ("bool", True), "alpha": ("float", 2.0),
    "entropy_skip_threshold": ("float", None), "max_iter": ("int", 1000),
    "gtol": ("float", 1e-8),
}

_OPTIMIZER_KEYS = {
    "method": ("str", "ev"), "budget": ("int", 100),
    "beta": ("float", 0.6), "lr": ("float", 1e-4),
    "chi_tilde": ("int", 64), "eps_svd": ("float", 1e-12),
    "interleave": ("bool", False),
}

_REORDER_KEYS = {
    "eta": ("float", 1.0), "restarts": ("int", 16),
    "anneal": ("bool", False), "frozen": ("int_list", ()),
    "chi_max": ("int", None), "eps_svd": ("float", 1e-12),
    "discard_budget": ("float", 1e-8),
}

_SIMULATE_KEYS = {
    "chi_tilde": ("int", 64), "chi_prime": ("int", None),
    "eps_svd": ("float", 1e-12),
}

_TOP_KEYS = ("seed", "out", "source", "reorder", "heuristic", "optimizer",
             "simulate")


def _coerce(path, value, kind):
    if kind == "bool":
        if not isinstance(value, bool):
            raise ValueError(f"{path}: expected a boolean")
        return value
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValueError(f"{path}: expected an integer")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"{path}: expected a number")
        return float(value)
    if kind == "str":
        if not isinstance(value, str):
            raise ValueError(f"{path}: expected a string")
        return value
    if kind == "int_list":
        if not isinstance(value, (list, tuple)) or \
                any(isinstance(v, bool) or not isinstance(v, int)
                    for v in value):
            raise ValueError(f"{path}: expected a list of integers")
        return tuple(value)
    raise AssertionError(kind)


def _check_table(name, table, schema):
    if not isinstance(table, dict):
        raise ValueError(f"{name}: expected a table")
    out = {}
    for key, value in table.items():
        if key not in schema:
            raise ValueError(f"unknown config key {name}.{key}")
        out[key] = _coerce(f"{name}.{key}", value, schema[key][0])
    for key, (_, default) in schema.items():
        if key in out:
            continue
        if default is _REQUIRED:
            raise ValueError(f"missing config key {name}.{key}")
        out[key] = default
    return out


def parse_config(text):
    """Parse and validate a TOML run configuration.

    Unknown keys are rejected anywhere in the document, `seed` and
    `source.kind` are mandatory, and every stage knob gets its default
    when absent.  [reorder] and [optimizer] are optional stages; leaving
    the section out skips the stage entirely.
    """
    doc = tomllib.loads(text)
    for key in doc:
        if key not in _TOP_KEYS:
            raise ValueError(f"unknown config key {key}")
    if "seed" not in doc:
        raise ValueError("missing config key seed")
    cfg = {"seed": _coerce("seed", doc["seed"], "int"),
           "out": _coerce("out", doc["out"], "str") if "out" in doc
           else None}

    if "source" not in doc or not isinstance(doc["source"], dict):
        raise ValueError("missing config table [source]")
    src = dict(doc["source"])
    kind = src.pop("kind", None)
    if kind not in _SOURCE_PARAMS:
        raise ValueError(
            f"source.kind must be one of {sorted(_SOURCE_PARAMS)}")
    cfg["source"] = {"kind": kind,
                     **_check_table("source", src, _SOURCE_PARAMS[kind])}

    cfg["heuristic"] = _check_table("heuristic", doc.get("heuristic", {}),
                                    _HEURISTIC_KEYS)
    cfg["reorder"] = (_check_table("reorder", doc["reorder"], _REORDER_KEYS)
                      if "reorder" in doc else None)
    cfg["optimizer"] = (_check_table("optimizer", doc["optimizer"],
                                     _OPTIMIZER_KEYS)
                        if "optimizer" in doc else None)
    cfg["simulate"] = _check_table("simulate", doc.get("simulate", {}),
                                   _SIMULATE_KEYS)

    h, o, s = cfg["heuristic"], cfg["optimizer"], cfg["simulate"]
    if h["method"] not in ("smpd", "bmpd"):
        raise ValueError("heuristic.method must be 'smpd' or 'bmpd'")
    if h["gauge"] not in GAUGES:
        raise ValueError(f"heuristic.gauge must be one of {GAUGES}")
    if h["layers"] < 1:
        raise ValueError("heuristic.layers must be positive")
    if o is not None:
        if o["method"] not in ("ev", "riemannian"):
            raise ValueError("optimizer.method must be 'ev' or 'riemannian'")
        if o["budget"] < 1:
            raise ValueError("optimizer.budget must be positive")
    route = cfg["source"].get("route")
    if route is not None and route not in ("tci", "dense"):
        raise ValueError("source.route must be 'tci' or 'dense'")
    for key in ("chi_tilde", "chi_prime"):
        if s.get(key) is not None and s[key] < 1:
            raise ValueError(f"simulate.{key} must be positive")
    return cfg


def config_run_id(config):
    """Short deterministic id: hash of the resolved config minus `out`."""
    doc = {k: v for k, v in config.items() if k != "out"}
    blob = json.dumps(doc, sort_keys=True, default=str).encode()
    return hashlib.sha1(blob).hexdigest()[:12]


# ----------------------------------------------------------------- targets

def _ghz_mps(n):
    if n < 2:
        raise ValueError("ghz needs at least two qubits")
    first = np.zeros((2, 1, 2), dtype=complex)
    first[0, 0, 0] = first[1, 0, 1] = 2.0 ** -0.5
    mid = np.zeros((2, 2, 2), dtype=complex)
    mid[0, 0, 0] = mid[1, 1, 1] = 1.0
    last = np.zeros((2, 2, 1), dtype=complex)
    last[0, 0, 0] = last[1, 1, 0] = 1.0
    return MPS([first] + [mid.copy() for _ in range(n - 2)] + [last])


def build_target(source, seed):
    """Construct the target MPS described by a validated [source] table.

    Returns (mps, info) where info records provenance details worth
    keeping in the trace (TCI call counts, ground-state energy, ...).
    """
    kind = source["kind"]
    info = {"kind": kind}
    if kind == "ghz":
        return _ghz_mps(source["n"]), info
    if kind == "basis":
        bits = source["bits"]
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError("basis.bits must be a nonempty 0/1 string")
        return MPS.product_state([int(b) for b in bits]), info
    if kind in ("gaussian", "levy"):
        if kind == "gaussian":
            grid = gaussian_amplitudes(source["n"], mu=source["mu"],
                                       sigma=source["sigma"],
                                       ell=source["ell"])
        else:
            grid = levy_amplitudes(source["n"], c=source["c"],
                                   ell=source["ell"])
        if source["route"] == "dense":
            mps = MPS.from_dense(grid.to_dense(), eps_svd=source["tol"],
                                 chi_max=source["chi"])
            info["route"] = "dense"
            return mps, info
        mps, stats = tci_build(grid, tol=source["tol"],
                               chi_max=source["chi"], seed=seed)
        info["route"] = "tci"
        info["tci"] = {"n_calls": stats.n_calls, "n_sweeps": stats.n_sweeps,
                       "max_eps": stats.max_eps,
                       "bond_dims": list(stats.bond_dims)}
        return mps, info
    if kind == "lorenz":
        vec = lorenz_series(sigma=source["sigma"], rho=source["rho"],
                            beta=source["beta"],
                            total_time=source["total_time"],
                            dt=source["dt"],
                            paper_scale=source["paper_scale"])
        info["n_samples"] = int(vec.size)
        return MPS.from_dense(vec, chi_max=source["chi"]), info
    if kind == "ising":
        mps, energy = ising_groundstate_exact(source["n"], source["hx"],
                                              eps_svd=source["eps_svd"])
        info["energy"] = float(energy)
        return mps, info
    if kind == "random":
        rng = np.random.default_rng(seed)
        return MPS.random(source["n"], source["chi"], rng), info
    if kind == "dense_file":
        vec = np.load(source["path"])
        return MPS.from_dense(vec, eps_svd=source["eps_svd"],
                              chi_max=source["chi"]), info
    if kind == "mps_file":
        return load_mps(source["path"]), info
    if kind == "csv_stacked":
        vec = csv_stacked_amplitudes(source["path"],
                                     source["series_length"],
                                     source["max_series"])
        info["n_samples"] = int(vec.size)
        return MPS.from_dense(vec, eps_svd=source["eps_svd"],
                              chi_max=source["chi"]), info
    raise AssertionError(kind)


# ------------------------------------------------------------ metrics rows

CSV_COLUMNS = ("run_id", "stage", "layer", "sweep_or_iter", "infidelity",
               "n_cnot", "d_cnot", "max_entropy", "discarded_weight",
               "norm_error", "chi_tilde", "wall_time_s")


def _cell(value, fmt=".12e"):
    if value is None or value == "":
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), fmt)


def _metrics_row(run_id, stage, layer="", sweep_or_iter="", infidelity="",
                 n_cnot="", d_cnot="", max_entropy="", discarded_weight="",
                 norm_error="", chi_tilde="", wall_time_s=""):
    if infidelity != "" and not -1e-12 <= float(infidelity) <= 1.0 + 1e-9:
        raise ValueError(f"infidelity out of range: {infidelity}")
    if infidelity != "":
        infidelity = max(0.0, float(infidelity))
    for name, v in (("n_cnot", n_cnot), ("d_cnot", d_cnot)):
        if v != "" and int(v) < 0:
            raise ValueError(f"{name} must be nonnegative")
    return {"run_id": run_id, "stage": stage, "layer": _cell(layer),
            "sweep_or_iter": _cell(sweep_or_iter),
            "infidelity": _cell(infidelity), "n_cnot": _cell(n_cnot),
            "d_cnot": _cell(d_cnot), "max_entropy": _cell(max_entropy),
            "discarded_weight": _cell(discarded_weight),
            "norm_error": _cell(norm_error), "chi_tilde": _cell(chi_tilde),
            "wall_time_s": _cell(wall_time_s, ".6f")}


def _write_metrics(path, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    Path(path).write_text(buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _tag_layer(tag):
    head = tag.split(":", 1)[0]
    if head.startswith("l") and head[1:].isdigit():
        return int(head[1:])
    return None


_SUB_RANK = {"odd": 0, "even": 1}


def _counts_upto(lowered, layer, sublayer=None):
    """CNOT count/depth of the gates placed up to (layer, sublayer).

    Layer tags look like "l3" or "l3:odd"; untagged gates (the closing
    single-qubit layer) belong to the full circuit only."""
    keep = []
    for g in lowered.gates:
        k = _tag_layer(g.tag)
        if k is None or k > layer:
            continue
        if k == layer and sublayer is not None:
            sub = g.tag.split(":", 1)[1] if ":" in g.tag else ""
            if _SUB_RANK.get(sub, 0) > _SUB_RANK.get(sublayer, 1):
                continue
        keep.append(g)
    return cnot_metrics(Circuit(lowered.n_qubits, keep))


def _measure(circuit, target_n, chi, eps):
    state, disc, nerr = simulate(circuit, chi_max=chi, eps_svd=eps)
    f = abs(overlap(state.normalized(), target_n))
    inf = max(0.0, 1.0 - f * f)
    ent = max(state.bond_entropy_profile(), default=0.0)
    return inf, disc, nerr, ent


# ---------------------------------------------------------------- pipeline

VERIFY_GAP_THRESHOLD = 1e-4


def run_pipeline(config, out_dir):
    """Execute load -> [reorder] -> build -> [optimize] -> simulate ->
    verify and leave the artifacts in `out_dir`.

    Returns the summary dict.  On a stage failure the exception
    propagates after whatever rows and traces exist have been written,
    with summary.json carrying status="failed" and the failed stage.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    run_id = config_run_id(config)
    seed = config["seed"]
    rows, trace = [], {"run_id": run_id}
    summary = {"run_id": run_id, "status": "failed", "stages": [],
               "artifacts_partial": True}
    stage = "load"
    t_run = time.perf_counter()
    try:
        t0 = time.perf_counter()
        target, info = build_target(config["source"], seed)
        target = target.canonicalize("vidal")
        trace["load"] = info
        rows.append(_metrics_row(
            run_id, "load",
            max_entropy=max(target.bond_entropy_profile(), default=0.0),
            discarded_weight=target.discarded_weight,
            chi_tilde=config["source"].get("chi", ""),
            wall_time_s=time.perf_counter() - t0))
        summary["stages"].append("load")
        summary["n_qubits"] = target.n_sites

        if config["reorder"] is not None:
            stage = "reorder"
            t0 = time.perf_counter()
            r = config["reorder"]
            plan = optimize_permutation(
                target.qmi_matrix(), eta=r["eta"],
                frozen=set(r["frozen"]) or None, restarts=r["restarts"],
                seed=seed, anneal=r["anneal"])
            target = apply_permutation(
                target, plan, chi_max=r["chi_max"], eps_svd=r["eps_svd"],
                discard_budget=r["discard_budget"]).canonicalize("vidal")
            trace["reorder"] = {
                "pi": list(plan.pi), "cost_before": plan.cost_before,
                "cost_after": plan.cost_after,
                "entropy_before_max": plan.entropy_before_max,
                "entropy_after_max": plan.entropy_after_max}
            rows.append(_metrics_row(
                run_id, "reorder",
                max_entropy=max(target.bond_entropy_profile(), default=0.0),
                discarded_weight=target.discarded_weight,
                wall_time_s=time.perf_counter() - t0))
            summary["stages"].append("reorder")

        target_n = target.normalized()
        h = config["heuristic"]
        o = config["optimizer"]
        interleave = o is not None and o["interleave"]

        if interleave:
            stage = "interleave"
            t0 = time.perf_counter()
            circuit, itrace = interleaved_pipeline(
                target_n, heuristic=h["method"], optimizer=o["method"],
                n_layers=h["layers"], budget=o["budget"],
                chi_tilde=h["chi_tilde"], eps_svd=h["eps_svd"],
                beta=o["beta"], lr=o["lr"], seed=seed, gauge=h["gauge"],
                center=h["center"], alpha=h["alpha"])
            dt = time.perf_counter() - t0
            trace["interleave"] = itrace
            lowered = lower(circuit)
            n_cnot, d_cnot = cnot_metrics(lowered)
            for i, entry in enumerate(itrace):
                last = i == len(itrace) - 1
                rows.append(_metrics_row(
                    run_id, entry["stage"], layer=entry["layer"],
                    infidelity=entry["infidelity"],
                    n_cnot=n_cnot if last else "",
                    d_cnot=d_cnot if last else "",
                    chi_tilde=h["chi_tilde"], wall_time_s=dt))
            summary["stages"].append("interleave")
        else:
            stage = h["method"]
            t0 = time.perf_counter()
            if h["method"] == "smpd":
                circuit, btrace = smpd_build(target_n, SmpdConfig(
                    gauge=h["gauge"], center=h["center"],
                    max_layers=h["layers"], chi_tilde=h["chi_tilde"],
                    eps_svd=h["eps_svd"],
                    skip_disentangled_bonds=h["skip_disentangled_bonds"]))
            else:
                circuit, btrace = bmpd_build(target_n, BmpdConfig(
                    alpha=h["alpha"], max_layers=h["layers"],
                    chi_tilde=h["chi_tilde"], eps_svd=h["eps_svd"],
                    entropy_skip_threshold=h["entropy_skip_threshold"],
                    max_iter=h["max_iter"], gtol=h["gtol"]))
            dt = time.perf_counter() - t0
            trace["heuristic"] = btrace
            lowered = lower(circuit)
            final_counts = cnot_metrics(lowered)
            for i, entry in enumerate(btrace):
                last = i == len(btrace) - 1
                k = entry.get("layer", 0)
                nc, dc = (final_counts if last
                          else _counts_upto(lowered, k,
                                            entry.get("sublayer")))
                ent = entry.get("max_entropy")
                if ent is None and "entropies" in entry:
                    ent = max(entry["entropies"], default=0.0)
                rows.append(_metrics_row(
                    run_id, h["method"], layer=k, sweep_or_iter=i,
                    infidelity=entry.get("prep_infidelity", ""),
                    n_cnot=nc, d_cnot=dc, max_entropy=ent,
                    discarded_weight=entry.get("discarded_weight", ""),
                    chi_tilde=h["chi_tilde"], wall_time_s=dt))
            summary["stages"].append(h["method"])

            if o is not None:
                stage = o["method"]
                t0 = time.perf_counter()
                if o["method"] == "ev":
                    circuit, history = ev_sweep(
                        circuit, target_n, beta=o["beta"],
                        n_sweeps=o["budget"], chi_max=o["chi_tilde"],
                        eps_svd=o["eps_svd"])
                    infids = [max(0.0, 1.0 - f * f) for f in history]
                else:
                    circuit, infids = riemannian_adam(
                        circuit, target_n, lr=o["lr"], n_iter=o["budget"],
                        seed=seed, chi_max=o["chi_tilde"],
                        eps_svd=o["eps_svd"])
                dt = time.perf_counter() - t0
                trace["optimizer"] = {"method": o["method"],
                                      "infidelity": infids}
                lowered = lower(circuit)
                n_cnot, d_cnot = cnot_metrics(lowered)
                for i, inf in enumerate(infids):
                    rows.append(_metrics_row(
                        run_id, o["method"], sweep_or_iter=i,
                        infidelity=inf, n_cnot=n_cnot, d_cnot=d_cnot,
                        chi_tilde=o["chi_tilde"], wall_time_s=dt))
                summary["stages"].append(o["method"])

        n_cnot, d_cnot = cnot_metrics(lowered)
        summary["n_cnot"], summary["d_cnot"] = n_cnot, d_cnot
        (out / "circuit.json").write_text(circuit.to_json(indent=2))
        (out / "circuit_lowered.json").write_text(lowered.to_json(indent=2))
        (out / "circuit.qasm").write_text(lowered.to_qasm2())

        stage = "simulate"
        s = config["simulate"]
        t0 = time.perf_counter()
        inf_sim, disc, nerr, ent = _measure(circuit, target_n,
                                            s["chi_tilde"], s["eps_svd"])
        rows.append(_metrics_row(
            run_id, "simulate", infidelity=inf_sim, n_cnot=n_cnot,
            d_cnot=d_cnot, max_entropy=ent, discarded_weight=disc,
            norm_error=nerr, chi_tilde=s["chi_tilde"],
            wall_time_s=time.perf_counter() - t0))
        summary["stages"].append("simulate")
        summary["infidelity"] = inf_sim

        stage = "verify"
        chi_prime = s["chi_prime"] or 4 * s["chi_tilde"]
        t0 = time.perf_counter()
        inf_ver, disc, nerr, ent = _measure(circuit, target_n,
                                            chi_prime, s["eps_svd"])
        rows.append(_metrics_row(
            run_id, "verify", infidelity=inf_ver, n_cnot=n_cnot,
            d_cnot=d_cnot, max_entropy=ent, discarded_weight=disc,
            norm_error=nerr, chi_tilde=chi_prime,
            wall_time_s=time.perf_counter() - t0))
        summary["stages"].append("verify")
        summary["infidelity_verify"] = inf_ver
        summary["verify_gap"] = abs(inf_sim - inf_ver)
        summary["verify_gap_flag"] = \
            summary["verify_gap"] > VERIFY_GAP_THRESHOLD
        summary["status"] = "ok"
        summary["artifacts_partial"] = False
    except Exception as e:
        summary["failed_stage"] = stage
        summary["error"] = f"{type(e).__name__}: {e}"
        raise
    finally:
        summary["wall_time_s"] = time.perf_counter() - t_run
        _write_metrics(out / "metrics.csv", rows)
        (out / "trace.json").write_text(
            json.dumps(_jsonable(trace), indent=2))
        (out / "summary.json").write_text(
            json.dumps(_jsonable(summary), indent=2))
    return summary


# ------------------------------------------------------------------ report

def _read_metrics(paths):
    runs = {}
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or \
                    tuple(reader.fieldnames) != CSV_COLUMNS:
                raise ValueError(f"{path}: not a metrics CSV")
            for row in reader:
                runs.setdefault(row["run_id"], []).append(row)
    return runs


def collect_runs(paths):
    """One record per run_id: method label, final simulate metrics, and
    the verification gap when a verify row exists."""
    runs = _read_metrics(paths)
    if not runs:
        raise ValueError("no metrics rows found")
    records = []
    for run_id, rows in runs.items():
        stages = []
        for row in rows:
            if row["stage"] not in stages:
                stages.append(row["stage"])
        method = "+".join(s for s in stages
                          if s not in ("load", "reorder", "simulate",
                                       "verify"))
        final = [r for r in rows if r["stage"] == "simulate"]
        if not final:
            raise ValueError(f"run {run_id} has no simulate row")
        final = final[-1]
        ver = [r for r in rows if r["stage"] == "verify"]
        rec = {"run_id": run_id, "method": method or "none",
               "infidelity": float(final["infidelity"]),
               "n_cnot": int(final["n_cnot"]),
               "d_cnot": int(final["d_cnot"])}
        if ver:
            rec["verify_gap"] = abs(float(ver[-1]["infidelity"])
                                    - rec["infidelity"])
        records.append(rec)
    return records


def pareto_front(records, cost_key):
    """Non-dominated subset minimizing (cost_key, infidelity), sorted by
    cost; ties kept only when strictly better on the other axis."""
    def dominates(a, b):
        return (a[cost_key] <= b[cost_key]
                and a["infidelity"] <= b["infidelity"]
                and (a[cost_key] < b[cost_key]
                     or a["infidelity"] < b["infidelity"]))

    front = [r for r in records
             if not any(dominates(other, r) for other in records)]
    return sorted(front, key=lambda r: (r[cost_key], r["infidelity"]))


def write_report(records, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["# Run report", "",
             "| run_id | method | infidelity | n_cnot | d_cnot |"
             " verify_gap |", "|---|---|---|---|---|---|"]
    for r in sorted(records, key=lambda r: r["run_id"]):
        gap = format(r["verify_gap"], ".3e") if "verify_gap" in r else ""
        lines.append(f"| {r['run_id']} | {r['method']} |"
                     f" {r['infidelity']:.6e} | {r['n_cnot']} |"
                     f" {r['d_cnot']} | {gap} |")
    lines += ["", "## Best per metric", ""]
    for key in ("infidelity", "n_cnot", "d_cnot"):
        best = min(records, key=lambda r: (r[key], r["infidelity"]))
        lines.append(f"- lowest {key}: {best['method']}"
                     f" (run {best['run_id']}, {key}={best[key]},"
                     f" infidelity={best['infidelity']:.6e})")
    for key in ("n_cnot", "d_cnot"):
        front = pareto_front(records, key)
        lines += ["", f"## Pareto frontier: {key} vs infidelity", ""]
        for r in front:
            lines.append(f"- {r['method']} (run {r['run_id']}):"
                         f" {key}={r[key]},"
                         f" infidelity={r['infidelity']:.6e}")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["run_id", "method", key, "infidelity"])
        for r in front:
            w.writerow([r["run_id"], r["method"], r[key],
                        format(r["infidelity"], ".12e")])
        (out / f"pareto_{key}.csv").write_text(buf.getvalue())
    (out / "report.md").write_text("\n".join(lines) + "\n")


# --------------------------------------------------------------------- CLI

def _parse_scalar(text):
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            pass
    if text in ("true", "false"):
        return text == "true"
    return text


def _params_to_source(target, params):
    src = {"kind": target}
    for item in params:
        if "=" not in item:
            raise click.UsageError(f"--param needs key=value, got {item!r}")
        key, _, value = item.partition("=")
        src[key] = _parse_scalar(value)
    return src


def _validated_source(target, params):
    if target not in _SOURCE_PARAMS:
        raise click.UsageError(
            f"unknown target {target!r}; choose from "
            f"{sorted(_SOURCE_PARAMS)}")
    src = _params_to_source(target, params)
    kind = src.pop("kind")
    try:
        return {"kind": kind,
                **_check_table("source", src, _SOURCE_PARAMS[kind])}
    except ValueError as e:
        raise click.UsageError(str(e))


@click.group()
def main():
    """Compile matrix product states into nearest-neighbor circuits."""


@main.command("load")
@click.option("--target", required=True,
              help="Source kind (ghz, gaussian, levy, lorenz, ising, "
                   "random, basis, dense_file, mps_file, csv_stacked).")
@click.option("--param", "params", multiple=True, metavar="KEY=VALUE",
              help="Source parameter; repeatable.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(),
              help="Output .npz file.")
def cmd_load(target, params, seed, out):
    """Build a target MPS and save it."""
    src = _validated_source(target, params)
    try:
        mps, info = build_target(src, seed)
    except ValueError as e:
        raise click.ClickException(str(e))
    save_mps(mps, out)
    info.update(n_qubits=mps.n_sites, bond_dims=list(mps.bond_dims()),
                max_entropy=max(mps.canonicalize(
                    "vidal").bond_entropy_profile(), default=0.0))
    click.echo(json.dumps(_jsonable(info), indent=2))


@main.command("reorder")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--plan", "plan_path", type=click.Path(),
              help="Where to write the permutation plan JSON.")
@click.option("--eta", default=1.0, show_default=True, type=float)
@click.option("--restarts", default=16, show_default=True, type=int)
@click.option("--anneal", is_flag=True)
@click.option("--frozen", default="", help="Comma-separated site indices.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--discard-budget", default=1e-8, show_default=True,
              type=float)
def cmd_reorder(in_path, out, plan_path, eta, restarts, anneal, frozen,
                seed, discard_budget):
    """Entanglement-reducing qubit permutation of a stored MPS."""
    mps = load_mps(in_path).canonicalize("vidal")
    frozen_set = ({int(x) for x in frozen.split(",") if x.strip()}
                  or None)
    plan = optimize_permutation(mps.qmi_matrix(), eta=eta,
                                frozen=frozen_set, restarts=restarts,
                                seed=seed, anneal=anneal)
    try:
        permuted = apply_permutation(mps, plan,
                                     discard_budget=discard_budget)
    except RuntimeError as e:
        raise click.ClickException(str(e))
    save_mps(permuted, out)
    doc = {"pi": list(plan.pi), "cost_before": plan.cost_before,
           "cost_after": plan.cost_after,
           "entropy_before_max": plan.entropy_before_max,
           "entropy_after_max": plan.entropy_after_max}
    if plan_path:
        Path(plan_path).write_text(json.dumps(_jsonable(doc), indent=2))
    click.echo(json.dumps(_jsonable(doc), indent=2))


def _build_cmd(method, target_path, out, trace_path, **knobs):
    mps = load_mps(target_path).canonicalize("vidal").normalized()
    if method == "smpd":
        circuit, btrace = smpd_build(mps, SmpdConfig(**knobs))
    else:
        circuit, btrace = bmpd_build(mps, BmpdConfig(**knobs))
    Path(out).write_text(circuit.to_json(indent=2))
    if trace_path:
        Path(trace_path).write_text(
            json.dumps(_jsonable(btrace), indent=2))
    n_cnot, d_cnot = cnot_metrics(lower(circuit))
    click.echo(json.dumps({"n_gates": len(circuit.gates),
                           "n_cnot": n_cnot, "d_cnot": d_cnot,
                           "final_infidelity":
                           btrace[-1]["prep_infidelity"]}, indent=2))


@main.command("smpd")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--trace", "trace_path", type=click.Path())
@click.option("--layers", default=2, show_default=True, type=int)
@click.option("--chi-tilde", default=64, show_default=True, type=int)
@click.option("--eps-svd", default=1e-8, show_default=True, type=float)
@click.option("--gauge", default="mixed", show_default=True,
              type=click.Choice(GAUGES))
@click.option("--center", default=None, type=int)
def cmd_smpd(in_path, out, trace_path, layers, chi_tilde, eps_svd, gauge,
             center):
    """Sequential staircase construction from a stored MPS."""
    _build_cmd("smpd", in_path, out, trace_path, gauge=gauge,
               center=center, max_layers=layers, chi_tilde=chi_tilde,
               eps_svd=eps_svd)


@main.command("bmpd")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--trace", "trace_path", type=click.Path())
@click.option("--layers", default=2, show_default=True, type=int)
@click.option("--chi-tilde", default=64, show_default=True, type=int)
@click.option("--eps-svd", default=1e-8, show_default=True, type=float)
@click.option("--alpha", default=2.0, show_default=True, type=float)
def cmd_bmpd(in_path, out, trace_path, layers, chi_tilde, eps_svd, alpha):
    """Brick-wall disentangler construction from a stored MPS."""
    _build_cmd("bmpd", in_path, out, trace_path, alpha=alpha,
               max_layers=layers, chi_tilde=chi_tilde, eps_svd=eps_svd)


@main.command("optimize")
@click.option("--circuit", "circuit_path", required=True,
              type=click.Path(exists=True))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--history", "history_path", type=click.Path())
@click.option("--optimizer", default="ev", show_default=True,
              type=click.Choice(["ev", "riemannian"]))
@click.option("--budget", default=100, show_default=True, type=int)
@click.option("--beta", default=0.6, show_default=True, type=float)
@click.option("--lr", default=1e-4, show_default=True, type=float)
@click.option("--chi-tilde", default=64, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
def cmd_optimize(circuit_path, in_path, out, history_path, optimizer,
                 budget, beta, lr, chi_tilde, seed):
    """Variational refinement of a stored circuit against a stored MPS."""
    circuit = Circuit.from_json(Path(circuit_path).read_text())
    target = load_mps(in_path).canonicalize("vidal").normalized()
    if optimizer == "ev":
        refined, history = ev_sweep(circuit, target, beta=beta,
                                    n_sweeps=budget, chi_max=chi_tilde)
        infids = [max(0.0, 1.0 - f * f) for f in history]
    else:
        refined, infids = riemannian_adam(circuit, target, lr=lr,
                                          n_iter=budget, seed=seed,
                                          chi_max=chi_tilde)
    Path(out).write_text(refined.to_json(indent=2))
    if history_path:
        Path(history_path).write_text(
            json.dumps(_jsonable(infids), indent=2))
    click.echo(json.dumps({"initial_infidelity": infids[0],
                           "final_infidelity": infids[-1],
                           "entries": len(infids)}, indent=2))


@main.command("simulate")
@click.option("--circuit", "circuit_path", required=True,
              type=click.Path(exists=True))
@click.option("--in", "in_path", required=True, type=click.Path(exists=True),
              help="Target MPS the prepared state is compared against.")
@click.option("--chi-tilde", default=64, show_default=True, type=int)
@click.option("--eps-svd", default=1e-12, show_default=True, type=float)
def cmd_simulate(circuit_path, in_path, chi_tilde, eps_svd):
    """Run a stored circuit through the MPS engine and report metrics."""
    circuit = Circuit.from_json(Path(circuit_path).read_text())
    target = load_mps(in_path).canonicalize("vidal").normalized()
    inf, disc, nerr, ent = _measure(circuit, target, chi_tilde, eps_svd)
    n_cnot, d_cnot = cnot_metrics(lower(circuit))
    click.echo(json.dumps({"infidelity": inf, "n_cnot": n_cnot,
                           "d_cnot": d_cnot, "max_entropy": ent,
                           "discarded_weight": disc, "norm_error": nerr,
                           "chi_tilde": chi_tilde}, indent=2))


@main.command("run")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True))
@click.option("--out", default=None, type=click.Path(),
              help="Output directory (overrides the config's `out`).")
def cmd_run(config_path, out):
    """Execute a full pipeline described by a TOML config."""
    try:
        config = parse_config(Path(config_path).read_text())
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise click.ClickException(f"bad config: {e}")
    out_dir = out or config["out"]
    if not out_dir:
        raise click.ClickException("no output directory: set `out` in the "
                                   "config or pass --out")
    try:
        summary = run_pipeline(config, out_dir)
    except Exception as e:
        raise click.ClickException(
            f"pipeline failed ({type(e).__name__}: {e}); partial "
            f"artifacts in {out_dir}")
    if summary.get("verify_gap_flag"):
        click.echo(f"warning: infidelity changed by "
                   f"{summary['verify_gap']:.3e} under the verification "
                   f"bond ceiling; simulation ceiling too tight", err=True)
    click.echo(json.dumps(_jsonable(summary), indent=2))


@main.command("report")
@click.argument("csvs", nargs=-1, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(),
              help="Output directory for report.md and frontier CSVs.")
def cmd_report(csvs, out):
    """Aggregate metrics CSVs: best method per metric, Pareto frontiers."""
    if not csvs:
        raise click.UsageError("no metrics files given")
    try:
        records = collect_runs(csvs)
    except ValueError as e:
        raise click.ClickException(str(e))
    write_report(records, out)
    click.echo(f"report written to {out} ({len(records)} runs)")


if __name__ == "__main__":
    main()
