"""Run orchestration: flat key=value configs, figure presets, CSV/JSON output.

Exit codes: 0 success, 2 config error, 3 numerical failure.  On numerical
failure a machine-readable JSON error object is printed to stdout.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    IonJCError,
    ParseError,
    UnknownPreset,
    ValidationError,
)
from .fock_core import ModelParams, TruncationPolicy

MODES = (
    "sigma22-classical-ordered",
    "sigma22-classical-noordering",
    "sigma22-quantized",
    "compare-ordering",
    "compare-pump",
    "pfunction",
)

CLASSICAL_MODES = {
    "sigma22-classical-ordered",
    "sigma22-classical-noordering",
    "compare-ordering",
    "compare-pump",
}


@dataclass
class GridSpec:
    re_min: float = -4.0
    re_max: float = 4.0
    n_re: int = 161
    im_min: float = -4.0
    im_max: float = 4.0
    n_im: int = 161


@dataclass
class RunConfig:
    """Validated inputs of one run; complex inputs are modulus/phase pairs."""

    mode: str
    k: int
    eta: float
    delta_phi: float = 0.0
    delta_omega_tilde: float = 0.0
    nu_tilde: float = 0.0
    omega21_tilde: float = 0.0
    r: float | None = None
    electronic: int | None = None
    alpha0_abs: float = 0.0
    alpha0_arg: float = 0.0
    beta0_abs: float | None = None
    beta0_arg: float = 0.0
    beta0_abs_list: tuple = ()
    t_start: float = 0.0
    t_end: float | None = None
    n_points: int = 2000
    snapshots: tuple = ()
    w: float = 1.7
    quadrature_order: int = 200
    grid: GridSpec = None
    tail_epsilon: float = 1e-12
    n_max_motion: int | None = None
    m_max_pump: int | None = None
    ode_tol: float = 1e-10
    divergence_threshold: float = 0.1
    out: str | None = None

    def __post_init__(self):
        if self.grid is None:
            self.grid = GridSpec()

    def params(self) -> ModelParams:
        return ModelParams(
            k=self.k,
            eta=self.eta,
            delta_phi=self.delta_phi,
            delta_omega_tilde=self.delta_omega_tilde,
            nu_tilde=self.nu_tilde,
            omega21_tilde=self.omega21_tilde,
        )

    def policy(self) -> TruncationPolicy:
        return TruncationPolicy(
            n_max_motion=self.n_max_motion,
            m_max_pump=self.m_max_pump,
            tail_epsilon=self.tail_epsilon,
        )

    def alpha0(self) -> complex:
        return self.alpha0_abs * complex(math.cos(self.alpha0_arg), math.sin(self.alpha0_arg))

    def beta0(self) -> complex:
        b = self.beta0_abs or 0.0
        return b * complex(math.cos(self.beta0_arg), math.sin(self.beta0_arg))


_INT_KEYS = {"k", "n_points", "quadrature_order", "electronic", "n_max_motion",
             "m_max_pump", "grid_n_re", "grid_n_im"}
_STR_KEYS = {"mode", "out"}
_LIST_KEYS = {"snapshots", "beta0_abs_list"}
_GRID_KEYS = {"grid_re_min", "grid_re_max", "grid_n_re", "grid_im_min", "grid_im_max",
              "grid_n_im"}
_FLOAT_KEYS = {
    "eta", "delta_phi", "delta_omega_tilde", "nu_tilde", "omega21_tilde", "r",
    "alpha0_abs", "alpha0_arg", "beta0_abs", "beta0_arg", "t_start", "t_end",
    "w", "tail_epsilon", "ode_tol", "divergence_threshold",
}
_ALL_KEYS = _INT_KEYS | _STR_KEYS | _LIST_KEYS | _GRID_KEYS | _FLOAT_KEYS


def parse_config(text: str) -> RunConfig:
    """Parse flat key=value text (one pair per line, # comments) and validate."""
    raw = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(line_no, f"expected key=value, got {stripped!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _ALL_KEYS:
            raise ParseError(line_no, f"unknown key {key!r}")
        if key in raw:
            raise ParseError(line_no, f"duplicate key {key!r}")
        raw[key] = (line_no, value)
    return _config_from_raw(raw)


def _convert(key: str, value: str, line_no: int):
    try:
        if key in _STR_KEYS:
            return value
        if key in _INT_KEYS:
            return int(value)
        if key in _LIST_KEYS:
            return tuple(float(part) for part in value.split(",") if part.strip())
        return float(value)
    except ValueError:
        raise ParseError(line_no, f"cannot parse value for {key!r}: {value!r}")


def _config_from_raw(raw: dict) -> RunConfig:
    kwargs = {}
    grid_kwargs = {}
    for key, (line_no, value) in raw.items():
        converted = _convert(key, value, line_no)
        if key in _GRID_KEYS:
            grid_kwargs[key.removeprefix("grid_")] = converted
        else:
            kwargs[key] = converted
    if grid_kwargs:
        kwargs["grid"] = GridSpec(**grid_kwargs)
    if "mode" not in kwargs:
        raise ValidationError("mode", "required")
    if "k" not in kwargs:
        raise ValidationError("k", "required")
    if "eta" not in kwargs:
        raise ValidationError("eta", "required")
    config = RunConfig(**kwargs)
    validate_config(config)
    return config


def validate_config(config: RunConfig) -> None:
    if config.mode not in MODES:
        raise ValidationError("mode", f"must be one of {', '.join(MODES)}")
    if config.k < 0:
        raise ValidationError("k", "must be a non-negative integer")
    if not config.eta > 0:
        raise ValidationError("eta", "must be > 0")
    if not (0.0 < config.tail_epsilon < 1.0):
        raise ValidationError("tail_epsilon", "must lie in (0, 1)")
    if config.alpha0_abs < 0:
        raise ValidationError("alpha0_abs", "must be >= 0")
    if config.electronic is None:
        raise ValidationError("electronic", "required (initial electronic level 1 or 2)")
    if config.electronic not in (1, 2):
        raise ValidationError("electronic", "must be 1 or 2")
    if config.mode == "pfunction":
        if config.electronic != 2:
            raise ValidationError("electronic", "pfunction runs start from level 2")
        if not config.snapshots:
            raise ValidationError("snapshots", "required for pfunction mode")
        if config.beta0_abs is None:
            raise ValidationError("beta0_abs", "required for pfunction mode")
        if not config.w > 0:
            raise ValidationError("w", "must be > 0")
        if config.quadrature_order < 64:
            raise ValidationError("quadrature_order", "must be >= 64")
        if config.grid.n_re < 2 or config.grid.n_im < 2:
            raise ValidationError("grid_n_re", "grid must have >= 2 points per axis")
    else:
        if config.electronic != 1:
            raise ValidationError("electronic", f"{config.mode} runs start from level 1")
        if config.t_end is None:
            raise ValidationError("t_end", "required")
        if not config.t_end > config.t_start:
            raise ValidationError("t_end", "must exceed t_start")
        if config.n_points < 2:
            raise ValidationError("n_points", "must be >= 2")
    if config.mode in CLASSICAL_MODES and config.r is None:
        raise ValidationError("r", f"required for {config.mode}")
    if config.mode == "sigma22-quantized" and config.beta0_abs is None:
        raise ValidationError("beta0_abs", "required for sigma22-quantized")
    if config.mode == "compare-pump" and not config.beta0_abs_list:
        raise ValidationError("beta0_abs_list", "required for compare-pump")
    if config.ode_tol <= 0:
        raise ValidationError("ode_tol", "must be > 0")


def serialize_config(config: RunConfig) -> str:
    """Emit the flat key=value text; parse(serialize(c)) == c."""
    lines = [f"mode = {config.mode}"]

    def emit(key, value):
        if isinstance(value, float):
            lines.append(f"{key} = {value!r}")
        else:
            lines.append(f"{key} = {value}")

    emit("k", config.k)
    emit("eta", config.eta)
    emit("delta_phi", config.delta_phi)
    emit("delta_omega_tilde", config.delta_omega_tilde)
    emit("nu_tilde", config.nu_tilde)
    emit("omega21_tilde", config.omega21_tilde)
    if config.r is not None:
        emit("r", config.r)
    emit("electronic", config.electronic)
    emit("alpha0_abs", config.alpha0_abs)
    emit("alpha0_arg", config.alpha0_arg)
    if config.beta0_abs is not None:
        emit("beta0_abs", config.beta0_abs)
        emit("beta0_arg", config.beta0_arg)
    if config.beta0_abs_list:
        lines.append("beta0_abs_list = " + ",".join(repr(b) for b in config.beta0_abs_list))
    if config.mode == "pfunction":
        lines.append("snapshots = " + ",".join(repr(t) for t in config.snapshots))
        emit("w", config.w)
        emit("quadrature_order", config.quadrature_order)
        g = config.grid
        emit("grid_re_min", g.re_min)
        emit("grid_re_max", g.re_max)
        emit("grid_n_re", g.n_re)
        emit("grid_im_min", g.im_min)
        emit("grid_im_max", g.im_max)
        emit("grid_n_im", g.n_im)
    else:
        emit("t_start", config.t_start)
        emit("t_end", config.t_end)
        emit("n_points", config.n_points)
    emit("tail_epsilon", config.tail_epsilon)
    if config.n_max_motion is not None:
        emit("n_max_motion", config.n_max_motion)
    if config.m_max_pump is not None:
        emit("m_max_pump", config.m_max_pump)
    if config.mode in CLASSICAL_MODES:
        emit("ode_tol", config.ode_tol)
    if config.mode == "compare-ordering":
        emit("divergence_threshold", config.divergence_threshold)
    if config.out is not None:
        emit("out", config.out)
    return "\n".join(lines) + "\n"


def preset(name: str) -> RunConfig:
    """Published parameter sets; time windows are repository defaults."""
    if name == "fig2":
        return RunConfig(
            mode="compare-ordering",
            k=2,
            eta=0.2,
            delta_phi=0.0,
            r=0.005,
            electronic=1,
            alpha0_abs=math.sqrt(12.0),
            t_start=0.0,
            t_end=600.0,
            n_points=2000,
        )
    if name in ("fig3-weak", "fig3-strong"):
        beta0 = 20.0 if name == "fig3-weak" else 100.0
        r = 0.2
        return RunConfig(
            mode="compare-pump",
            k=2,
            eta=0.2,
            delta_phi=0.0,
            delta_omega_tilde=beta0 * r,
            r=r,
            electronic=1,
            alpha0_abs=math.sqrt(12.0),
            beta0_abs_list=(beta0,),
            t_start=0.0,
            t_end=400.0,
            n_points=2000,
        )
    if name == "fig4":
        return RunConfig(
            mode="pfunction",
            k=3,
            eta=0.2,
            delta_phi=math.pi / 2.0,
            delta_omega_tilde=8.0,
            nu_tilde=5000.0,
            electronic=2,
            alpha0_abs=math.sqrt(5.0),
            beta0_abs=40.0,
            snapshots=(4.0, 13.0, 50.0),
            w=1.7,
            quadrature_order=200,
            grid=GridSpec(-4.0, 4.0, 161, -4.0, 4.0, 161),
        )
    raise UnknownPreset(name)


@dataclass
class TimeSeries:
    """Columnar time-series rows plus run metadata for the CSV header."""

    columns: list
    rows: np.ndarray
    metadata: dict

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=float)
        if self.rows.ndim != 2 or self.rows.shape[1] != len(self.columns):
            raise ValueError("rows must be 2-D with one column per name")
        t = self.rows[:, 0]
        if np.any(np.diff(t) <= 0):
            raise ValueError("time column must be strictly increasing")

    def write_csv(self, path: Path):
        _write_csv(path, self.columns, self.rows, self.metadata)


def _format_float(x: float) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, columns, rows, metadata: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for key in sorted(metadata):
            fh.write(f"# {key}: {metadata[key]}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_format_float(v) for v in row) + "\n")


def _params_hash(config: RunConfig) -> str:
    return hashlib.sha256(serialize_config(config).encode()).hexdigest()[:16]


def _metadata(config: RunConfig) -> dict:
    return {
        "mode": config.mode,
        "params_hash": _params_hash(config),
        "code_version": __version__,
    }


def run(config: RunConfig, out_dir: str | Path | None = None,
        cache_dir: str | Path | None = None) -> list:
    """Execute a run and write CSV artifacts plus a JSON sidecar.

    Returns the list of paths written.  The sidecar records the full config,
    truncation masses actually achieved, and solver tolerances.  cache_dir
    overrides where pfunction runs keep their element tables.
    """
    from . import quantized_pump, quasiprob, semiclassical

    out = Path(out_dir if out_dir is not None else (config.out or "."))
    out.mkdir(parents=True, exist_ok=True)
    meta = _metadata(config)
    sidecar = {
        "config": serialize_config(config).splitlines(),
        "mode": config.mode,
        "code_version": __version__,
        "params_hash": meta["params_hash"],
        "tolerances": {"tail_epsilon": config.tail_epsilon},
        "truncation": {},
    }
    written = []
    params = config.params()
    policy = config.policy()

    def note_motion_truncation():
        from .fock_core import poisson_tail, suggest_truncation

        n_max = policy.n_max_motion
        if n_max is None:
            n_max = suggest_truncation(config.alpha0_abs, policy.tail_epsilon)
        sidecar["truncation"]["n_max_motion"] = n_max
        sidecar["truncation"]["motion_tail_mass"] = poisson_tail(
            n_max, config.alpha0_abs**2
        )

    def note_pump_truncation(beta0_abs):
        from .quantized_pump import _pump_window

        j0, weights, discarded = _pump_window(beta0_abs, policy)
        sidecar["truncation"][f"pump_window_beta{beta0_abs:g}"] = {
            "m_lo": j0,
            "m_hi": j0 + len(weights) - 1,
            "discarded_mass": discarded,
        }

    if config.mode in ("sigma22-classical-ordered", "compare-ordering"):
        sidecar["tolerances"]["ode_tol"] = config.ode_tol

    note_motion_truncation()
    if config.mode == "sigma22-quantized" or config.mode == "pfunction":
        note_pump_truncation(config.beta0_abs)
    elif config.mode == "compare-pump":
        for b in config.beta0_abs_list:
            note_pump_truncation(b)

    if config.mode == "compare-ordering":
        st = semiclassical.ScaledTime(tau=config.t_end, tau0=config.t_start, r=config.r)
        div = semiclassical.compare_ordering(
            params,
            config.alpha0(),
            st,
            threshold=config.divergence_threshold,
            tol=config.ode_tol,
            n_points=config.n_points,
            policy=policy,
        )
        series = TimeSeries(
            columns=["tau", "sigma22_numeric", "sigma22_noordering"],
            rows=np.column_stack([div.taus, div.sigma22_ordered, div.sigma22_no_ordering]),
            metadata=meta,
        )
        csv_path = out / "compare-ordering.csv"
        series.write_csv(csv_path)
        written.append(csv_path)
        sidecar["divergence"] = {
            "sup_distance": div.sup_distance,
            "threshold": div.threshold,
            "first_crossing_tau": div.first_crossing_tau,
        }
    elif config.mode == "sigma22-classical-ordered":
        st = semiclassical.ScaledTime(tau=config.t_end, tau0=config.t_start, r=config.r)
        psi0 = semiclassical.ground_coherent_state(config.alpha0(), params, policy)
        res = semiclassical.propagate_time_ordered(
            psi0, st, params, tol=config.ode_tol, n_points=config.n_points
        )
        sidecar["norm_drift"] = res.norm_drift
        series = TimeSeries(
            columns=["tau", "sigma22"],
            rows=np.column_stack([res.taus, res.sigma22()]),
            metadata=meta,
        )
        csv_path = out / "sigma22-classical-ordered.csv"
        series.write_csv(csv_path)
        written.append(csv_path)
    elif config.mode == "sigma22-classical-noordering":
        st = semiclassical.ScaledTime(tau=config.t_end, tau0=config.t_start, r=config.r)
        taus = np.linspace(config.t_start, config.t_end, config.n_points)
        vals = semiclassical.sigma22_no_ordering(taus, config.alpha0(), params, st, policy)
        series = TimeSeries(
            columns=["tau", "sigma22_noordering"],
            rows=np.column_stack([taus, vals]),
            metadata=meta,
        )
        csv_path = out / "sigma22-classical-noordering.csv"
        series.write_csv(csv_path)
        written.append(csv_path)
    elif config.mode == "sigma22-quantized":
        ts = np.linspace(config.t_start, config.t_end, config.n_points)
        vals = quantized_pump.sigma22_quantized(
            ts, config.alpha0(), config.beta0(), params, policy
        )
        series = TimeSeries(
            columns=["t", "sigma22"],
            rows=np.column_stack([ts, vals]),
            metadata=meta,
        )
        csv_path = out / "sigma22-quantized.csv"
        series.write_csv(csv_path)
        written.append(csv_path)
    elif config.mode == "compare-pump":
        taus = np.linspace(config.t_start, config.t_end, config.n_points)
        psi0 = semiclassical.ground_coherent_state(config.alpha0(), params, policy)
        st = semiclassical.ScaledTime(tau=config.t_end, tau0=config.t_start, r=config.r)
        dense = semiclassical.propagate_dense(psi0, st, params, config.ode_tol)
        s_cl = dense.sigma22(taus)
        cols = [taus, s_cl]
        names = ["tau", "sigma22_classical"]
        distances = {}
        for b in config.beta0_abs_list:
            p_q = replace(params, delta_omega_tilde=abs(b) * config.r)
            s_q = quantized_pump.sigma22_quantized(
                taus / abs(b), config.alpha0(), b, p_q, policy
            )
            cols.append(s_q)
            names.append(f"sigma22_quantized_beta{b:g}")
            distances[f"{b:g}"] = float(np.max(np.abs(s_q - s_cl)))
        series = TimeSeries(columns=names, rows=np.column_stack(cols), metadata=meta)
        csv_path = out / "compare-pump.csv"
        series.write_csv(csv_path)
        written.append(csv_path)
        sidecar["sup_distances"] = distances
        sidecar["tolerances"]["ode_tol"] = config.ode_tol
    elif config.mode == "pfunction":
        grid = quasiprob.PhaseSpaceGrid(
            config.grid.re_min,
            config.grid.re_max,
            config.grid.n_re,
            config.grid.im_min,
            config.grid.im_max,
            config.grid.n_im,
        )
        spec = quasiprob.FilterSpec(w=config.w, quadrature_order=config.quadrature_order)
        if cache_dir is None:
            cache_dir = out / "element_cache"
        table = None
        snapshots = {}
        alphas = grid.alphas()
        re_flat = alphas.real.ravel()
        im_flat = alphas.imag.ravel()
        for t in config.snapshots:
            rho = quantized_pump.rho_vib(
                t, config.alpha0(), config.beta0(), params, policy
            )
            if table is None:
                table = quasiprob.build_element_table(
                    rho.matrix.shape[0] - 1, grid, spec, cache_dir=cache_dir
                )
            field = quasiprob.p_function(rho, grid, spec, table=table)
            csv_path = out / f"pfunction_t{t:g}.csv"
            _write_csv(
                csv_path,
                ["re", "im", "p_omega"],
                np.column_stack([re_flat, im_flat, field.values.ravel()]),
                meta,
            )
            written.append(csv_path)
            snapshots[f"{t:g}"] = {
                "min": float(field.values.min()),
                "max": float(field.values.max()),
                "quadrature_error_bound": field.quadrature_error,
                "trace_defect": rho.trace_defect,
            }
        sidecar["snapshots"] = snapshots
        sidecar["truncation"]["element_table_certified_error"] = table.certified_error
    json_path = out / f"{config.mode}.json"
    with open(json_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(json_path)
    return written


def _apply_thread_cap():
    cap = os.environ.get("IONJC_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = argparse.ArgumentParser(prog="ionjc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a config and write artifacts")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)

    p_preset = sub.add_parser("preset", help="emit a published parameter set")
    p_preset.add_argument("--name", required=True)
    p_preset.add_argument("--emit-config", action="store_true")

    p_val = sub.add_parser("validate", help="parse and validate a config")
    p_val.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "preset":
            config = preset(args.name)
            if args.emit_config:
                sys.stdout.write(serialize_config(config))
            else:
                sys.stdout.write(f"{args.name}: valid preset ({config.mode})\n")
            return 0
        config_text = Path(args.config).read_text()
        config = parse_config(config_text)
        if args.command == "validate":
            sys.stdout.write("ok\n")
            return 0
        run(config, out_dir=args.out)
        return 0
    except (ParseError, ValidationError, UnknownPreset, FileNotFoundError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except IonJCError as exc:
        sys.stdout.write(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n"
        )
        return 3


if __name__ == "__main__":
    sys.exit(main())
