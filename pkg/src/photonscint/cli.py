"""Command-line driver: config files in, scintillation curves out.

Config grammar
--------------
A flat INI document read by :mod:`configparser`, without interpolation.
Keys are case sensitive, so ``l0`` and ``L0`` are different keys.  A value
follows ``=`` or ``:``; a line starting with ``#`` or ``;`` is a comment.
Sections and keys:

``[beam]``
    ``r0`` (required), ``q0`` (required), ``lambda_diffuser`` (default ``inf``).
``[turbulence]``
    ``cn2`` and ``l0`` (required); ``model`` (``tatarskii`` or
    ``vonkarman``, default ``tatarskii``); ``L0`` (required for
    ``vonkarman``, must be absent or ``inf`` for ``tatarskii``).
``[sweep]``
    Either ``z`` (comma-separated list, may be empty) or all of ``z_start``,
    ``z_stop`` and ``z_count`` with optional ``z_spacing`` (``linear`` or
    ``log``).  ``r_perp`` (two numbers, default ``0, 0``) and ``modes``
    (``correlated``, ``multiplicative`` or ``both``; default ``both``).
``[integration]``
    ``method``, ``rel_tol``, ``abs_tol``, ``max_evals``,
    ``truncation_sigmas``, ``seed``, ``workers``.
``[kernel]`` (optional)
    ``coefficients`` (``exact`` or ``printed``) and ``drop_pair_correlation``.
``[output]``
    ``path`` (default ``sigma2.csv``), ``format`` (only ``csv``),
    ``metadata`` (boolean, default true), and ``figure`` (optional image
    path rendered with matplotlib).

Precedence is ``--seed/--workers/--mode/--output`` flags, then ``--set``
overrides (an empty value, ``--set sweep.z_start=``, removes the key
so its default applies), then the file, then the ``PHOTONSCINT_WORKERS`` environment
variable (workers only), then built-in defaults.

Exit statuses: 0 success, 2 usage error, 3 configuration error, 4 at least
one sweep point failed, 5 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import platform
import sys
import time
from dataclasses import dataclass
from importlib import metadata as importlib_metadata
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .beam_source import BeamParams
from .quadrature import IntegrationConfig, Method
from .scintillation import ModelOptions, SigmaCurvePoint, sweep
from .trajectory_kernel import Coefficients, KernelMode
from .turbulence import SpectrumModel, TurbulenceParams

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "load_config",
    "run",
    "write_csv",
    "read_csv",
    "render_figure",
    "main",
    "CSV_COLUMNS",
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_CONFIG",
    "EXIT_POINT_FAILURE",
    "EXIT_IO",
]

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_POINT_FAILURE = 4
EXIT_IO = 5

WORKERS_ENV = "PHOTONSCINT_WORKERS"

CSV_COLUMNS = (
    "z_m",
    "sigma2_correlated",
    "sigma2_multiplicative",
    "mean_intensity_au",
    "dq2_m-2",
    "beam_radius_sq_m2",
    "applicability_ratio",
    "err_sigma2_corr",
    "err_sigma2_mult",
)


class ConfigError(ValueError):
    """Invalid configuration, tied to a ``section.key`` and, when known, a line."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None, source: str = "<config>"):
        self.key, self.line, self.source, self.detail = key, line, source, message
        where = source if line is None else f"{source}:{line}"
        super().__init__(f"{where}: {key}: {message}" if key else f"{where}: {message}")


# ---------------------------------------------------------------------------
# Value parsers
# ---------------------------------------------------------------------------


def _float(text: str) -> float:
    try:
        return float(text.strip())
    except ValueError:
        raise ValueError(f"expected a number, got {text.strip()!r}") from None


def _positive(text):
    v = _float(text)
    if not (v > 0 and math.isfinite(v)):
        raise ValueError(f"must be finite and > 0, got {v!r}")
    return v


def _nonnegative(text):
    v = _float(text)
    if not (v >= 0 and math.isfinite(v)):
        raise ValueError(f"must be finite and >= 0, got {v!r}")
    return v


def _positive_or_inf(text):
    v = _float(text)
    if not v > 0:
        raise ValueError(f"must be > 0 or inf, got {v!r}")
    return v


def _integer(minimum: int) -> Callable[[str], int]:
    def parse(text):
        try:
            v = int(text.strip())
        except ValueError:
            raise ValueError(f"expected an integer, got {text.strip()!r}") from None
        if v < minimum:
            raise ValueError(f"must be >= {minimum}, got {v}")
        return v
    return parse


def _seed(text):
    v = _integer(0)(text)
    if v >= 2**64:
        raise ValueError("must be below 2**64")
    return v


def _boolean(text):
    key = text.strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text.strip()!r}")


def _choice(*options: str) -> Callable[[str], str]:
    def parse(text):
        v = text.strip().lower()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}; got {text.strip()!r}")
        return v
    return parse


def _float_list(text):
    parts = [p for p in (s.strip() for s in text.replace(";", ",").split(",")) if p]
    return tuple(_positive(p) for p in parts)


def _vector2(text):
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError("expected two comma-separated numbers")
    vals = tuple(_float(p) for p in parts)
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("components must be finite")
    return vals


def _modes(text):
    key = text.strip().lower()
    if key == "both":
        return (KernelMode.CORRELATED, KernelMode.MULTIPLICATIVE)
    try:
        return (KernelMode.parse(key),)
    except ValueError:
        raise ValueError(f"expected correlated, multiplicative or both; got {text.strip()!r}") from None


def _method(text):
    return Method.parse(text)


def _model(text):
    return SpectrumModel.parse(text)


def _text(text):
    v = text.strip()
    if not v:
        raise ValueError("must not be empty")
    return v


_REQUIRED = object()
_ABSENT = object()

_SCHEMA: dict[str, dict[str, tuple[Callable, object]]] = {
    "beam": {
        "r0": (_positive, _REQUIRED),
        "q0": (_positive, _REQUIRED),
        "lambda_diffuser": (_positive_or_inf, math.inf),
    },
    "turbulence": {
        "cn2": (_nonnegative, _REQUIRED),
        "l0": (_positive, _REQUIRED),
        "L0": (_positive_or_inf, _ABSENT),
        "model": (_model, SpectrumModel.TATARSKII),
    },
    "sweep": {
        "z": (_float_list, _ABSENT),
        "z_start": (_positive, _ABSENT),
        "z_stop": (_positive, _ABSENT),
        "z_count": (_integer(0), _ABSENT),
        "z_spacing": (_choice("linear", "log"), "linear"),
        "r_perp": (_vector2, (0.0, 0.0)),
        "modes": (_modes, (KernelMode.CORRELATED, KernelMode.MULTIPLICATIVE)),
    },
    "integration": {
        "method": (_method, Method.ADAPTIVE_PRODUCT),
        "rel_tol": (_positive, 1e-2),
        "abs_tol": (_nonnegative, 0.0),
        "max_evals": (_integer(1000), 2_000_000),
        "truncation_sigmas": (_positive, 6.0),
        "seed": (_seed, 0),
        "workers": (_integer(1), 1),
    },
    "kernel": {
        "coefficients": (_choice("exact", "printed"), "exact"),
        "drop_pair_correlation": (_boolean, False),
    },
    "output": {
        "path": (_text, "sigma2.csv"),
        "format": (_choice("csv"), "csv"),
        "metadata": (_boolean, True),
        "figure": (_text, None),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Fully validated run description."""

    beam: BeamParams
    turbulence: TurbulenceParams
    z_values: tuple
    r_perp: tuple
    modes: tuple
    integration: IntegrationConfig
    options: ModelOptions
    output_path: Path
    output_format: str = "csv"
    metadata: bool = True
    figure: Path | None = None
    source: str = "<config>"


def _line_index(text: str) -> dict[tuple[str, str], int]:
    """Map ``(section, key)`` to the 1-based line that sets it."""
    out: dict[tuple[str, str], int] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        for sep in ("=", ":"):
            if sep in line:
                out[(section, line.split(sep, 1)[0].strip())] = lineno
                break
    return out


def _defaults_listing() -> str:
    keys = [f"{s}.{k}" for s, fields in _SCHEMA.items() for k, (_, d) in fields.items()
            if d is not _REQUIRED and d is not _ABSENT]
    return ", ".join(keys)


def parse_config(text: str, *, source: str = "<config>", overrides: Sequence[str] = (),
                 environ: dict | None = None) -> RunConfig:
    """Parse and validate a config document.

    Parameters
    ----------
    text : str
        INI document (see the module docstring for the grammar).
    source : str
        Name used in diagnostics.
    overrides : sequence of str
        ``section.key=value`` items applied on top of the file.
    environ : mapping, optional
        Environment used for ``PHOTONSCINT_WORKERS``; defaults to ``os.environ``.

    Raises
    ------
    ConfigError
        Naming the offending ``section.key`` (and line, for file values).
    """
    environ = os.environ if environ is None else environ
    parser = configparser.ConfigParser(interpolation=None, default_section="\x00none")
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("key given twice", f"{exc.section}.{exc.option}", exc.lineno, source) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"section [{exc.section}] given twice", None, exc.lineno, source) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("content before the first [section] header", None, exc.lineno, source) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line (expected key = value)", None, lineno, source) from None
    lines = _line_index(text)

    raw: dict[tuple[str, str], tuple[str, int | None, str]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]; known sections: {', '.join(_SCHEMA)}",
                              None, lines.get((None, section)), source)
        for key, value in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key; known keys in [{section}]: {', '.join(_SCHEMA[section])}",
                                  f"{section}.{key}", lines.get((section, key)), source)
            raw[(section, key)] = (value, lines.get((section, key)), source)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not of the form section.key=value", None, None, "--set")
        dotted, value = item.split("=", 1)
        section, key = dotted.strip().split(".", 1)
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError("unknown key", dotted.strip(), None, "--set")
        if value.strip():
            raw[(section, key)] = (value, None, "--set")
        else:
            raw.pop((section, key), None)   # empty override: back to the default

    values: dict[tuple[str, str], object] = {}
    for section, fields in _SCHEMA.items():
        for key, (parse, default) in fields.items():
            if (section, key) in raw:
                text_value, line, origin = raw[(section, key)]
                try:
                    values[(section, key)] = parse(text_value)
                except ValueError as exc:
                    raise ConfigError(str(exc), f"{section}.{key}", line, origin) from None
            elif default is _REQUIRED:
                raise ConfigError(f"missing required key; keys with defaults that may be omitted: {_defaults_listing()}",
                                  f"{section}.{key}", None, source)
            else:
                values[(section, key)] = default
    if ("integration", "workers") not in raw and environ.get(WORKERS_ENV):
        try:
            values[("integration", "workers")] = _integer(1)(environ[WORKERS_ENV])
        except ValueError as exc:
            raise ConfigError(str(exc), WORKERS_ENV, None, "environment") from None

    def where(section, key):
        entry = raw.get((section, key))
        return (entry[1], entry[2]) if entry else (None, source)

    def fail(message, section, key):
        line, origin = where(section, key)
        raise ConfigError(message, f"{section}.{key}", line, origin)

    # turbulence cross-checks
    model = values[("turbulence", "model")]
    L0 = values[("turbulence", "L0")]
    if model is SpectrumModel.VON_KARMAN and L0 is _ABSENT:
        fail("the vonkarman model requires an explicit finite L0", "turbulence", "L0")
    if L0 is _ABSENT:
        L0 = math.inf
    if model is SpectrumModel.VON_KARMAN and not math.isfinite(L0):
        fail("the vonkarman model requires a finite L0", "turbulence", "L0")
    if model is SpectrumModel.TATARSKII and math.isfinite(L0):
        fail("the tatarskii model has no outer scale; omit L0 or set it to inf", "turbulence", "L0")
    if math.isfinite(L0) and L0 <= values[("turbulence", "l0")]:
        fail("must exceed turbulence.l0", "turbulence", "L0")
    turb = TurbulenceParams(values[("turbulence", "cn2")], values[("turbulence", "l0")], L0, model)
    beam = BeamParams(values[("beam", "r0")], values[("beam", "q0")], values[("beam", "lambda_diffuser")])

    # sweep
    z_list = values[("sweep", "z")]
    range_keys = ("z_start", "z_stop", "z_count")
    given = [k for k in range_keys if values[("sweep", k)] is not _ABSENT]
    if z_list is not _ABSENT and given:
        fail("give either sweep.z or the z_start/z_stop/z_count range, not both", "sweep", given[0])
    if z_list is _ABSENT:
        if not given:
            raise ConfigError("missing required key; give sweep.z or z_start, z_stop and z_count",
                              "sweep.z", None, source)
        missing = [k for k in range_keys if k not in given]
        if missing:
            raise ConfigError("missing required key for a z range", f"sweep.{missing[0]}", None, source)
        start, stop, count = (values[("sweep", k)] for k in range_keys)
        if count > 1 and stop <= start:
            fail("must exceed sweep.z_start", "sweep", "z_stop")
        if values[("sweep", "z_spacing")] == "log":
            z_list = tuple(float(v) for v in np.geomspace(start, stop, count)) if count else ()
        else:
            z_list = tuple(float(v) for v in np.linspace(start, stop, count)) if count else ()
        if count == 1:
            z_list = (float(start),)
    if any(b <= a for a, b in zip(z_list, z_list[1:])):
        fail("z values must be strictly increasing", "sweep", "z")

    try:
        integration = IntegrationConfig(
            method=values[("integration", "method")],
            rel_tol=values[("integration", "rel_tol")],
            abs_tol=values[("integration", "abs_tol")],
            max_evals=values[("integration", "max_evals")],
            truncation_sigmas=values[("integration", "truncation_sigmas")],
            seed=values[("integration", "seed")],
            workers=values[("integration", "workers")],
        )
    except ValueError as exc:
        name = str(exc).split()[0]
        fail(str(exc), "integration", name if name in _SCHEMA["integration"] else "method")
    options = ModelOptions(coefficients=Coefficients(values[("kernel", "coefficients")]),
                           drop_pair_correlation=values[("kernel", "drop_pair_correlation")])
    figure = values[("output", "figure")]
    return RunConfig(
        beam=beam, turbulence=turb, z_values=tuple(z_list), r_perp=values[("sweep", "r_perp")],
        modes=values[("sweep", "modes")], integration=integration, options=options,
        output_path=Path(values[("output", "path")]), output_format=values[("output", "format")],
        metadata=values[("output", "metadata")], figure=Path(figure) if figure else None, source=source,
    )


def load_config(path, **kwargs) -> RunConfig:
    """Read ``path`` (or ``bundled:NAME`` for a shipped example) and parse it."""
    text, source = _read_config_text(path)
    return parse_config(text, source=source, **kwargs)


def bundled_config(name: str = "fig1.cfg") -> str:
    """Text of a config file shipped with the package."""
    return resources.files("photonscint").joinpath("data", name).read_text(encoding="utf-8")


def _read_config_text(path) -> tuple[str, str]:
    path = str(path)
    if path.startswith("bundled:"):
        name = path.split(":", 1)[1]
        return bundled_config(name), path
    return Path(path).read_text(encoding="utf-8"), path


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def _row(point: SigmaCurvePoint, modes) -> list[float]:
    failed = " ".join(point.failures)
    corr = point.sigma2_correlated if "correlated:" not in failed else math.nan
    mult = point.sigma2_multiplicative if "multiplicative:" not in failed else math.nan
    ecorr = point.err_sigma2_correlated if not math.isnan(corr) else math.nan
    emult = point.err_sigma2_multiplicative if not math.isnan(mult) else math.nan
    return [point.z, corr, mult, point.mean_intensity, point.dq2, point.beam_radius_sq,
            point.applicability_ratio, ecorr, emult]


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(points: Sequence[SigmaCurvePoint], path, modes=None) -> None:
    """Write the curve with the fixed column contract.

    Floats are written with :func:`repr`, the shortest text that round-trips
    exactly, so the file is locale independent; missing values are ``nan``.
    A mode whose integration failed at a point is written as ``nan``.
    """
    lines = [",".join(CSV_COLUMNS)]
    for p in points:
        lines.append(",".join(_fmt(v) for v in _row(p, modes)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_csv(path) -> list[dict[str, float]]:
    """Read a curve written by :func:`write_csv`; one dict per row.

    Raises
    ------
    ValueError
        If the header does not match the column contract.
    """
    text = Path(path).read_text(encoding="ascii")
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if not rows or tuple(h.strip() for h in rows[0].split(",")) != CSV_COLUMNS:
        raise ValueError(f"{path}: header does not match the column contract")
    out = []
    for lineno, ln in enumerate(rows[1:], start=2):
        cells = ln.split(",")
        if len(cells) != len(CSV_COLUMNS):
            raise ValueError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} columns")
        out.append({c: float(v) for c, v in zip(CSV_COLUMNS, cells)})
    return out


def render_figure(rows: Sequence[dict[str, float]], path, *, title: str | None = None) -> None:
    """Plot the scintillation index against distance and save it to ``path``.

    The format follows the file extension (anything matplotlib's Agg
    backend writes).  Error bars are drawn when the error columns are finite.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    z_km = np.array([r["z_m"] for r in rows]) / 1e3
    fig, (ax, ax_ratio) = plt.subplots(2, 1, figsize=(5.0, 5.6), sharex=True,
                                       gridspec_kw={"height_ratios": [3, 1.2]})
    for col, err, label, style in (("sigma2_correlated", "err_sigma2_corr", "correlated", "-o"),
                                   ("sigma2_multiplicative", "err_sigma2_mult", "multiplicative", "--s")):
        y = np.array([r[col] for r in rows])
        if not np.any(np.isfinite(y)):
            continue
        e = np.array([r[err] for r in rows])
        ax.errorbar(z_km, y, yerr=np.where(np.isfinite(e), e, 0.0), fmt=style, ms=3, lw=1.2,
                    capsize=2, label=label)
    ax.axhline(1.0, color="0.5", lw=0.8, ls=":")
    ax.set_ylabel(r"scintillation index $\sigma^2$")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False)
    if title:
        ax.set_title(title, fontsize=10)
    ax_ratio.semilogy(z_km, [r["applicability_ratio"] for r in rows], "-", color="0.3", lw=1.0)
    ax_ratio.set_ylabel("applicability")
    ax_ratio.set_xlabel("distance z (km)")
    for a in (ax, ax_ratio):
        a.grid(alpha=0.3, lw=0.5)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _package_version() -> str:
    for dist in ("artifact", "photonscint"):
        try:
            return importlib_metadata.version(dist)
        except importlib_metadata.PackageNotFoundError:
            continue
    from . import __version__
    return __version__


def _metadata(config: RunConfig, points, wall_time: float) -> dict:
    ic = config.integration
    return {
        "config_source": config.source,
        "version": _package_version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": ic.seed,
        "integration": {
            "method": ic.method.value, "rel_tol": ic.rel_tol, "abs_tol": ic.abs_tol,
            "max_evals": ic.max_evals, "truncation_sigmas": ic.truncation_sigmas, "workers": ic.workers,
        },
        "kernel": {"coefficients": config.options.coefficients.value,
                   "drop_pair_correlation": config.options.drop_pair_correlation},
        "beam": {"r0": config.beam.r0, "q0": config.beam.q0, "lambda_diffuser": repr(config.beam.lambda_diffuser),
                 "r1": config.beam.r1},
        "turbulence": {"cn2": config.turbulence.cn2, "l0": config.turbulence.l0,
                       "L0": repr(config.turbulence.L0), "model": config.turbulence.model.value},
        "modes": [m.value for m in config.modes],
        "r_perp": list(config.r_perp),
        "points": len(points),
        "failures": [{"z_m": p.z, "messages": list(p.failures)} for p in points if p.failures],
        "wall_time_s": wall_time,
    }


def metadata_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.name + ".meta.json")


def run(config: RunConfig) -> int:
    """Run the sweep, write the CSV, metadata and optional figure; return the exit status."""
    t0 = time.perf_counter()
    with np.errstate(all="ignore"):
        points = sweep(config.z_values, config.beam, config.turbulence, config.integration, config.options,
                       modes=config.modes, r_perp=config.r_perp) if config.z_values else []
    wall = time.perf_counter() - t0
    try:
        config.output_path.parent.mkdir(parents=True, exist_ok=True)
        write_csv(points, config.output_path, config.modes)
        if config.metadata:
            metadata_path(config.output_path).write_text(
                json.dumps(_metadata(config, points, wall), indent=2) + "\n", encoding="utf-8")
        if config.figure is not None:
            config.figure.parent.mkdir(parents=True, exist_ok=True)
            render_figure(read_csv(config.output_path), config.figure)
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return EXIT_IO
    failed = [p for p in points if p.failures]
    if failed:
        log.error("%d of %d points failed", len(failed), len(points))
        return EXIT_POINT_FAILURE
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="photonscint",
                                     description="Scintillation index of a partially coherent beam in turbulence.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0, help="more log output")
    common.add_argument("-q", "--quiet", action="store_true", help="only errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="run a z-sweep described by a config file")
    p_run.add_argument("config", help="config path, or bundled:fig1.cfg")
    p_run.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config value (repeatable)")
    p_run.add_argument("--seed", type=int, help="integration seed")
    p_run.add_argument("--workers", type=int, help="worker processes")
    p_run.add_argument("--mode", choices=("correlated", "multiplicative", "both"), help="kernel modes to run")
    p_run.add_argument("--output", help="CSV output path")
    p_run.add_argument("--figure", help="also render a figure to this path")

    p_rep = sub.add_parser("report", parents=[common], help="render a figure from a CSV written by 'run'")
    p_rep.add_argument("csv")
    p_rep.add_argument("--figure", required=True, help="image path (extension picks the format)")
    p_rep.add_argument("--title")

    p_ex = sub.add_parser("example", parents=[common], help="print a bundled config file")
    p_ex.add_argument("name", nargs="?", default="fig1.cfg")
    return parser


def _flag_overrides(args) -> list[str]:
    out = list(args.overrides)
    if args.seed is not None:
        out.append(f"integration.seed={args.seed}")
    if args.workers is not None:
        out.append(f"integration.workers={args.workers}")
    if args.mode is not None:
        out.append(f"sweep.modes={args.mode}")
    if args.output is not None:
        out.append(f"output.path={args.output}")
    if args.figure is not None:
        out.append(f"output.figure={args.figure}")
    return out


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    level = logging.ERROR if args.quiet else (logging.DEBUG if args.verbose > 1 else logging.INFO)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    if args.command == "example":
        try:
            sys.stdout.write(bundled_config(args.name))
        except (FileNotFoundError, OSError) as exc:
            log.error("no bundled config %r: %s", args.name, exc)
            return EXIT_USAGE
        return EXIT_OK

    if args.command == "report":
        try:
            rows = read_csv(args.csv)
            render_figure(rows, args.figure, title=args.title)
        except ValueError as exc:
            log.error("%s", exc)
            return EXIT_CONFIG
        except OSError as exc:
            log.error("%s", exc)
            return EXIT_IO
        return EXIT_OK

    try:
        text, source = _read_config_text(args.config)
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_IO
    try:
        config = parse_config(text, source=source, overrides=_flag_overrides(args))
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    return run(config)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
