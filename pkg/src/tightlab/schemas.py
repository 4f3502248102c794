"""CSV schemas, checked readers/writers, JSON reports, and the pipeline config.

All pipeline files are UTF-8, comma-separated CSV with '.' decimals and
exact headers.  Writes go to a temporary file in the target directory
followed by an atomic rename, so failed runs never leave partial outputs.
JSON reports carry a ``schema_version`` field and are serialized with
sorted keys for byte-stable output.
"""

from __future__ import annotations

import configparser
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """A CSV file does not match its declared schema."""


# column name -> pandas dtype kind expected after coercion
SCHEMAS = {
    "firm_panel": {
        "firm_id": "str",
        "year": "int",
        "occupation": "str",
        "region": "str",
        "employment": "float",
        "wage_daily": "float",
    },
    "markets": {
        "occupation": "str",
        "region": "str",
        "year": "int",
        "registered_vacancies": "float",
        "job_seekers": "float",
    },
    "notification_shares": {"year": "int", "level": "str", "share": "float"},
    "transitions": {
        "from_occupation": "str",
        "to_occupation": "str",
        "probability": "float",
    },
    "occupation_employment": {"occupation": "str", "employment": "float"},
    "commuting": {"from_region": "str", "to_region": "str", "workers": "float"},
    "labor_force": {"region": "str", "labor_force": "float"},
    "instruments": {
        "firm_id": "str",
        "year": "int",
        "z_w": "float",
        "z_v": "float",
        "z_u": "float",
    },
    "tightness": {
        "firm_id": "str",
        "year": "int",
        "tightness": "float",
        "missing_share": "float",
    },
    "zone_assignment": {"region": "str", "zone": "int"},
    "region_panel": {
        "region": "str",
        "year": "int",
        "employment": "float",
        "job_seekers": "float",
        "vacancies": "float",
        "tightness": "float",
    },
    "employment_series": {"year": "int", "group": "str", "employment": "float"},
    "tightness_series": {"year": "int", "tightness": "float"},
}


def _coerce(frame: pd.DataFrame, name: str, column: str, kind: str) -> pd.Series:
    series = frame[column]
    try:
        if kind == "int":
            return series.astype("int64")
        if kind == "float":
            return series.astype("float64")
        return series.astype("string").astype(object)
    except (ValueError, TypeError):
        numeric = pd.to_numeric(series, errors="coerce")
        bad = series.index[numeric.isna() & series.notna()]
        row = int(bad[0]) + 2 if len(bad) else "?"  # 1-based plus header line
        raise SchemaError(
            f"{name}: column {column!r} must be {kind}; "
            f"first offending value at line {row}: {series.loc[bad[0]]!r}"
            if len(bad)
            else f"{name}: column {column!r} must be {kind}"
        ) from None


def read_csv(path, schema: str) -> pd.DataFrame:
    """Read and validate a pipeline CSV against its named schema."""
    spec = SCHEMAS[schema]
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{schema}: file not found: {path}")
    frame = pd.read_csv(path, dtype=str, keep_default_na=True)
    expected = list(spec)
    if list(frame.columns) != expected:
        raise SchemaError(
            f"{schema}: header mismatch in {path}; "
            f"expected {expected}, found {list(frame.columns)}"
        )
    for column, kind in spec.items():
        if kind != "str" and frame[column].isna().any():
            if column in ("z_w", "z_v", "z_u", "tightness", "missing_share"):
                pass  # derived columns may carry missing values
            else:
                row = int(frame.index[frame[column].isna()][0]) + 2
                raise SchemaError(
                    f"{schema}: column {column!r} has a missing value at line {row}"
                )
        frame[column] = _coerce(frame, schema, column, kind)
    return frame


def write_csv(frame: pd.DataFrame, path, schema: str) -> None:
    """Write a pipeline CSV atomically, enforcing the schema's column order."""
    spec = SCHEMAS[schema]
    missing = [c for c in spec if c not in frame.columns]
    if missing:
        raise SchemaError(f"{schema}: cannot write, columns missing: {missing}")
    ordered = frame[list(spec)]
    atomic_write_text(path, ordered.to_csv(index=False))


def write_json_report(payload: dict, path) -> None:
    """Write a JSON report with the schema version, atomically and byte-stably."""
    body = dict(payload)
    body["schema_version"] = SCHEMA_VERSION
    atomic_write_text(
        path, json.dumps(body, indent=2, sort_keys=True, default=_json_default) + "\n"
    )


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def atomic_write_text(path, text: str) -> None:
    """Write text via a temporary file plus atomic rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- pipeline configuration -----------------------------------------------------

CONFIG_DEFAULTS = {
    "paths": {
        "output_dir": "out",
        "firm_panel": "",
        "markets": "",
        "notification_shares": "",
        "transitions": "",
        "occupation_employment": "",
        "commuting": "",
        "labor_force": "",
        "adjacency": "",
        "calibration": "",
        "instruments": "",
        "tightness": "",
        "region_panel": "",
        "employment_series": "",
        "tightness_series": "",
    },
    "simulate": {
        "n_firms": "2000",
        "n_occupations": "30",
        "n_regions": "6",
        "n_years": "8",
        "base_year": "2012",
        "seed": "0",
        "true_eta_lw": "-0.7",
        "true_eta_lt": "-0.05",
        "national_shock_sd": "0.05",
        "idiosyncratic_sd": "0.05",
        "demand_confound_sd": "0.03",
        "employment_noise_sd": "0.05",
        "integer_employment": "false",
    },
    "instruments": {
        "base_year": "2012",
        "estimation_start": "2013",
        "lag": "2",
        "weighted_wages": "true",
        "max_missing_share": "0.05",
    },
    "tightness": {
        "use_notification_shares": "false",
        "flow_adjust": "false",
        "max_missing_share": "1.0",
    },
    "estimate": {
        "lag": "2",
        "fixed_effects": "year",
        "cluster": "firm_id",
        "weak_f_threshold": "10",
    },
    "rotemberg": {
        "endogenous": "wage",
        "normalize_growth": "false",
    },
    "zones": {
        "threshold_start": "0.01",
        "threshold_stop": "0.30",
        "threshold_step": "0.01",
        "contiguity": "split",
    },
    "policy": {
        "draws": "10000",
        "seed": "0",
        "convention": "log",
        "application": "from_base",
        "elasticity": "",
        "elasticity_se": "0",
        "wage_effect": "",
        "wage_effect_se": "0",
        "workforce": "",
        "group_elasticities": "",
        "group_elasticity_ses": "",
    },
}


@dataclass
class PipelineConfig:
    """Typed view over the INI configuration file."""

    parser: configparser.ConfigParser
    base_dir: Path

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        parser.read_dict(CONFIG_DEFAULTS)
        parser.read(path, encoding="utf-8")
        return cls(parser=parser, base_dir=path.parent)

    @classmethod
    def defaults(cls, base_dir=".") -> "PipelineConfig":
        parser = configparser.ConfigParser()
        parser.read_dict(CONFIG_DEFAULTS)
        return cls(parser=parser, base_dir=Path(base_dir))

    def path(self, key: str, required: bool = False) -> Path | None:
        raw = self.parser.get("paths", key, fallback="").strip()
        if not raw:
            if required:
                raise SchemaError(f"config: [paths] {key} is required for this step")
            return None
        resolved = Path(raw)
        if not resolved.is_absolute():
            resolved = self.base_dir / resolved
        if required and not resolved.exists():
            raise SchemaError(f"config: [paths] {key} does not exist: {resolved}")
        return resolved

    def output_dir(self) -> Path:
        raw = self.parser.get("paths", "output_dir")
        out = Path(raw)
        if not out.is_absolute():
            out = self.base_dir / out
        return out

    def get(self, section: str, key: str) -> str:
        return self.parser.get(section, key)

    def getint(self, section: str, key: str) -> int:
        return self.parser.getint(section, key)

    def getfloat(self, section: str, key: str) -> float:
        return self.parser.getfloat(section, key)

    def getbool(self, section: str, key: str) -> bool:
        return self.parser.getboolean(section, key)

    def set(self, section: str, key: str, value) -> None:
        self.parser.set(section, key, str(value))


def example_config() -> str:
    """Render the full default configuration as an annotated INI document."""
    lines = [
        "# tightlab pipeline configuration",
        "# every key shown with its default; relative paths resolve against",
        "# the directory containing this file",
        "",
    ]
    for section, entries in CONFIG_DEFAULTS.items():
        lines.append(f"[{section}]")
        for key, value in entries.items():
            lines.append(f"{key} = {value}")
        lines.append("")
    return "\n".join(lines)
