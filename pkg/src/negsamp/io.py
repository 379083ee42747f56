"""File formats: headered CSV for records, JSON for fitted objects.

Floats are written with repr(), the shortest decimal text that parses back
to the same 64-bit value, so every round trip through disk is exact.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .model import Dataset
from .sampling import PilotBundle, Subsample


def _float_cell(v: float) -> str:
    return repr(float(v))


def write_dataset(path, data: Dataset) -> None:
    _write_rows(path, ["y"] + [f"x{i + 1}" for i in range(data.d)], data.y, None, data.x)


def write_subsample(path, sub: Subsample) -> None:
    _write_rows(
        path, ["y", "pi"] + [f"x{i + 1}" for i in range(sub.d)], sub.y, sub.pi, sub.x
    )


def _write_rows(path, header, y, pi, x) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(len(y)):
            cells = [str(int(y[i]))]
            if pi is not None:
                cells.append(_float_cell(pi[i]))
            cells.extend(_float_cell(v) for v in x[i])
            fh.write(",".join(cells) + "\n")


def read_table(path):
    """Returns (y, pi-or-None, x); header decides whether a pi column exists."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}:1: empty file") from None
        header = [h.strip() for h in header]
        if not header or header[0] != "y":
            raise DataFormatError(f"{path}:1: first column must be 'y'")
        has_pi = len(header) > 1 and header[1] == "pi"
        x_names = header[2:] if has_pi else header[1:]
        if x_names != [f"x{i + 1}" for i in range(len(x_names))] or not x_names:
            raise DataFormatError(f"{path}:1: covariate columns must be x1..xd")
        d = len(x_names)
        width = len(header)

        ys, pis, xs = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataFormatError(
                    f"{path}:{lineno}: expected {width} fields, found {len(row)}"
                )
            try:
                ys.append(int(row[0]))
                if has_pi:
                    pis.append(float(row[1]))
                xs.append([float(v) for v in row[2 if has_pi else 1 :]])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from None
    if not ys:
        raise DataFormatError(f"{path}:1: no data rows")
    y = np.array(ys, dtype=np.int8)
    x = np.array(xs, dtype=np.float64).reshape(len(ys), d)
    return y, (np.array(pis) if has_pi else None), x


def read_dataset(path) -> Dataset:
    y, pi, x = read_table(path)
    if pi is not None:
        raise DataFormatError(f"{path}:1: found a pi column; this is a subsample file")
    return Dataset(x=x, y=y)


def read_subsample(path) -> Subsample:
    y, pi, x = read_table(path)
    if pi is None:
        raise DataFormatError(f"{path}:1: missing the pi column of a subsample file")
    return Subsample(x=x, y=y, pi=pi)


_PILOT_KEYS = {"alpha", "beta", "omega", "m_inv"}


def write_pilot(path, bundle: PilotBundle) -> None:
    doc = {
        "alpha": bundle.theta_tilde.alpha,
        "beta": bundle.theta_tilde.beta.tolist(),
        "omega": bundle.omega_tilde,
        "m_inv": None if bundle.m_tilde_inv is None else bundle.m_tilde_inv.tolist(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_pilot(path) -> PilotBundle:
    from .model import Theta

    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict) or set(doc) != _PILOT_KEYS:
        raise DataFormatError(
            f"{path}:1: pilot document must have exactly the keys {sorted(_PILOT_KEYS)}"
        )
    try:
        theta = Theta(float(doc["alpha"]), np.asarray(doc["beta"], dtype=np.float64))
        m_inv = None if doc["m_inv"] is None else np.asarray(doc["m_inv"], dtype=np.float64)
        return PilotBundle(theta, float(doc["omega"]), m_inv)
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}:1: {exc}") from None


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def traces_csv(report) -> str:
    """One-line CSV of the three plug-in variance traces."""
    tf, tw, tl = report.traces
    return "trace_v_f,trace_v_w,trace_v_lik\n" f"{tf!r},{tw!r},{tl!r}\n"
