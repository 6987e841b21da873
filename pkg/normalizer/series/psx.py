"""PSX text format, one series per file.

    # comment lines
    ndof N
    K N
    grading torus|raw
    [action_cap N]
    [trig_cap N]
    [coords on]
    coeff  l1 .. ln  [m1 .. mn]  c|s  k1 .. kn

Coefficients are written with 17 significant digits so that reading back a
written file restores every float exactly.
"""
import os

import numpy as np

from ..errors import DomainError
from ..util import FileManager, Logger
from .monomial import Grading, Parity
from .series import PoissonSeries

VALID_KEYS = {"ndof", "K", "grading", "action_cap", "trig_cap", "coords"}


def dumps(series, header=True):
    lines = []
    if header:
        lines.extend(f"# {line}" for line in FileManager.header_lines())
    lines.append(f"ndof {series.n_dof}")
    lines.append(f"K {series.K}")
    lines.append(f"grading {series.grading}")
    if series.action_cap is not None:
        lines.append(f"action_cap {series.action_cap}")
    if series.trig_cap is not None:
        lines.append(f"trig_cap {series.trig_cap}")
    coords = series.has_coords
    if coords:
        lines.append("coords on")
    c, L, M, Kv, P = series.arrays()
    for i in range(len(series)):
        fields = [f"{c[i]:.17g}", *map(str, L[i])]
        if coords:
            fields.extend(map(str, M[i]))
        fields.append(Parity(int(P[i])).symbol)
        fields.extend(map(str, Kv[i]))
        lines.append(" ".join(fields))
    return "\n".join(lines) + "\n"


def loads(text, source="<string>"):
    settings = {}
    rows = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        fields = line.split()
        if fields[0] in VALID_KEYS:
            if len(fields) != 2:
                raise DomainError(f"{source}:{number}: header '{fields[0]}' takes one value, got '{line}'")
            settings[fields[0]] = fields[1]
            continue
        rows.append((number, fields))

    if "ndof" not in settings:
        raise DomainError(f"{source}: missing 'ndof' header")
    try:
        n = int(settings["ndof"])
        K = int(settings.get("K", 4))
        action_cap = int(settings["action_cap"]) if "action_cap" in settings else None
        trig_cap = int(settings["trig_cap"]) if "trig_cap" in settings else None
    except ValueError as e:
        raise DomainError(f"{source}: malformed header value ({e})") from e
    grading = settings.get("grading", Grading.RAW)
    if grading not in Grading.VALID_GRADINGS:
        raise DomainError(f"{source}: grading must be one of {Grading.VALID_GRADINGS}, got '{grading}'")
    coords = settings.get("coords", "off") == "on"
    width = 1 + n + (n if coords else 0) + 1 + n

    size = len(rows)
    c = np.empty(size)
    L = np.zeros((size, n), dtype=np.int64)
    M = np.zeros((size, n), dtype=np.int64)
    Kv = np.zeros((size, n), dtype=np.int64)
    P = np.zeros(size, dtype=np.int64)
    for i, (number, fields) in enumerate(rows):
        if len(fields) != width:
            raise DomainError(f"{source}:{number}: expected {width} fields, got {len(fields)}")
        try:
            c[i] = float(fields[0])
            L[i] = [int(x) for x in fields[1:1 + n]]
            offset = 1 + n
            if coords:
                M[i] = [int(x) for x in fields[offset:offset + n]]
                offset += n
            P[i] = Parity.from_symbol(fields[offset])
            Kv[i] = [int(x) for x in fields[offset + 1:]]
        except ValueError as e:
            raise DomainError(f"{source}:{number}: {e}") from e
    series = PoissonSeries(n, c, l=L, k=Kv, parity=P, m=M, K=K, grading=grading,
                           action_cap=action_cap, trig_cap=trig_cap)
    if series.loss:
        Logger.warning(f"{source}: {size - len(series)} terms outside the declared caps dropped "
                       f"(loss {series.loss:.3e})")
    return series


def read_psx(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"The file '{path}' does not exist.")
    Logger.debug(f"Loading series from '{path}'")
    with open(path) as f:
        return loads(f.read(), source=path)


def write_psx(series, path):
    folder = os.path.dirname(path)
    if folder and not os.path.exists(folder):
        os.makedirs(folder)
    Logger.debug(f"Saving series to '{path}'")
    with open(path, 'w') as f:
        f.write(dumps(series))
    return path


def save_series(series, filename):
    """Write through FileManager (honours ``saving_enabled`` and ``working_dir``)."""
    return FileManager.save_text(dumps(series), filename, header=False)


def load_series(filename):
    return loads(FileManager.load_text(filename), source=filename)
