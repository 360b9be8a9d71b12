"""
FlowTrack Text Format

Column-oriented text serialization of FlowTracks. Layout:

    # strataflow track v1
    # mass_bound <float>
    # closed <0|1>
    # vanished <0|1>
    # singular_times <float> ...
    # singular_point <x_1> ... <x_N> <t>        (repeatable)
    # config_hash <hex>
    # provenance <key> <value>                  (repeatable)
    # fields normal curvature                   (optional columns present)
    slice <t> <n> <N> <mass> <count>
    <x_1> ... <x_N> <weight> [<normal_1> ... <normal_N>] [<lambda_1> ... <lambda_n>]

Floats are written with 17 significant digits so a write/read cycle is exact.
"""

import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from errors import InvalidInputError, TrackParseError
from spacetime import SpacetimePoint
from varifold import FlowTrack, VarifoldSlice

logger = logging.getLogger(__name__)

MAGIC = "# strataflow track v1"
FLOAT_FORMAT = ".17g"


def _fmt(value: float) -> str:
    return format(float(value), FLOAT_FORMAT)


def _optional_fields(flow: FlowTrack) -> Tuple[bool, bool]:
    filled = [s for s in flow.slices if not s.is_empty]
    with_normals = bool(filled) and all(s.normals is not None for s in filled)
    with_curvature = bool(filled) and all(s.principal_curvatures is not None for s in filled)
    return with_normals, with_curvature


def dump_track(flow: FlowTrack, config_hash: Optional[str] = None) -> str:
    """Serialize a FlowTrack; config_hash overrides the one in its provenance"""
    with_normals, with_curvature = _optional_fields(flow)
    provenance = dict(flow.provenance)
    if config_hash is not None:
        provenance["config_hash"] = config_hash

    lines = [MAGIC]
    lines.append(f"# mass_bound {_fmt(flow.mass_bound)}")
    lines.append(f"# closed {int(flow.closed)}")
    lines.append(f"# vanished {int(flow.vanished)}")
    lines.append("# singular_times " + " ".join(_fmt(t) for t in flow.singular_times))
    for p in flow.singular_points:
        lines.append("# singular_point " + " ".join(_fmt(v) for v in p.as_array()))
    lines.append(f"# config_hash {provenance.pop('config_hash', '')}")
    for key in sorted(provenance):
        lines.append(f"# provenance {key} {provenance[key]}")
    fields = [name for name, on in (("normal", with_normals), ("curvature", with_curvature)) if on]
    lines.append("# fields " + " ".join(fields))

    for s in flow.slices:
        lines.append(f"slice {_fmt(s.t)} {flow.n} {flow.N} {_fmt(s.mass)} {s.size}")
        columns = [s.positions, s.weights[:, None]]
        if with_normals:
            columns.append(s.normals)
        if with_curvature:
            columns.append(s.principal_curvatures)
        if s.size:
            table = np.hstack(columns)
            lines.extend(" ".join(_fmt(v) for v in row) for row in table)
    return "\n".join(line.rstrip() for line in lines) + "\n"


def write_track(flow: FlowTrack, path: Union[str, Path], config_hash: Optional[str] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_track(flow, config_hash))
    logger.info(f"Track written to {path} ({len(flow.slices)} slices)")
    return path


def _floats(tokens: Iterable[str], line_number: int) -> List[float]:
    try:
        return [float(tok) for tok in tokens]
    except ValueError as e:
        raise TrackParseError(f"expected numbers ({e})", line_number)


def parse_track(text: str) -> FlowTrack:
    """Parse the text produced by dump_track"""
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise TrackParseError("missing track header", 1)

    header: Dict[str, str] = {}
    provenance: Dict[str, str] = {}
    point_rows: List[Tuple[int, List[float]]] = []
    fields: List[str] = []
    i = 1
    while i < len(lines) and lines[i].startswith("#"):
        body = lines[i][1:].strip()
        key, _, value = body.partition(" ")
        if key == "provenance":
            pkey, _, pvalue = value.partition(" ")
            provenance[pkey] = pvalue
        elif key == "singular_point":
            point_rows.append((i + 1, _floats(value.split(), i + 1)))
        elif key == "fields":
            fields = value.split()
            unknown = set(fields) - {"normal", "curvature"}
            if unknown:
                raise TrackParseError(f"unknown fields {sorted(unknown)}", i + 1)
        else:
            header[key] = value.strip()
        i += 1

    for required in ("mass_bound", "closed", "vanished"):
        if required not in header:
            raise TrackParseError(f"missing header field '{required}'", i + 1)
    mass_bound = _floats([header["mass_bound"]], 2)[0]
    singular_times = _floats(header.get("singular_times", "").split(), 5)
    if header.get("config_hash"):
        provenance["config_hash"] = header["config_hash"]

    slices: List[VarifoldSlice] = []
    n = N = None
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        tokens = lines[i].split()
        slice_line = i + 1
        if tokens[0] != "slice" or len(tokens) != 6:
            raise TrackParseError("expected 'slice t n N mass count'", slice_line)
        t, n_s, N_s, _, count = _floats(tokens[1:], slice_line)
        if n is None:
            n, N = int(n_s), int(N_s)
        elif (int(n_s), int(N_s)) != (n, N):
            raise TrackParseError("slice dimensions differ from earlier slices", slice_line)
        count = int(count)
        width = N + 1 + (N if "normal" in fields else 0) + (n if "curvature" in fields else 0)
        rows = []
        for k in range(count):
            i += 1
            if i >= len(lines):
                raise TrackParseError(f"slice declares {count} samples, file ends after {k}", i)
            row = _floats(lines[i].split(), i + 1)
            if len(row) != width:
                raise TrackParseError(f"expected {width} columns, got {len(row)}", i + 1)
            rows.append(row)
        table = np.array(rows, dtype=float).reshape(count, width)
        col = N + 1
        normals = curvatures = None
        if "normal" in fields:
            normals = table[:, col : col + N]
            col += N
        if "curvature" in fields:
            curvatures = table[:, col : col + n]
        try:
            slices.append(
                VarifoldSlice(
                    t=t,
                    n=n,
                    positions=table[:, :N],
                    weights=table[:, N],
                    normals=normals,
                    principal_curvatures=curvatures,
                )
            )
        except InvalidInputError as e:
            raise TrackParseError(str(e), slice_line)
        i += 1

    if n is None:
        raise TrackParseError("track has no slices", len(lines))
    singular_points = []
    for line_number, row in point_rows:
        try:
            singular_points.append(SpacetimePoint.from_array(row))
        except InvalidInputError as e:
            raise TrackParseError(str(e), line_number)
    try:
        return FlowTrack(
            slices=tuple(slices),
            n=n,
            N=N,
            mass_bound=mass_bound,
            singular_times=tuple(singular_times),
            singular_points=tuple(singular_points),
            closed=header["closed"] == "1",
            vanished=header["vanished"] == "1",
            provenance=provenance,
        )
    except InvalidInputError as e:
        raise TrackParseError(str(e), len(lines))


def read_track(path: Union[str, Path]) -> FlowTrack:
    path = Path(path)
    logger.debug(f"Reading track {path}")
    return parse_track(path.read_text())
