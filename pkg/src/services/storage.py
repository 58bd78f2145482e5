"""File persistence for maps, data logs, metrics and summaries."""

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np

from src.models.errors import MapFormatError
from src.models.run import RunMetrics, StepRecord
from src.models.samples import OdometryControl, ScanObservation
from src.models.world import OccupancyGrid, Pose

logger = logging.getLogger(__name__)

METRICS_COLUMNS = [
    "variant",
    "seed",
    "log_index",
    "t",
    "error",
    "samples",
    "species",
    "hypotheses",
    "resources",
    "wall_time",
]
SWEEP_COLUMNS = ["param", "value", "t", "mean_samples"]


class StorageService:
    """Plain-text storage; every write goes through a temp file and an atomic rename."""

    def _write_atomic(self, path: str | Path, text: str) -> Path:
        """Write text next to path, then rename over it."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
                handle.write(text)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        logger.debug(f"Wrote {path}")
        return path

    def _read(self, path: str | Path) -> str:
        try:
            return Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise MapFormatError(f"cannot read {path}: {exc}") from exc

    # Maps

    def _grid_to_text(self, grid: OccupancyGrid) -> str:
        """Header line, then one '#'/'.' row per iy starting at iy = 0."""
        header = (
            f"{grid.width_cells} {grid.height_cells} {grid.resolution!r} "
            f"{grid.origin_x!r} {grid.origin_y!r}"
        )
        symbols = np.where(grid.cells, "#", ".")
        rows = ["".join(symbols[:, iy]) for iy in range(grid.height_cells)]
        return "\n".join([header, *rows]) + "\n"

    def _text_to_grid(self, text: str, source: str = "<map>") -> OccupancyGrid:
        lines = text.splitlines()
        if not lines:
            raise MapFormatError(f"{source}: empty map file")
        parts = lines[0].split()
        if len(parts) != 5:
            raise MapFormatError(f"{source}: header needs 'width height resolution ox oy'")
        try:
            width, height = int(parts[0]), int(parts[1])
            resolution, origin_x, origin_y = (float(p) for p in parts[2:])
        except ValueError as exc:
            raise MapFormatError(f"{source}: bad header: {exc}") from exc

        rows = lines[1:]
        if len(rows) != height:
            raise MapFormatError(f"{source}: expected {height} rows, found {len(rows)}")
        cells = np.zeros((width, height), dtype=bool)
        for iy, row in enumerate(rows):
            if len(row) != width or set(row) - {"#", "."}:
                raise MapFormatError(f"{source}: row {iy} is not {width} '#'/'.' characters")
            cells[:, iy] = np.frombuffer(row.encode("ascii"), dtype=np.uint8) == ord("#")
        try:
            return OccupancyGrid(
                width_cells=width,
                height_cells=height,
                resolution=resolution,
                origin_x=origin_x,
                origin_y=origin_y,
                cells=cells,
            )
        except ValueError as exc:
            raise MapFormatError(f"{source}: {exc}") from exc

    def save_map(self, grid: OccupancyGrid, path: str | Path) -> Path:
        return self._write_atomic(path, self._grid_to_text(grid))

    def load_map(self, path: str | Path) -> OccupancyGrid:
        return self._text_to_grid(self._read(path), str(path))

    # Data logs

    def _record_to_item(self, record: StepRecord) -> dict:
        """Convert StepRecord to a log line."""
        c = record.control
        return {
            "t": record.t,
            "control": [c.delta_trans, c.delta_rot1, c.delta_rot2],
            "ranges": record.scan.ranges.tolist(),
            "truth": record.truth.as_array().tolist(),
        }

    def _item_to_record(self, item: dict, bearings: np.ndarray, max_range: float) -> StepRecord:
        """Convert a log line to StepRecord."""
        trans, rot1, rot2 = item["control"]
        return StepRecord(
            t=item["t"],
            control=OdometryControl(delta_trans=trans, delta_rot1=rot1, delta_rot2=rot2),
            scan=ScanObservation(bearings=bearings, ranges=item["ranges"], max_range=max_range),
            truth=Pose.from_array(item["truth"]),
        )

    def save_log(self, records: list[StepRecord], path: str | Path) -> Path:
        """One JSON object per line; the header declares bearings and max_range."""
        if records:
            bearings = records[0].scan.bearings.tolist()
            max_range = records[0].scan.max_range
        else:
            bearings, max_range = [], 1.0
        header = {"bearings": bearings, "max_range": max_range, "records": len(records)}
        lines = [json.dumps(header)] + [json.dumps(self._record_to_item(r)) for r in records]
        return self._write_atomic(path, "\n".join(lines) + "\n")

    def load_log(self, path: str | Path) -> list[StepRecord]:
        lines = [line for line in self._read(path).splitlines() if line.strip()]
        if not lines:
            raise MapFormatError(f"{path}: empty log file")
        try:
            header = json.loads(lines[0])
            bearings = np.asarray(header["bearings"], dtype=float)
            max_range = float(header["max_range"])
            records = [
                self._item_to_record(json.loads(line), bearings, max_range) for line in lines[1:]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise MapFormatError(f"{path}: malformed log: {exc}") from exc
        if len(records) != header.get("records", len(records)):
            raise MapFormatError(f"{path}: header announces {header['records']} records")
        return records

    # Results

    def metrics_rows(self, runs: list[RunMetrics]) -> list[dict]:
        rows = []
        for run in runs:
            for t, error in enumerate(run.errors):
                rows.append(
                    {
                        "variant": run.variant.value,
                        "seed": run.seed,
                        "log_index": run.log_index,
                        "t": t,
                        "error": repr(error),
                        "samples": run.sample_totals[t],
                        "species": run.species_counts[t],
                        "hypotheses": run.hypotheses[t],
                        "resources": repr(run.resources[t]),
                        "wall_time": f"{run.wall_times[t]:.6f}",
                    }
                )
        return rows

    def _csv_text(self, columns: list[str], rows: list[dict]) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buffer.getvalue()

    def save_metrics_csv(
        self, runs: list[RunMetrics], path: str | Path, include_wall_time: bool = False
    ) -> Path:
        """Per-step metrics; without wall time the file is identical across reruns."""
        columns = METRICS_COLUMNS if include_wall_time else METRICS_COLUMNS[:-1]
        rows = self.metrics_rows(runs)
        if not include_wall_time:
            for row in rows:
                row.pop("wall_time")
        return self._write_atomic(path, self._csv_text(columns, rows))

    def save_sweep_csv(
        self, param: str, curves: dict[float, list[float]], path: str | Path
    ) -> Path:
        rows = [
            {"param": param, "value": value, "t": t, "mean_samples": repr(size)}
            for value, curve in curves.items()
            for t, size in enumerate(curve)
        ]
        return self._write_atomic(path, self._csv_text(SWEEP_COLUMNS, rows))

    def save_json(self, data: Any, path: str | Path) -> Path:
        return self._write_atomic(path, json.dumps(data, indent=2, sort_keys=True) + "\n")

    def load_json(self, path: str | Path) -> Any:
        return json.loads(self._read(path))


storage = StorageService()
