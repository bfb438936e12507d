"""CSV ingestion of user-supplied p-values.

Expected layout: a header row starting ``id,p`` followed by either
feature columns (``x1,x2,...``) or a single ``parent`` column encoding a
rooted tree by parent id (-1 or empty at the root).  Parse errors name
the offending row.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Dataset:
    ids: tuple
    pvalues: np.ndarray
    covariates: np.ndarray
    kind: str  # "features" | "tree"

    @property
    def n(self) -> int:
        return len(self.ids)


def load_dataset(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path.name}: empty file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "id" or header[1] != "p":
            raise DomainError(f"{path.name}: header must start with 'id,p'")
        extra = header[2:]
        is_tree = extra == ["parent"]
        ids = []
        pvalues = []
        covs = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DomainError(f"{path.name} row {lineno}: expected {len(header)} columns")
            try:
                ident = int(row[0])
            except ValueError:
                raise DomainError(f"{path.name} row {lineno}: bad id {row[0]!r}") from None
            try:
                p = float(row[1])
            except ValueError:
                raise DomainError(f"{path.name} row {lineno}: bad p {row[1]!r}") from None
            if not (0.0 <= p <= 1.0):
                raise DomainError(f"{path.name} row {lineno}: p out of range: {p}")
            values = []
            for name, cell in zip(extra, row[2:]):
                cell = cell.strip()
                if is_tree and cell == "":
                    values.append(-1.0)
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise DomainError(
                        f"{path.name} row {lineno}: bad {name} value {cell!r}"
                    ) from None
            ids.append(ident)
            pvalues.append(p)
            covs.append(values)
    if not ids:
        raise DomainError(f"{path.name}: no data rows")
    if len(set(ids)) != len(ids):
        raise DomainError(f"{path.name}: duplicate ids")
    covariates = np.asarray(covs, dtype=float).reshape(len(ids), len(extra))
    if is_tree:
        covariates = _reindex_tree(path.name, ids, covariates)
    return Dataset(
        ids=tuple(ids),
        pvalues=np.asarray(pvalues, dtype=float),
        covariates=covariates,
        kind="tree" if is_tree else "features",
    )


def _reindex_tree(name: str, ids, covariates: np.ndarray) -> np.ndarray:
    """Map parent ids to row positions and validate the rooted tree."""
    pos = {ident: i for i, ident in enumerate(ids)}
    parent = np.empty(len(ids), dtype=np.int64)
    roots = 0
    for i, raw in enumerate(covariates[:, 0]):
        if raw < 0:
            parent[i] = -1
            roots += 1
            continue
        ident = int(raw)
        if ident not in pos:
            raise DomainError(f"{name}: parent id {ident} does not exist")
        parent[i] = pos[ident]
    if roots != 1:
        raise DomainError(f"{name}: tree must have exactly one root, found {roots}")
    for start in range(len(ids)):
        cur, hops = start, 0
        while cur != -1:
            cur = int(parent[cur])
            hops += 1
            if hops > len(ids):
                raise DomainError(f"{name}: parent column contains a cycle")
    return parent.reshape(-1, 1).astype(float)
