"""File formats: preference CSV ingest/emit, truth sidecars, sample logs and
summary reports. All text, all carrying a provenance header."""

from __future__ import annotations

import json
import os
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .perms import Dataset, PreferenceSet, analyze_transitivity
from .sampler import SampleLog
from .simulate import SimConfig, TruthRecord


class DataError(ValueError):
    """Malformed or inconsistent input data."""


def parse_preferences(path, n_items: int | None = None) -> Dataset:
    """Read a preference CSV with header ``assessor,preferred,other``.

    Item indices in the file are 1-based; n is inferred as the largest index
    unless overridden.
    """
    path = Path(path)
    rows: dict[int, list[tuple[int, int]]] = {}
    max_item = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if lineno == 1 or line.lower().startswith("assessor"):
                if line.lower().replace(" ", "") == "assessor,preferred,other":
                    continue
            parts = line.split(",")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(parts)}")
            try:
                assessor, pref, oth = (int(p) for p in parts)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer field") from None
            if pref == oth:
                raise DataError(f"{path}:{lineno}: self-comparison {pref},{oth}")
            if pref < 1 or oth < 1:
                raise DataError(f"{path}:{lineno}: item indices are 1-based")
            rows.setdefault(assessor, [])
            if any({pref - 1, oth - 1} == {a, b} for a, b in rows[assessor]):
                raise DataError(
                    f"{path}:{lineno}: duplicate pair {pref},{oth} for "
                    f"assessor {assessor}"
                )
            rows[assessor].append((pref - 1, oth - 1))
            max_item = max(max_item, pref, oth)
    if not rows:
        raise DataError(f"{path}: no preference rows")
    n = n_items if n_items is not None else max_item
    if max_item > n:
        raise DataError(f"{path}: item index {max_item} exceeds n_items={n}")
    sets = []
    for assessor in sorted(rows):
        pairs = rows[assessor]
        try:
            sets.append(
                PreferenceSet(
                    assessor,
                    np.array([p for p, _ in pairs]),
                    np.array([o for _, o in pairs]),
                )
            )
        except ValueError as exc:
            raise DataError(str(exc)) from None
    try:
        return Dataset(n, tuple(sets))
    except ValueError as exc:
        raise DataError(str(exc)) from None


def transitivity_summary(dataset: Dataset) -> dict:
    """Count assessors whose preference digraph contains a cycle."""
    cyclic = [
        ps.assessor_id
        for ps in dataset.preference_sets
        if not analyze_transitivity(ps, dataset.n_items).is_transitive
    ]
    return {
        "n_assessors": dataset.n_assessors,
        "n_non_transitive": len(cyclic),
        "non_transitive_assessors": cyclic,
    }


def write_preferences(dataset: Dataset, path, header_info: dict | None = None) -> None:
    """Emit a dataset in the preference CSV format (1-based item indices),
    canonicalized by assessor then pair."""
    lines = _provenance_lines(header_info)
    lines.append("assessor,preferred,other")
    for ps in dataset.preference_sets:
        for pref, oth in sorted(ps.pairs()):
            lines.append(f"{ps.assessor_id},{pref + 1},{oth + 1}")
    Path(path).write_text("\n".join(lines) + "\n")


def _provenance_lines(info: dict | None) -> list[str]:
    if not info:
        return []
    return ["# config: " + json.dumps(info, default=_json_default, sort_keys=True)]


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_truth(truth: TruthRecord, path) -> None:
    payload = {
        "rho_true": truth.rho_true.tolist(),
        "latent_true": truth.latent_true.tolist(),
        "labels_true": truth.labels_true.tolist(),
        "flips": [f.astype(int).tolist() for f in truth.flips],
        "config": None if truth.config is None else asdict(truth.config),
    }
    Path(path).write_text(json.dumps(payload, default=_json_default, indent=1))


def read_truth(path) -> TruthRecord:
    payload = json.loads(Path(path).read_text())
    cfg = None
    if payload.get("config"):
        raw = payload["config"]
        if raw.get("rho_true") is not None:
            raw["rho_true"] = np.array(raw["rho_true"])
        if raw.get("beta_true") is not None:
            raw["beta_true"] = tuple(raw["beta_true"])
        if raw.get("cluster_weights") is not None:
            raw["cluster_weights"] = np.array(raw["cluster_weights"])
        cfg = SimConfig(**raw)
    return TruthRecord(
        rho_true=np.array(payload["rho_true"], dtype=np.int64),
        latent_true=np.array(payload["latent_true"], dtype=np.int64),
        labels_true=np.array(payload["labels_true"], dtype=np.int64),
        flips=[np.array(f, dtype=bool) for f in payload["flips"]],
        config=cfg,
    )


def save_samples(samples: SampleLog, outdir, config_info: dict | None = None) -> None:
    """Write a sample log as tabular text files plus a JSON meta file."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    S, G = samples.alphas.shape
    N, n = samples.latent.shape[1], samples.n_items
    meta = {
        "format": "mallowspair-samples v1",
        "model": samples.model,
        "metric": samples.metric,
        "n_items": n,
        "n_clusters": G,
        "n_assessors": N,
        "n_samples": S,
        "seed": samples.seed,
        "thinning": samples.thinning,
        "burn_in": samples.burn_in,
        "accepted": samples.accepted,
        "proposed": samples.proposed,
        "g_eval_count": samples.g_eval_count,
        "config": config_info or {},
    }
    (outdir / "meta.json").write_text(json.dumps(meta, default=_json_default, indent=1))
    header = _provenance_lines({"seed": samples.seed, **(config_info or {})})

    cols = [f"alpha_{g + 1}" for g in range(G)]
    mat = [samples.alphas]
    if samples.thetas is not None:
        cols.append("theta")
        mat.append(samples.thetas[:, None])
    if samples.betas is not None:
        cols += ["beta0", "beta1"]
        mat.append(samples.betas)
    cols += [f"eta_{g + 1}" for g in range(G)]
    mat.append(samples.weights)
    scal = np.hstack(mat)
    with open(outdir / "scalars.csv", "w") as fh:
        for line in header:
            fh.write(line + "\n")
        fh.write("sample," + ",".join(cols) + "\n")
        for s in range(S):
            fh.write(f"{s}," + ",".join(f"{v:.10g}" for v in scal[s]) + "\n")

    with open(outdir / "rho.csv", "w") as fh:
        for line in header:
            fh.write(line + "\n")
        fh.write("sample,cluster," + ",".join(f"r{i + 1}" for i in range(n)) + "\n")
        for s in range(S):
            for g in range(G):
                fh.write(
                    f"{s},{g + 1},"
                    + ",".join(map(str, samples.rhos[s, g].tolist()))
                    + "\n"
                )

    with open(outdir / "latent.csv", "w") as fh:
        for line in header:
            fh.write(line + "\n")
        fh.write("sample,assessor," + ",".join(f"r{i + 1}" for i in range(n)) + "\n")
        for s in range(S):
            for j in range(N):
                fh.write(
                    f"{s},{j},"
                    + ",".join(map(str, samples.latent[s, j].tolist()))
                    + "\n"
                )

    with open(outdir / "labels.csv", "w") as fh:
        for line in header:
            fh.write(line + "\n")
        fh.write("sample," + ",".join(f"z_{j}" for j in range(N)) + "\n")
        for s in range(S):
            fh.write(f"{s}," + ",".join(map(str, (samples.labels[s] + 1).tolist())) + "\n")


def load_samples(indir) -> SampleLog:
    indir = Path(indir)
    meta = json.loads((indir / "meta.json").read_text())
    S, G = meta["n_samples"], meta["n_clusters"]
    N, n = meta["n_assessors"], meta["n_items"]

    def _read(path, skip_first_cols):
        rows = []
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or line[0].isalpha() or line.startswith("sample"):
                    continue
                rows.append([float(v) for v in line.split(",")[skip_first_cols:]])
        return np.array(rows)

    scal = _read(indir / "scalars.csv", 1)
    k = 0
    alphas = scal[:, k:k + G]
    k += G
    thetas = betas = None
    if meta["model"] == "BM":
        thetas = scal[:, k]
        k += 1
    else:
        betas = scal[:, k:k + 2]
        k += 2
    weights = scal[:, k:k + G]

    rho_rows = _read(indir / "rho.csv", 2).astype(np.int64)
    rhos = rho_rows.reshape(S, G, n)
    lat_rows = _read(indir / "latent.csv", 2).astype(np.int64)
    latent = lat_rows.reshape(S, N, n)
    labels = _read(indir / "labels.csv", 1).astype(np.int64) - 1

    return SampleLog(
        model=meta["model"],
        metric=meta["metric"],
        n_items=n,
        n_clusters=G,
        seed=meta["seed"],
        thinning=meta["thinning"],
        burn_in=meta["burn_in"],
        alphas=alphas,
        rhos=rhos,
        thetas=thetas,
        betas=betas,
        latent=latent,
        labels=labels,
        weights=weights,
        accepted=meta.get("accepted", {}),
        proposed=meta.get("proposed", {}),
        g_eval_count=meta.get("g_eval_count", 0),
    )


def default_cache_dir() -> Path:
    return Path(os.environ.get("MALLOWSPAIR_CACHE_DIR", ".mallowspair_cache"))
