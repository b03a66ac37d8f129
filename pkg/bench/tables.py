"""
Result persistence and delta tables.

Layout of a results directory:

    delta_em_es_ase.csv    ARI_EM∘ASE - ARI_ES∘ASE per n
    delta_em_es_lse.csv    ARI_EM∘LSE - ARI_ES∘LSE per n
    delta_km_em.csv        ARI_KM∘ℓSE - ARI_EM∘ℓSE, both embeddings
    delta_km_es.csv        ARI_KM∘ℓSE - ARI_ES∘ℓSE, both embeddings
    param_error/           the same EM - ES pairings on squared parameter error
    raw/replications.csv   one row per (n, replication, method)
    raw/config.yaml        the experiment that produced the rows
    manifest.yaml          seed, config hash, library version, table list
"""

import json
import math
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import pandas as pd
import yaml
from loguru import logger

import esclust
from esclust.evaluation import PairedResult, paired_difference_table
from esclust.utils.errors import ConfigError, NothingToCompareError

from .config_loader import ExperimentConfig

Pairing = Tuple[str, str]

ARI_TABLES: Dict[str, List[Pairing]] = {
    "delta_em_es_ase.csv": [("em_ase", "es_ase")],
    "delta_em_es_lse.csv": [("em_lse", "es_lse")],
    "delta_km_em.csv": [("kmeans_ase", "em_ase"), ("kmeans_lse", "em_lse")],
    "delta_km_es.csv": [("kmeans_ase", "es_ase"), ("kmeans_lse", "es_lse")],
}

PARAM_ERROR_TABLES: Dict[str, List[Pairing]] = {
    "delta_em_es_ase.csv": [("em_ase", "es_ase")],
    "delta_em_es_lse.csv": [("em_lse", "es_lse")],
}

RAW_COLUMNS = ["n", "replication", "seed", "method", "ari", "param_err", "converged",
               "iterations", "input_digest", "resamples", "flags"]


def _build_tables(results: Sequence[PairedResult], specs: Dict[str, List[Pairing]],
                  metric: str) -> Dict[str, pd.DataFrame]:
    tables = {}
    for filename, pairings in specs.items():
        frames = []
        for method_a, method_b in pairings:
            try:
                frames.append(paired_difference_table(results, method_a, method_b, metric=metric))
            except NothingToCompareError:
                continue
        if frames:
            tables[filename] = pd.concat(frames, ignore_index=True)
    return tables


def results_to_frame(results: Sequence[PairedResult]) -> pd.DataFrame:
    """Long format: one row per (n, replication, method)"""
    rows = []
    for r in results:
        methods = list(dict.fromkeys([*r.ari_by_method, *r.converged_by_method]))
        flags = ";".join(r.flags)
        if not methods:
            rows.append({"n": r.n, "replication": r.replication, "seed": str(r.seed), "method": "",
                         "ari": math.nan, "param_err": math.nan, "converged": False,
                         "iterations": 0, "input_digest": "", "resamples": r.resamples, "flags": flags})
        for method in methods:
            rows.append({
                "n": r.n,
                "replication": r.replication,
                "seed": str(r.seed),
                "method": method,
                "ari": r.ari_by_method.get(method, math.nan),
                "param_err": r.param_err_by_method.get(method, math.nan),
                "converged": bool(r.converged_by_method.get(method, False)),
                "iterations": int(r.iterations_by_method.get(method, 0)),
                "input_digest": r.input_digest_by_method.get(method, ""),
                "resamples": r.resamples,
                "flags": flags,
            })
    return pd.DataFrame(rows, columns=RAW_COLUMNS)


def frame_to_results(frame: pd.DataFrame) -> List[PairedResult]:
    """Inverse of results_to_frame"""
    results = []
    for (n, replication), group in frame.groupby(["n", "replication"], sort=True):
        first = group.iloc[0]
        flags = first["flags"] if isinstance(first["flags"], str) and first["flags"] else ""
        result = PairedResult(replication=int(replication), n=int(n), seed=int(first["seed"]),
                              resamples=int(first["resamples"]),
                              flags=flags.split(";") if flags else [])
        for _, row in group.iterrows():
            method = row["method"]
            if not isinstance(method, str) or not method:
                continue
            if not math.isnan(row["ari"]):
                result.ari_by_method[method] = float(row["ari"])
            if not math.isnan(row["param_err"]):
                result.param_err_by_method[method] = float(row["param_err"])
            result.converged_by_method[method] = bool(row["converged"])
            result.iterations_by_method[method] = int(row["iterations"])
            digest = row["input_digest"]
            result.input_digest_by_method[method] = digest if isinstance(digest, str) else ""
        results.append(result)
    return results


def save_results(results: Sequence[PairedResult], config: ExperimentConfig, output_dir: Path) -> Path:
    raw_dir = Path(output_dir) / "raw"
    raw_dir.mkdir(parents=True, exist_ok=True)
    results_to_frame(results).to_csv(raw_dir / "replications.csv", index=False)
    config.save(raw_dir / "config.yaml")
    return raw_dir


def load_results(results_dir: str | Path) -> Tuple[List[PairedResult], ExperimentConfig]:
    """Read back raw/replications.csv and raw/config.yaml"""
    raw_dir = Path(results_dir) / "raw"
    csv_path, config_path = raw_dir / "replications.csv", raw_dir / "config.yaml"
    if not csv_path.exists() or not config_path.exists():
        raise ConfigError(f"{results_dir} does not contain raw/replications.csv and raw/config.yaml")
    frame = pd.read_csv(csv_path, dtype={"seed": str, "input_digest": str, "flags": str, "method": str})
    with open(config_path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f)
    config = ExperimentConfig(**data["experiment"])
    return frame_to_results(frame), config


def emit_tables(results: Sequence[PairedResult], config: ExperimentConfig,
                output_dir: str | Path | None = None) -> List[Path]:
    """
    Write the delta tables, the parameter-error tables and the manifest.

    :param results: replication results
    :param config: experiment that produced them
    :param output_dir: target directory, defaults to config.results_dir()
    :return: paths of the written files
    """
    if not results:
        raise NothingToCompareError("no results to tabulate")
    output_dir = Path(output_dir) if output_dir is not None else config.results_dir()

    ari_tables = _build_tables(results, ARI_TABLES, "ari")
    if not ari_tables:
        raise NothingToCompareError(f"methods {config.methods} contain no comparable pair")
    param_tables = _build_tables(results, PARAM_ERROR_TABLES, "param_err")

    output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for filename, frame in ari_tables.items():
        path = output_dir / filename
        frame.to_csv(path, index=False)
        written.append(path)
    for filename, frame in param_tables.items():
        path = output_dir / "param_error" / filename
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
        written.append(path)

    manifest = {
        "name": config.name,
        "seed": config.seed,
        "config_hash": config.config_hash(),
        "version": esclust.__version__,
        "replications": len(results),
        "flagged_replications": sum(1 for r in results if r.flags),
        "tables": [str(p.relative_to(output_dir)) for p in written],
    }
    manifest_path = output_dir / "manifest.yaml"
    with open(manifest_path, "w", encoding="utf-8") as f:
        yaml.safe_dump(manifest, f, sort_keys=False)
    written.append(manifest_path)

    for path in written:
        logger.success(f"Written: {path}")
    return written


def format_table(frame: pd.DataFrame) -> str:
    """Plain-text rendering for the console"""
    return frame.to_string(index=False, float_format=lambda v: f"{v: .4f}")


def summary_json(results: Sequence[PairedResult]) -> str:
    """Per-method mean ARI by n, as compact JSON for log lines"""
    frame = results_to_frame(results)
    summary = frame.groupby(["n", "method"])["ari"].mean().round(4)
    return json.dumps({f"{n}/{m}": v for (n, m), v in summary.items()})
