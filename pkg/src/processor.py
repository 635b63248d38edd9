#!/usr/bin/env python3
"""
Segmentation processor behind the command-line interface

Segments single images into label maps, overlays and loss traces, evaluates
whole datasets against their ground-truth annotations (optionally in
parallel, one image per worker) and sweeps the superpixel count. Every run
leaves a JSON manifest next to its outputs.
"""

import csv
import json
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

try:
    from .config import NetworkConfig, TrainConfig, get_config
    from .dataset_io import (DatasetItem, discover_dataset, load_image, load_label_map,
                             save_image, save_label_map, save_overlay)
    from .exceptions import (EvaluationError, FileAccessError, NonFiniteLossError,
                             PathNotFoundError, SuperpixError, create_exception_from_error)
    from .logger import (get_logger, log_file_manifest, log_json_snapshot, log_operation_failure,
                         log_operation_start, log_operation_success, log_progress,
                         set_correlation_id)
    from .metrics import DEFAULT_TOLERANCE, MetricsReport, evaluate
    from .network import save_weights
    from .superpix_ops import hard_superpixelated_image
    from .trainer import run_segmentation, segment
    from .validator import ProcessingValidator, StageResult
except ImportError:
    from config import NetworkConfig, TrainConfig, get_config
    from dataset_io import (DatasetItem, discover_dataset, load_image, load_label_map,
                            save_image, save_label_map, save_overlay)
    from exceptions import (EvaluationError, FileAccessError, NonFiniteLossError,
                            PathNotFoundError, SuperpixError, create_exception_from_error)
    from logger import (get_logger, log_file_manifest, log_json_snapshot, log_operation_failure,
                        log_operation_start, log_operation_success, log_progress,
                        set_correlation_id)
    from metrics import DEFAULT_TOLERANCE, MetricsReport, evaluate
    from network import save_weights
    from superpix_ops import hard_superpixelated_image
    from trainer import run_segmentation, segment
    from validator import ProcessingValidator, StageResult

logger = get_logger('processor')

DEFAULT_SWEEP_COUNTS = [25, 50, 100, 200, 400]
EVAL_COLUMNS = ['image_id', 'n_superpixels', 'asa', 'br']
SWEEP_COLUMNS = ['count', 'image_id', 'asa', 'br']
SUMMARY_ID = 'mean'


@dataclass
class RunManifest:
    """
    Everything needed to reproduce a run and to find what it wrote

    metrics entries are {'image_id', 'n_superpixels', 'report'} with report
    a MetricsReport dict; skipped maps image IDs to the reason they were left out.
    """
    command: str
    network_config: Dict[str, Any]
    train_config: Dict[str, Any]
    settings: Dict[str, Any] = field(default_factory=dict)
    inputs: List[str] = field(default_factory=list)
    outputs: List[str] = field(default_factory=list)
    metrics: List[Dict[str, Any]] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)
    skipped: Dict[str, str] = field(default_factory=dict)
    version: str = field(default_factory=lambda: get_config().VERSION)
    created_at: str = field(default_factory=lambda: datetime.now().isoformat())

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> 'RunManifest':
        return cls(**json.loads(text))

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        try:
            path.write_text(self.to_json(), encoding='utf-8')
        except OSError as e:
            raise FileAccessError(str(path), 'write manifest') from e
        return path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'RunManifest':
        return cls.from_json(Path(path).read_text(encoding='utf-8'))

    def missing_outputs(self) -> List[str]:
        """Referenced output files that do not exist on disk"""
        return [output for output in self.outputs if not Path(output).is_file()]

    def metric_reports(self) -> List[MetricsReport]:
        return [MetricsReport.from_dict(entry['report']) for entry in self.metrics]


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if len(values) else float('nan')


class SegmentationProcessor:
    """
    Runs segmentation and evaluation jobs for the command-line interface

    Images are independent, so datasets are processed by a thread pool with
    one model per image. Results go through a lock-protected sink.
    """

    def __init__(self, net_cfg: NetworkConfig, train_cfg: TrainConfig,
                 jobs: Optional[int] = None, tolerance: int = DEFAULT_TOLERANCE,
                 oracle: bool = False):
        self.config = get_config()
        self.net_cfg = net_cfg
        self.train_cfg = train_cfg
        self.jobs = self.config.resolve_jobs(jobs)
        self.tolerance = tolerance
        self.oracle = oracle
        self.validator = ProcessingValidator()
        self._lock = threading.Lock()

        if self.config.torch_threads > 0:
            torch.set_num_threads(self.config.torch_threads)

    def _manifest(self, command: str, net_cfg: Optional[NetworkConfig] = None, **settings) -> RunManifest:
        return RunManifest(
            command=command,
            network_config=(net_cfg or self.net_cfg).to_dict(),
            train_config=self.train_cfg.to_dict(),
            settings=settings
        )

    def _prepare_output_dir(self, out_dir: Path) -> Path:
        valid, error_msg = self.validator.validate_output_path(out_dir / 'manifest.json')
        if not valid:
            raise FileAccessError(str(out_dir), f'prepare output directory ({error_msg})')
        return out_dir

    def segment_image(self, image_path: Union[str, Path], out_dir: Union[str, Path],
                      save_superpixelated: bool = False, save_model_weights: bool = False) -> RunManifest:
        """
        Segment one image and write its artifacts

        Writes <stem>_labels.png, <stem>_overlay.png, <stem>_trace.csv and
        <stem>_manifest.json, plus <stem>_superpixelated.png and
        <stem>_weights.spxw when requested.
        """
        image_path = Path(image_path)
        valid, error_msg = self.validator.validate_input_files([str(image_path)])
        if not valid:
            raise PathNotFoundError(str(image_path), operation=f"segment ({error_msg.strip()})")
        out_dir = self._prepare_output_dir(Path(out_dir))
        stem = image_path.stem
        set_correlation_id(stem)

        start = time.perf_counter()
        log_operation_start('segment', image=str(image_path), n_superpixels=self.net_cfg.n_superpixels)

        image = load_image(image_path)
        result = run_segmentation(image, self.net_cfg, self.train_cfg)

        manifest = self._manifest('segment')
        manifest.inputs.append(str(image_path))

        labels_path = out_dir / f'{stem}_labels.png'
        overlay_path = out_dir / f'{stem}_overlay.png'
        trace_path = out_dir / f'{stem}_trace.csv'
        save_label_map(result.labels, labels_path)
        save_overlay(image, result.labels, overlay_path)
        result.trace.to_csv(trace_path)
        manifest.outputs.extend(str(p) for p in (labels_path, overlay_path, trace_path))

        if save_superpixelated:
            superpixelated = hard_superpixelated_image(result.labels, torch.as_tensor(image))
            superpixelated_path = out_dir / f'{stem}_superpixelated.png'
            save_image(superpixelated.numpy(), superpixelated_path)
            manifest.outputs.append(str(superpixelated_path))

        if save_model_weights:
            weights_path = out_dir / f'{stem}_weights.spxw'
            save_weights(result.model, weights_path)
            manifest.outputs.append(str(weights_path))

        manifest.timings = {
            'fit_seconds': round(result.trace.duration_seconds, 3),
            'total_seconds': round(time.perf_counter() - start, 3),
        }
        manifest.settings['n_superpixels_used'] = int(result.labels.max()) + 1
        manifest.settings['initial_total'] = result.trace.initial_total
        manifest.settings['final_total'] = result.trace.final_total

        manifest_path = out_dir / f'{stem}_manifest.json'
        manifest.outputs.append(str(manifest_path))
        manifest.save(manifest_path)

        log_file_manifest(str(out_dir), manifest.outputs)
        log_operation_success('segment', duration=time.perf_counter() - start,
                              n_superpixels_used=manifest.settings['n_superpixels_used'])
        return manifest

    def _evaluate_item(self, item: DatasetItem, net_cfg: NetworkConfig) -> StageResult:
        """Segment (or take the oracle prediction for) one image and score it"""
        set_correlation_id(item.image_id)
        if not item.annotation_paths:
            logger.warning(f"Skipping {item.image_id}: no ground-truth annotations")
            return StageResult(False, {'image_id': item.image_id}, 'no ground-truth annotations')

        start = time.perf_counter()
        try:
            image = load_image(item.image_path)
            gts = [load_label_map(path, expected_shape=image.shape[:2]) for path in item.annotation_paths]
            pred = gts[0] if self.oracle else segment(image, net_cfg, self.train_cfg)
            report = evaluate(pred, gts, self.tolerance)
        except NonFiniteLossError:
            raise
        except SuperpixError as e:
            logger.warning(f"Skipping {item.image_id}: {e}")
            return StageResult(False, {'image_id': item.image_id}, str(e))

        logger.info(f"{item.image_id}: ASA={report.asa:.4f} BR={report.br:.4f} "
                    f"({report.n_superpixels_used} superpixels)")
        return StageResult(True, {
            'image_id': item.image_id,
            'report': report.to_dict(),
            'seconds': round(time.perf_counter() - start, 3),
            'inputs': [str(item.image_path)] + [str(p) for p in item.annotation_paths],
        })

    def _run_dataset(self, items: List[DatasetItem], net_cfg: NetworkConfig) -> Tuple[List[dict], Dict[str, str]]:
        """Evaluate every item with the worker pool; returns (successful job data, skipped reasons)"""
        results: List[StageResult] = []
        done = 0
        abort = threading.Event()

        def job(item: DatasetItem) -> None:
            nonlocal done
            if abort.is_set():
                return
            try:
                outcome = self._evaluate_item(item, net_cfg)
            except BaseException:
                # set before the future fails, so no queued image starts training
                abort.set()
                raise
            with self._lock:
                results.append(outcome)
                done += 1
                log_progress('evaluate', done, len(items), image_id=item.image_id)
                logger.debug(f"Finished {item.image_id}", extra={'stage_result': outcome.to_dict()})

        workers = min(self.jobs, max(1, len(items)))
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix='superpix') as pool:
            futures = [pool.submit(job, item) for item in items]
            try:
                for future in futures:
                    # re-raises worker exceptions (NonFiniteLossError included)
                    future.result()
            except BaseException:
                abort.set()
                pool.shutdown(wait=False, cancel_futures=True)
                raise

        succeeded = sorted((r.data for r in results if r.success), key=lambda d: d['image_id'])
        skipped = {r.data['image_id']: r.error for r in results if not r.success}
        return succeeded, skipped

    def _discover(self, dataset_dir: Union[str, Path]) -> List[DatasetItem]:
        items = discover_dataset(dataset_dir)
        if not items:
            raise EvaluationError(f"No images found in {dataset_dir}")
        return items

    def evaluate_dataset(self, dataset_dir: Union[str, Path], out_csv: Union[str, Path]) -> RunManifest:
        """
        Segment and score every image of a dataset

        Writes one CSV row per image (image_id, n_superpixels, asa, br) and a
        final 'mean' row, plus <csv stem>_manifest.json next to the CSV.

        Raises:
            EvaluationError: If the dataset has no usable image
        """
        out_csv = Path(out_csv)
        self._prepare_output_dir(out_csv.parent)
        start = time.perf_counter()
        log_operation_start('evaluate', dataset=str(dataset_dir), jobs=self.jobs, oracle=self.oracle)

        items = self._discover(dataset_dir)
        succeeded, skipped = self._run_dataset(items, self.net_cfg)
        if not succeeded:
            raise EvaluationError(f"No usable images in {dataset_dir} ({len(skipped)} skipped)")

        rows = [[d['image_id'], d['report']['n_superpixels_used'], d['report']['asa'], d['report']['br']]
                for d in succeeded]
        summary = [SUMMARY_ID,
                   _mean([row[1] for row in rows]),
                   _mean([row[2] for row in rows]),
                   _mean([row[3] for row in rows])]
        self._write_csv(out_csv, EVAL_COLUMNS, rows + [summary])

        manifest = self._manifest('eval', dataset=str(dataset_dir), tolerance=self.tolerance,
                                  oracle=self.oracle, jobs=self.jobs)
        self._record(manifest, succeeded, skipped, self.net_cfg.n_superpixels)
        manifest.timings['total_seconds'] = round(time.perf_counter() - start, 3)
        self._finish(manifest, out_csv)

        log_operation_success('evaluate', duration=time.perf_counter() - start,
                              images=len(succeeded), skipped=len(skipped),
                              mean_asa=summary[2], mean_br=summary[3])
        return manifest

    def sweep(self, dataset_dir: Union[str, Path], out_csv: Union[str, Path],
              counts: Sequence[int] = DEFAULT_SWEEP_COUNTS) -> RunManifest:
        """
        Evaluate the dataset once per superpixel count

        Writes a long-format CSV (count, image_id, asa, br) with a 'mean' row
        closing every count.
        """
        out_csv = Path(out_csv)
        self._prepare_output_dir(out_csv.parent)
        start = time.perf_counter()
        counts = list(counts)
        log_operation_start('sweep', dataset=str(dataset_dir), counts=counts)

        items = self._discover(dataset_dir)
        manifest = self._manifest('sweep', dataset=str(dataset_dir), tolerance=self.tolerance,
                                  oracle=self.oracle, jobs=self.jobs, counts=counts)

        rows = []
        for count in counts:
            # raises ConfigurationError for count < 2
            net_cfg = replace(self.net_cfg, n_superpixels=count)
            count_start = time.perf_counter()
            succeeded, skipped = self._run_dataset(items, net_cfg)
            if not succeeded:
                raise EvaluationError(f"No usable images in {dataset_dir} for count {count}")

            count_rows = [[count, d['image_id'], d['report']['asa'], d['report']['br']] for d in succeeded]
            rows.extend(count_rows)
            rows.append([count, SUMMARY_ID,
                         _mean([row[2] for row in count_rows]),
                         _mean([row[3] for row in count_rows])])

            self._record(manifest, succeeded, skipped, count)
            manifest.timings[f'count_{count}_seconds'] = round(time.perf_counter() - count_start, 3)
            logger.info(f"Sweep N={count}: mean ASA={rows[-1][2]:.4f} mean BR={rows[-1][3]:.4f}")

        self._write_csv(out_csv, SWEEP_COLUMNS, rows)
        manifest.timings['total_seconds'] = round(time.perf_counter() - start, 3)
        self._finish(manifest, out_csv)

        log_operation_success('sweep', duration=time.perf_counter() - start, counts=counts)
        return manifest

    @staticmethod
    def _record(manifest: RunManifest, succeeded: List[dict], skipped: Dict[str, str],
                n_superpixels: int) -> None:
        for data in succeeded:
            manifest.metrics.append({
                'image_id': data['image_id'],
                'n_superpixels': n_superpixels,
                'report': data['report'],
            })
            manifest.timings.setdefault(f"{data['image_id']}_seconds", data['seconds'])
            for path in data['inputs']:
                if path not in manifest.inputs:
                    manifest.inputs.append(path)
        manifest.skipped.update(skipped)

    def _write_csv(self, path: Path, columns: List[str], rows: List[list]) -> None:
        try:
            with open(path, 'w', newline='', encoding='utf-8') as f:
                writer = csv.writer(f)
                writer.writerow(columns)
                writer.writerows(rows)
        except OSError as e:
            raise create_exception_from_error(e, {'filename': str(path), 'operation': 'write CSV'}) from e
        logger.info(f"Wrote {len(rows)} rows to {path}")

    def _finish(self, manifest: RunManifest, out_csv: Path) -> None:
        manifest_path = out_csv.with_name(f'{out_csv.stem}_manifest.json')
        manifest.outputs.extend([str(out_csv), str(manifest_path)])
        manifest.save(manifest_path)
        log_json_snapshot('run_manifest', {'command': manifest.command, 'skipped': manifest.skipped,
                                           'outputs': manifest.outputs})

    def run_command(self, operation: str, func, *args, **kwargs) -> RunManifest:
        """Run one processor operation with failure logging"""
        start = time.perf_counter()
        try:
            return func(*args, **kwargs)
        except Exception as e:
            log_operation_failure(operation, e, duration=time.perf_counter() - start)
            raise
