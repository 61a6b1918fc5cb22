"""
Batches of seeded trials, their statistics, and the matching-cost benchmark.
"""
from __future__ import annotations

import logging
import multiprocessing
import time
from dataclasses import dataclass

import numpy as np
import pandas as pd

from apps.depth_seg.segmentation import extract_rois
from apps.matching.matcher import ReferenceMatcher
from apps.refdb.database import ReferenceDatabase

from .outcomes import SUCCESS_OUTCOMES, TrialOutcome
from .pipeline import PipelineConfig
from .render import raycast, render
from .scene import TARGET_OBJECT, World, sample_placement
from .texture import ProceduralDescriptorSource
from .trial import match_roi, run_trial

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ['seed', 'mode', 'model_error_mm', 'outcome', 'convergence_time_s', 'matcher_invocations']
FAST_CONVERGENCE_S = 2.0
FAST_CONVERGENCE_SHARE = 0.6

PROB = 'prob'
ALL = 'all'
STRATEGIES = (PROB, ALL)


def trial_seeds(seed, trials):
    """Independent per-trial seeds derived from the experiment seed."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(trials)]


# Worker state, set once per process by the pool initializer
_worker = {}


def _worker_init(db, config):
    _worker['db'] = db
    _worker['config'] = config


def _worker_trial(job):
    mode, model_error_mm, seed = job
    return run_trial(mode, model_error_mm, seed, _worker['db'], _worker['config'])


def run_experiment(mode, model_error_mm, trials, seed, db: ReferenceDatabase, config: PipelineConfig | None = None,
                   workers=1, progress=None):
    """
    Run ``trials`` independent trials of one condition.

    Trials are seeded from ``seed`` alone, so the records do not depend on
    ``workers``.

    Args:
        progress: optional callable invoked once per finished trial

    Returns:
        list[TrialRecord]: in seed order
    """
    config = config or PipelineConfig()
    jobs = [(mode, model_error_mm, s) for s in trial_seeds(seed, trials)]
    records = []
    if workers > 1:
        with multiprocessing.Pool(workers, initializer=_worker_init, initargs=(db, config)) as pool:
            for record in pool.imap(_worker_trial, jobs):
                records.append(record)
                if progress is not None:
                    progress()
    else:
        for job in jobs:
            records.append(run_trial(job[0], job[1], job[2], db, config))
            if progress is not None:
                progress()
    logger.info(
        f"{mode.upper()} {model_error_mm:g} mm: "
        f"{sum(r.success for r in records)}/{len(records)} successful trials"
    )
    return records


def records_frame(records):
    return pd.DataFrame([record.as_row() for record in records])


def results_frame(run):
    """Stored results of an ExperimentRun as a results frame."""
    rows = run.results.values('seed', 'outcome', 'convergence_time_s', 'matcher_invocations')
    frame = pd.DataFrame(list(rows), columns=['seed', 'outcome', 'convergence_time_s', 'matcher_invocations'])
    frame.insert(1, 'mode', run.mode)
    frame.insert(2, 'model_error_mm', run.model_error_mm)
    return frame


def write_results_csv(frame, path):
    frame[RESULT_COLUMNS].to_csv(path, index=False)


def read_results_csv(path):
    frame = pd.read_csv(path)
    missing = set(RESULT_COLUMNS) - set(frame.columns)
    if missing:
        raise ValueError(f"{path} lacks result column(s): {', '.join(sorted(missing))}")
    return frame


def outcome_table(frame):
    """
    Counts and frequencies per outcome, grouped as Success/Failure, with
    every outcome listed even when it never occurred.
    """
    counts = frame['outcome'].value_counts()
    total = len(frame)
    rows = []
    for outcome in TrialOutcome:
        count = int(counts.get(outcome.value, 0))
        rows.append({
            'group': 'Success' if outcome in SUCCESS_OUTCOMES else 'Failure',
            'outcome': outcome.value,
            'count': count,
            'frequency': count / total if total else 0.0,
        })
    return pd.DataFrame(rows).set_index(['group', 'outcome'])


def success_frequency(frame):
    if frame.empty:
        return 0.0
    successes = {outcome.value for outcome in SUCCESS_OUTCOMES}
    return float(frame['outcome'].isin(successes).mean())


def convergence_histogram(times, bin_s=1.0, timeout_s=30.0):
    """Convergence times of detected trials in ``bin_s`` bins up to the timeout."""
    if bin_s <= 0:
        raise ValueError("bin_s must be positive")
    values = pd.Series(times, dtype=float).dropna()
    edges = np.arange(0.0, timeout_s + bin_s, bin_s)
    edges[-1] = max(edges[-1], timeout_s)
    counts, edges = np.histogram(values.clip(upper=timeout_s), bins=edges)
    return pd.DataFrame({'bin_start_s': edges[:-1], 'bin_end_s': edges[1:], 'count': counts})


def fraction_converged_within(frame, seconds=FAST_CONVERGENCE_S):
    """Share of detected trials whose filter converged within ``seconds``; None without detections."""
    times = frame['convergence_time_s'].dropna()
    if times.empty:
        return None
    share = float((times <= seconds + 1e-9).mean())
    if share < FAST_CONVERGENCE_SHARE:
        logger.warning(
            f"Only {share:.0%} of detections converged within {seconds:g} s "
            f"(expected more than {FAST_CONVERGENCE_SHARE:.0%})"
        )
    return share


@dataclass(frozen=True, eq=False)
class ExperimentSummary:
    outcome_table: pd.DataFrame
    histogram: pd.DataFrame
    success_frequency: float
    converged_within_2s: float | None
    mean_invocations_prob: float
    mean_invocations_all: float


def summarize(records, timeout_s=30.0, bin_s=1.0) -> ExperimentSummary:
    frame = records_frame(records)
    return ExperimentSummary(
        outcome_table=outcome_table(frame),
        histogram=convergence_histogram(frame['convergence_time_s'], bin_s, timeout_s),
        success_frequency=success_frequency(frame),
        converged_within_2s=fraction_converged_within(frame),
        mean_invocations_prob=float(frame['mean_invocations_prob'].mean()),
        mean_invocations_all=float(frame['mean_invocations_all'].mean()),
    )


# Matching benchmark

@dataclass(frozen=True, eq=False)
class RecordedFrame:
    rois: list
    keypoints: list


def record_static_videos(config: PipelineConfig, videos, duration_s, seed, progress=None):
    """
    Render and segment seeded static videos of the target object once so
    every database size replays identical frames.
    """
    scene = config.scene
    cam = scene.camera()
    spec = scene.object(TARGET_OBJECT)
    params = config.segmentation_for(TARGET_OBJECT)
    frames_per_video = config.trial.frames_within(duration_s)
    recorded = []
    for child in np.random.SeedSequence(seed).spawn(videos):
        placement_rng, noise_rng, descriptor_rng = (np.random.default_rng(s) for s in child.spawn(3))
        world = World(scene, (sample_placement(scene, placement_rng, spec),), geometry=config.geometry)
        hits = raycast(world, cam)
        source = ProceduralDescriptorSource(scene.descriptor_noise, descriptor_rng)
        video = []
        for k in range(frames_per_video):
            frame = render(world, cam, rng=noise_rng, hits=hits, time=k * config.trial.dt)
            video.append(RecordedFrame(extract_rois(frame.depth, cam, params), source.keypoints(frame)))
        recorded.append(video)
        if progress is not None:
            progress()
    return recorded


def database_prefix(db: ReferenceDatabase, size):
    """A fresh database holding the first ``size`` references of ``db``, weights uniform."""
    if not 1 <= size <= len(db):
        raise ValueError(f"Prefix size must lie in [1, {len(db)}], got {size}")
    prefix = ReferenceDatabase()
    for ref in list(db)[:size]:
        prefix.insert(ref.object_id, ref.keypoints)
    prefix.apply_params(db.params)
    prefix.reset_uniform()
    return prefix


def bench_matching(db: ReferenceDatabase, sizes, strategy, videos, config: PipelineConfig | None = None, seed=0):
    """
    Per database size: matcher invocations, regions and wall time per frame.

    ``prob`` matches a weighted subset of at most subset_size references per
    region and updates the weights; ``all`` matches every reference.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"Unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    config = config or PipelineConfig()
    rows = []
    for size in sizes:
        invocations, rois, elapsed_ms = [], [], []
        for index, video in enumerate(videos):
            prefix = database_prefix(db, size)
            sampling = np.random.default_rng([seed, size, index])
            matcher = ReferenceMatcher(config.matching, seed=seed)
            for frame in video:
                before = matcher.invocations
                start = time.perf_counter()
                for roi in frame.rois:
                    if strategy == PROB:
                        subset = prefix.sample_subset(config.refdb.subset_size, sampling)
                        _, matched, unmatched = match_roi(prefix, matcher, roi, frame.keypoints, subset)
                        prefix.update(matched, unmatched)
                    else:
                        match_roi(prefix, matcher, roi, frame.keypoints, [ref.id for ref in prefix])
                elapsed_ms.append((time.perf_counter() - start) * 1000.0)
                invocations.append(matcher.invocations - before)
                rois.append(len(frame.rois))
        rows.append({
            'db_size': size,
            'strategy': strategy,
            'mean_invocations': float(np.mean(invocations)) if invocations else 0.0,
            'max_invocations': int(np.max(invocations)) if invocations else 0,
            'mean_rois': float(np.mean(rois)) if rois else 0.0,
            'mean_ms': float(np.mean(elapsed_ms)) if elapsed_ms else 0.0,
        })
        logger.info(f"Benchmark {strategy} n={size}: {rows[-1]['mean_invocations']:.2f} invocations/frame")
    return pd.DataFrame(rows)
