import time
from types import SimpleNamespace

import pytest
from hypothesis import settings

from rubble_probe import metrics, synth
from rubble_probe.pipeline import train_pipeline

settings.register_profile("suite", deadline=None, max_examples=50)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def desk_dataset():
    """120 clips per class at seed 42, split 84/16; no files written."""
    t0 = time.perf_counter()
    manifest = synth.generate_dataset(120, out_dir=None, seed=42, write_files=False)
    train_clips, train_labels = synth.synth_split(manifest, "train")
    test_clips, test_labels = synth.synth_split(manifest, "test")
    return SimpleNamespace(
        manifest=manifest,
        train_clips=train_clips,
        train_labels=train_labels,
        test_clips=test_clips,
        test_labels=test_labels,
        seconds=time.perf_counter() - t0,
    )


@pytest.fixture(scope="session")
def trained(desk_dataset):
    """Default pipeline trained on the session dataset (default schedule)."""
    t0 = time.perf_counter()
    pipe, history = train_pipeline(desk_dataset.train_clips, desk_dataset.train_labels)
    return SimpleNamespace(pipeline=pipe, history=history, seconds=time.perf_counter() - t0)


@pytest.fixture(scope="session")
def held_out(trained, desk_dataset):
    """Decisions, confusion matrix, and report on the held-out split."""
    t0 = time.perf_counter()
    decisions = [trained.pipeline.predict_clip(c).decision for c in desk_dataset.test_clips]
    matrix = metrics.confusion(decisions, desk_dataset.test_labels)
    report = metrics.metrics_from_confusion(matrix)
    return SimpleNamespace(
        decisions=decisions, matrix=matrix, report=report, seconds=time.perf_counter() - t0
    )
