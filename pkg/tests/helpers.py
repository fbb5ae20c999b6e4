import numpy as np

from eegid.core.models import FeatureMatrix, RecordingMeta, Session, Trial
from eegid.core.montage import canonical_channel_names


def make_session(n_channels=4, n_trials=3, n_samples=20, seed=0, subject="Sub-01", index=1, fs=250.0):
    """Random float32-exact session on the first n canonical channels"""
    rng = np.random.default_rng(seed)
    names = canonical_channel_names()[:n_channels]
    trials = [
        Trial(label_id=k % 5, bad=False, samples=rng.standard_normal((n_channels, n_samples)).astype(np.float32))
        for k in range(n_trials)
    ]
    meta = RecordingMeta(sampling_rate_hz=fs, channel_names=names)
    return Session(subject_id=subject, session_index=index, meta=meta, trials=trials)


def make_features(values, subjects, sessions, names=None):
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    return FeatureMatrix(
        values=values,
        subject_labels=np.asarray(subjects),
        session_indices=np.asarray(sessions),
        trial_indices=np.arange(n),
        word_labels=np.zeros(n, dtype=int),
        feature_names=names or [f"x{i}" for i in range(values.shape[1])],
        subject_ids=[f"Sub-{k + 1:02d}" for k in range(int(np.max(subjects)) + 1)],
    )


def blob_features(rng, n_classes=3, per_session=6, sessions=(1, 2, 3, 4, 5), n_features=4, spread=0.3):
    """Well separated Gaussian clusters, one per class, in every session"""
    centers = rng.normal(scale=3.0, size=(n_classes, n_features))
    rows, subjects, session_ids = [], [], []
    for session in sessions:
        for c in range(n_classes):
            rows.append(centers[c] + spread * rng.standard_normal((per_session, n_features)))
            subjects.extend([c] * per_session)
            session_ids.extend([session] * per_session)
    return make_features(np.vstack(rows), subjects, session_ids)
