import json

import numpy as np
import pytest
from pydantic import ValidationError

from eegid.core.errors import (
    BadMagicError,
    InvariantViolationError,
    ManifestError,
    SessionFormatError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from eegid.core.models import DatasetManifest, RecordingMeta, Session
from eegid.core.protocol import WORD_VOCABULARY
from eegid.services.session_io import (
    decode_session,
    drop_bad_trials,
    encode_session,
    load_manifest,
    read_session,
    save_manifest,
    write_session,
)

from tests.helpers import make_session


def test_write_then_read_gives_equal_session(tmp_path):
    session = make_session(n_channels=5, n_trials=4, n_samples=37)
    path = tmp_path / "s.ceeg"
    write_session(session, path)
    loaded = read_session(path, subject_id=session.subject_id, session_index=session.session_index)
    assert loaded.meta == session.meta
    assert loaded.trials == session.trials


def test_file_size_follows_layout():
    session = make_session(n_channels=30, n_trials=100, n_samples=500)
    name_bytes = sum(1 + len(name.encode("utf-8")) for name in session.meta.channel_names)
    expected = 20 + name_bytes + 100 * (7 + 30 * 500 * 4)
    assert len(encode_session(session)) == expected


def test_zero_channels_rejected():
    with pytest.raises(ValidationError):
        RecordingMeta(sampling_rate_hz=250.0, channel_names=[])


def test_bypassed_validation_is_caught_on_write(tmp_path):
    good = make_session(n_channels=2, n_trials=1)
    broken = Session.model_construct(
        subject_id="Sub-01",
        session_index=1,
        meta=RecordingMeta.model_construct(sampling_rate_hz=250.0, channel_names=[], n_channels=0),
        trials=good.trials,
        provenance=None,
    )
    with pytest.raises(InvariantViolationError, match="invariant violation"):
        write_session(broken, tmp_path / "broken.ceeg")
    assert not (tmp_path / "broken.ceeg").exists()


def test_bad_magic():
    data = bytearray(encode_session(make_session()))
    data[0:1] = b"X"
    with pytest.raises(BadMagicError, match="bad magic"):
        decode_session(bytes(data), "Sub-01", 1)


def test_unsupported_version():
    data = bytearray(encode_session(make_session()))
    data[4] = 2
    with pytest.raises(UnsupportedVersionError):
        decode_session(bytes(data), "Sub-01", 1)


@pytest.mark.parametrize("offset", range(6))
def test_every_header_byte_corruption_is_typed(offset):
    original = encode_session(make_session(n_channels=2, n_trials=1, n_samples=4))
    for value in range(256):
        if value == original[offset]:
            continue
        data = bytearray(original)
        data[offset] = value
        with pytest.raises(SessionFormatError):
            decode_session(bytes(data), "Sub-01", 1)


def test_truncated_mid_trial():
    data = encode_session(make_session(n_trials=2, n_samples=50))
    with pytest.raises(TruncatedPayloadError, match="truncated payload"):
        decode_session(data[: len(data) - 13], "Sub-01", 1)


def test_trailing_bytes_rejected():
    data = encode_session(make_session())
    with pytest.raises(SessionFormatError):
        decode_session(data + b"\x00", "Sub-01", 1)


def test_drop_bad_trials_keeps_order():
    session = make_session(n_trials=10)
    flagged = [t.model_copy(update={"bad": k in (1, 4, 7)}) for k, t in enumerate(session.trials)]
    marked = session.replace_trials(flagged)
    kept = drop_bad_trials(marked)
    assert kept.n_trials == 7
    assert [t.label_id for t in kept.trials] == [t.label_id for k, t in enumerate(flagged) if k not in (1, 4, 7)]


def test_drop_bad_trials_identity_and_all_bad():
    session = make_session(n_trials=4)
    assert drop_bad_trials(session).trials == session.trials
    all_bad = session.replace_trials([t.model_copy(update={"bad": True}) for t in session.trials])
    assert drop_bad_trials(all_bad).trials == []


def test_drop_bad_trials_is_idempotent():
    session = make_session(n_trials=6)
    flagged = session.replace_trials([t.model_copy(update={"bad": k % 2 == 0}) for k, t in enumerate(session.trials)])
    once = drop_bad_trials(flagged)
    twice = drop_bad_trials(once)
    assert twice.trials == once.trials
    assert twice.n_trials == 3


def test_manifest_round_trip(small_dataset, tmp_path):
    manifest = load_manifest(small_dataset)
    copy_path = tmp_path / "manifest.json"
    save_manifest(manifest, copy_path)
    assert load_manifest(copy_path, check_paths=False) == manifest


def test_manifest_counts_sessions(small_dataset):
    manifest = load_manifest(small_dataset)
    assert manifest.n_sessions == 3 * 5
    assert manifest.subject_ids() == ["Sub-01", "Sub-02", "Sub-03"]


def test_manifest_needs_five_labels(tmp_path):
    document = {
        "subjects": [],
        "labels": [label.model_dump() for label in WORD_VOCABULARY[:4]],
        "sampling_rate_hz": 250.0,
    }
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    with pytest.raises(ManifestError, match="label vocabulary must have 5 entries"):
        load_manifest(path)


def test_manifest_unresolvable_path(tmp_path):
    manifest = DatasetManifest.model_validate({
        "subjects": [{"id": "Sub-01", "sessions": [{"index": 1, "path": "missing.ceeg", "n_trials": 1}]}],
        "labels": [label.model_dump() for label in WORD_VOCABULARY],
        "sampling_rate_hz": 250.0,
    })
    save_manifest(manifest, tmp_path / "manifest.json")
    with pytest.raises(ManifestError, match="unresolvable path"):
        load_manifest(tmp_path / "manifest.json")


def test_amplitudes_survive_as_float32(tmp_path):
    session = make_session(n_channels=3, n_trials=1, n_samples=8, seed=3)
    write_session(session, tmp_path / "a.ceeg")
    loaded = read_session(tmp_path / "a.ceeg")
    assert loaded.trials[0].samples.dtype == np.float64
    np.testing.assert_array_equal(loaded.trials[0].samples, session.trials[0].samples)
