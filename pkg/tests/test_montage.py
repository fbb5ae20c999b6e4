import numpy as np

from eegid.core.montage import builtin_montage, canonical_channel_names
from eegid.core.protocol import imagery_onset, participant_info, subject_id


def test_thirty_unit_norm_positions():
    montage = builtin_montage()
    assert len(montage.positions) == 30
    xyz = montage.coordinates(canonical_channel_names())
    np.testing.assert_allclose(np.linalg.norm(xyz, axis=1), 1.0, atol=1e-9)


def test_cz_is_vertex():
    np.testing.assert_allclose(builtin_montage().positions["Cz"], (0.0, 0.0, 1.0), atol=1e-12)


def test_homologous_pairs_mirror_in_x():
    positions = builtin_montage().positions
    for left, right in [("C3", "C4"), ("F3", "F4"), ("P7", "P8"), ("O1", "O2"), ("FC5", "FC6")]:
        assert abs(positions[left][0] + positions[right][0]) < 1e-9
        assert abs(positions[left][1] - positions[right][1]) < 1e-9


def test_participant_table_and_ids():
    assert subject_id(0) == "Sub-01"
    assert participant_info(7) == {"id": "Sub-08", "gender": "female", "age": 27}
    assert participant_info(11) == {"id": "Sub-12", "gender": None, "age": None}


def test_imagery_onset_counts_back_from_trial_end():
    assert imagery_onset(1000, 250.0) == 250
    assert imagery_onset(1250, 250.0) == 500
    assert imagery_onset(100, 250.0) == 0
