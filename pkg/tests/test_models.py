import pytest

from hybridsmc.model import ModelError, parse_model, serialize_model
from hybridsmc.models import (
    CELL_TYPES, CIRCADIAN_MODES, CIRCADIAN_VARIANTS, PROPERTIES, builtin_model, cardiac_model, case_study,
    circadian_model, property_suite,
)
from hybridsmc.sampler import SamplerConfig, sample_trajectory
from hybridsmc.bltl import parse_bltl


@pytest.mark.parametrize("cell", CELL_TYPES)
def test_cardiac_documents(cell):
    h = cardiac_model(cell)
    assert h.variables == ("u", "v", "w", "s")
    assert h.param_dict["th_v"] == 0.3
    assert h.delta == 0.1
    assert parse_model(serialize_model(h)) == h


def test_cardiac_table_values():
    assert cardiac_model("EPI").param_dict["tau_s2"] == 16
    assert cardiac_model("ENDO").param_dict["tau_v2m"] == 10
    assert cardiac_model("MID").param_dict["u_u"] == 1.61
    assert cardiac_model("EPI", tau_s2=2).param_dict["tau_s2"] == 2
    assert cardiac_model("EPI", "diseased").param_dict["tau_o1"] != cardiac_model("EPI").param_dict["tau_o1"]
    with pytest.raises(ModelError):
        cardiac_model("EPI", bogus=1)
    with pytest.raises(ModelError):
        cardiac_model("ATRIAL")


@pytest.mark.parametrize("variant", CIRCADIAN_VARIANTS)
def test_circadian_documents(variant):
    h = circadian_model(variant)
    assert len(h.modes) == 16
    assert h.mode("m1").constants == tuple(zip(("th_PC1", "th_PC2", "th_PC3", "th_RE", "th_CB"), (1, 1, 0, 1, 0)))
    assert parse_model(serialize_model(h)) == h


def test_circadian_hamming_one():
    h = circadian_model()
    ind = {f"m{i}": row for i, row in enumerate(CIRCADIAN_MODES, start=1)}
    for t in h.transitions:
        assert sum(a != b for a, b in zip(ind[t.source], ind[t.target])) == 1
    # every Hamming-1 pair is connected
    pairs = {(t.source, t.target) for t in h.transitions}
    for a in ind:
        for b in ind:
            if sum(x != y for x, y in zip(ind[a], ind[b])) == 1:
                assert (a, b) in pairs


def test_builtin_uris():
    h = builtin_model("builtin:cardiac?cell=endo&cond=diseased&stim=sustained")
    assert h.name == "cardiac-endo-diseased-sustained"
    assert builtin_model("builtin:circadian?variant=cry-mutant").param_dict["k17"] == 0
    with pytest.raises(ModelError):
        builtin_model("builtin:lorenz")
    with pytest.raises(ModelError):
        builtin_model("builtin:cardiac?tau_s2=abc")


def test_property_suite():
    rows = property_suite()
    assert len(rows) == 22
    assert len(property_suite("cardiac")) == 16 and len(property_suite("circadian")) == 6
    first = rows[0]
    assert (first.property, first.expected, first.samples) == ("C1", True, 459)
    diseased = next(r for r in rows if r.condition == "Epicardial, Diseased")
    assert (diseased.expected, diseased.samples) == (False, 1)
    tau2 = next(r for r in rows if r.condition == "Epicardial, tau_s2=2")
    assert tau2.expected is False
    for r in rows:
        h = builtin_model(r.uri)
        parse_bltl(r.text, labels=h.labels, variables=h.variables, delta=h.delta)
    assert set(PROPERTIES) == {"C1", "C2", "C3", "R1", "R2"}
    assert case_study("circadian").properties == ("R1", "R2")


def test_cardiac_leaves_resting():
    h = cardiac_model("EPI")
    cfg = SamplerConfig(K=500, seed=3)
    left = any(set(sample_trajectory(h, cfg, index=i).mode_sequence()) != {"q0"} for i in range(5))
    assert left
