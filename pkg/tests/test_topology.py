import pytest

from microconv.topology import TOPOLOGIES, Topology, describe, format_topologies, require_simulatable


def test_all_four_topologies_described():
    assert [d.tag for d in TOPOLOGIES] == list(Topology)
    text = format_topologies()
    for t in Topology:
        assert t.value in text


@pytest.mark.parametrize("tag", ["QUASI_SINGLE", "SINGLE_STAGE"])
def test_descriptors_only(tag):
    assert not describe(tag).simulated
    with pytest.raises(NotImplementedError, match="descriptor only"):
        require_simulatable(tag)


@pytest.mark.parametrize("tag", ["FULL_WAVE", "DUAL_STAGE"])
def test_simulated_topologies(tag):
    assert require_simulatable(tag) is Topology(tag)
