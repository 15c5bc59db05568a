from fractions import Fraction

import numpy as np
import pytest

from fdrstream.errors import ConfigurationError
from fdrstream.prds import (OverlapKind, OverlapScenario, overlap_starts, prds_sanity_check, run_overlap_grid,
                            run_scenario, table_scenarios)


def test_overlap_starts_exact():
    np.testing.assert_array_equal(overlap_starts(4, 999, Fraction(1, 1000)), [0, 1, 2, 3])
    np.testing.assert_array_equal(overlap_starts(3, 250, Fraction(1, 2)), [125, 250, 375])
    assert overlap_starts(100, 999, Fraction(1, 1000))[-1] == 99


def test_scenario_validation():
    with pytest.raises(ConfigurationError):
        OverlapScenario("overlap", 100)
    with pytest.raises(ConfigurationError):
        OverlapScenario("overlap", 100, 1.5)
    assert OverlapScenario("overlap", 100, "0.05").label == "Over Cal. (s=5%)"


def test_table_has_eleven_strategies():
    sc = table_scenarios(999)
    assert len(sc) == 11
    assert sc[0].strategy is OverlapKind.SAME and sc[-1].strategy is OverlapKind.IID


def test_same_vs_iid_means_close():
    a, _, _ = run_scenario(OverlapScenario("same", 999, replications=4000), seed=1, key=(0,))
    b, _, _ = run_scenario(OverlapScenario("iid", 999, replications=4000), seed=1, key=(1,))
    assert abs(a.mean() - b.mean()) < 4 * np.hypot(a.std(), b.std()) / np.sqrt(4000)


def test_left_column_smaller():
    cells, _ = run_overlap_grid((999, 1000), seed=3, replications=3000, n_permutations=200,
                                shifts=("0.1",))
    by = {(c["strategy"], c["n"]): c["fdr"] for c in cells}
    for s in {c["strategy"] for c in cells}:
        assert by[(s, 999)] < by[(s, 1000)]


def test_upper_bound_for_tuned_n():
    sc = OverlapScenario("overlap", 999, Fraction(1, 20), replications=5000)
    f, _, _ = run_scenario(sc, seed=5)
    assert f.mean() <= 0.099 + 3 * f.std(ddof=1) / np.sqrt(f.size)


def test_prds_independent_flat():
    r = prds_sanity_check(OverlapScenario("iid", 250), seed=1, replications=10_000)
    assert r["flat"] and r["monotone"]


@pytest.mark.parametrize("sc", [OverlapScenario("same", 250), OverlapScenario("overlap", 250, Fraction(1, 2))])
def test_prds_monotone(sc):
    r = prds_sanity_check(sc, seed=2, replications=10_000)
    assert r["monotone"]
    assert sum(r["size"]) == 10_000
