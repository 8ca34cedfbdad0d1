import pytest

from fairrank.domain import GroupLabel
from fairrank.noise import Direction
from fairrank.noise import FixtureRecord
from fairrank.noise import GRID_LEVELS
from fairrank.noise import InferenceFixture
from fairrank.noise import NoiseScenario
from fairrank.noise import apply_fixture
from fairrank.noise import flip_set
from fairrank.noise import load_fixtures
from fairrank.noise import perturb
from fairrank.noise import save_fixtures
from fairrank.noise import scenario_grid
from fairrank.utils import DataError
from fairrank.utils import SchemaError
from fairrank.utils import UnresolvedGroupError
from fairrank.utils import round_half_up

DIS = GroupLabel.DISADVANTAGED
ADV = GroupLabel.ADVANTAGED


def test_grid_has_47_scenarios_per_direction():
    assert GRID_LEVELS == (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
    for direction in Direction:
        grid = scenario_grid(direction, seed=3)
        assert len(grid) == 47
        assert grid[0].epsilon == 0.0 and grid[-1].epsilon == 1.0
        assert all(s.direction is direction and s.seed == 3 for s in grid)
        assert len(set(grid)) == 47
        assert sum(1 for s in grid if s.epsilon == 0.5) == 5


def test_scenario_validation():
    with pytest.raises(ValueError):
        NoiseScenario(Direction.BIDIRECTIONAL, 1.5)
    with pytest.raises(ValueError):
        NoiseScenario(Direction.BIDIRECTIONAL, -0.1)
    with pytest.raises(ValueError):
        NoiseScenario(Direction.BIDIRECTIONAL, 0.1, replicate=-1)


def test_direction_sources():
    assert Direction.DIS_TO_ADV.source_groups == (DIS,)
    assert Direction.ADV_TO_DIS.source_groups == (ADV,)
    assert set(Direction.BIDIRECTIONAL.source_groups) == {DIS, ADV}
    assert [d.index for d in Direction] == [0, 1, 2]


@pytest.mark.parametrize('direction', list(Direction))
def test_flip_counts(wnba_test, direction):
    by_id = wnba_test.by_id()
    for epsilon in (0.0, 0.1, 0.35, 1.0):
        flipped = flip_set(wnba_test, NoiseScenario(direction, epsilon))
        for g, size in ((DIS, 218), (ADV, 774)):
            count = sum(1 for cid in flipped if by_id[cid].true_group is g)
            expected = (round_half_up(epsilon * size)
                        if g in direction.source_groups else 0)
            assert count == expected


def test_flip_sets_grow_with_epsilon(wnba_test):
    previous = frozenset()
    for epsilon in (0.0,) + GRID_LEVELS + (1.0,):
        scenario = NoiseScenario(Direction.BIDIRECTIONAL, epsilon, 4, 2)
        flipped = flip_set(wnba_test, scenario)
        assert previous <= flipped
        previous = flipped


def test_flips_are_seeded(wnba_test):
    a = flip_set(wnba_test, NoiseScenario(Direction.BIDIRECTIONAL, 0.3, 1, 0))
    b = flip_set(wnba_test, NoiseScenario(Direction.BIDIRECTIONAL, 0.3, 1, 0))
    c = flip_set(wnba_test, NoiseScenario(Direction.BIDIRECTIONAL, 0.3, 1, 1))
    d = flip_set(wnba_test, NoiseScenario(Direction.BIDIRECTIONAL, 0.3, 2, 0))
    assert a == b
    assert a != c
    assert a != d


def test_perturb_mirrors_observed_labels(wnba_test):
    scenario = NoiseScenario(Direction.ADV_TO_DIS, 0.2)
    perturbed = perturb(wnba_test, scenario)
    flipped = flip_set(wnba_test, scenario)
    for before, after in zip(wnba_test.candidates, perturbed.candidates):
        assert after.true_group is before.true_group
        if after.id in flipped:
            assert after.observed_group is before.observed_group.mirror
        else:
            assert after.observed_group is before.observed_group
    assert wnba_test.observed_groups() == wnba_test.true_groups()


def test_full_bidirectional_flip_is_an_involution(wnba_test):
    scenario = NoiseScenario(Direction.BIDIRECTIONAL, 1.0)
    once = perturb(wnba_test, scenario)
    assert all(c.observed_group is c.true_group.mirror
               for c in once.candidates)
    assert perturb(once, scenario) == wnba_test


def test_perturb_rejects_unknowns(make_dataset):
    dataset = make_dataset([2.0, 1.0], [DIS, ADV], observed=[None, ADV])
    with pytest.raises(UnresolvedGroupError):
        perturb(dataset, NoiseScenario(Direction.BIDIRECTIONAL, 0.5))


def _service_fixture(test):
    """931 correct, 39 incorrect, 22 unknown (7 dis, 15 adv)."""
    dis = [c.id for c in test.candidates if c.true_group is DIS]
    adv = [c.id for c in test.candidates if c.true_group is ADV]
    unknown = set(dis[:7] + adv[:15])
    incorrect = set(dis[7:17] + adv[15:44])
    records = []
    for c in test.candidates:
        if c.id in unknown:
            label = None
        elif c.id in incorrect:
            label = c.true_group.mirror
        else:
            label = c.true_group
        records.append(FixtureRecord(c.id, c.name, label))
    return InferenceFixture('service-a', tuple(records))


def test_fixture_bookkeeping(wnba_test):
    observed, report = apply_fixture(wnba_test, _service_fixture(wnba_test))
    assert report.n == 992
    assert report.correct == 931
    assert report.incorrect == 39
    assert report.unknown == 22
    assert report.unknown_by_group == {DIS: 7, ADV: 15}
    assert report.incorrect_by_group == {DIS: 10, ADV: 29}
    assert report.dis_assignments == 22
    assert report.misassigned_unknown == 15
    assert report.effective_error_rate == pytest.approx((39 + 15) / 992)
    assert not observed.has_unknowns()
    wrong = sum(1 for c in observed.candidates
                if c.observed_group is not c.true_group)
    assert wrong / 992 == pytest.approx(report.effective_error_rate)
    assert report.to_dict()['unknown_by_group'] == {'dis': 7, 'adv': 15}


def test_fixture_file_round_trip(wnba_test, tmp_path):
    fixture = _service_fixture(wnba_test)
    other = InferenceFixture('service-b', tuple(
        FixtureRecord(None, r.name, r.inferred_label)
        for r in fixture.records))
    save_fixtures([fixture, other], tmp_path / 'services.csv')
    loaded = load_fixtures(tmp_path / 'services.csv')
    assert set(loaded) == {'service-a', 'service-b'}
    assert loaded['service-a'] == fixture
    # service-b joins by name.
    _, report_a = apply_fixture(wnba_test, loaded['service-a'])
    _, report_b = apply_fixture(wnba_test, loaded['service-b'])
    assert report_a.effective_error_rate == report_b.effective_error_rate


def test_fixture_join_errors(small_dataset, caplog):
    records = [FixtureRecord(c.id, c.name, c.true_group)
               for c in small_dataset.candidates]
    with pytest.raises(DataError, match='no inferred label'):
        apply_fixture(small_dataset,
                      InferenceFixture('s', tuple(records[1:])))
    with pytest.raises(DataError, match='twice'):
        apply_fixture(small_dataset,
                      InferenceFixture('s', tuple(records + records[:1])))
    extra = FixtureRecord(999, 'nobody', DIS)
    _, report = apply_fixture(small_dataset,
                              InferenceFixture('s', tuple(records + [extra])))
    assert report.correct == 10


def test_fixture_file_errors(write_text):
    with pytest.raises(SchemaError):
        load_fixtures(write_text('f.csv', ['id,name,service', '1,a,s']))
    with pytest.raises(DataError, match='line 2'):
        load_fixtures(write_text('f.csv', ['id,name,service,inferred_label',
                                           '1,a,s,female']))
    with pytest.raises(DataError):
        load_fixtures(write_text('f.csv', ['id,name,service,inferred_label',
                                           ',,s,dis']))
