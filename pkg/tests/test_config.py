import json
from pathlib import Path

import pytest

from fairrank.config import DatasetSource
from fairrank.config import ExperimentConfig
from fairrank.config import NoiseConfig
from fairrank.config import SyntheticSpec
from fairrank.config import load_config
from fairrank.config import load_schema
from fairrank.config import save_config
from fairrank.config import save_schema
from fairrank.config import with_overrides
from fairrank.ingest import DatasetSchema
from fairrank.listwise import TrainingConfig
from fairrank.noise import Direction
from fairrank.utils import SchemaError

FULL = [
    '[experiment]',
    'name = wnba',
    'output_dir = out  # next to this file',
    'workers = 2',
    '',
    '[dataset]',
    'csv_path = data/wnba.csv',
    'id_column = player_id',
    'judgment_column = score',
    'group_column = sex',
    'feature_columns = height, weight, points',
    'disadvantaged_value = F',
    'name_column = player',
    '',
    '[split]',
    'fraction = 0.8',
    'seed = 4',
    '',
    '[training]',
    'learning_rate = 0.01',
    'epochs = 300',
    '',
    '[fairness]',
    'gamma = auto',
    'gamma_threshold = 0.1',
    '',
    '[noise]',
    'directions = dis_to_adv, adv_to_dis',
    'replicates = 3',
    '',
    '[metrics]',
    'ndcg_cutoffs = 10, 20',
    'skew_cutoffs = 5',
    'ndkl_cutoff = all',
    '',
    '[fixtures]',
    'path = services.csv',
]


def test_defaults(write_text, tmp_path):
    config = load_config(write_text('e.ini', ['[experiment]', 'name = x']))
    assert config.name == 'x'
    assert config.output_dir == tmp_path / 'results'
    assert config.dataset is None
    assert config.synthetic == SyntheticSpec()
    assert config.noise == NoiseConfig()
    assert config.fairness.gamma is None
    assert config.fixtures_path is None


def test_full_file(write_text, tmp_path):
    config = load_config(write_text('e.ini', FULL))
    assert config.name == 'wnba'
    assert config.output_dir == tmp_path / 'out'
    assert config.workers == 2
    assert config.dataset.csv_path == tmp_path / 'data' / 'wnba.csv'
    assert config.dataset.schema == DatasetSchema(
        'player_id', 'score', 'sex', ('height', 'weight', 'points'),
        disadvantaged_value='F', name_column='player')
    assert config.split.seed == 4
    assert config.training == TrainingConfig(learning_rate=0.01, epochs=300)
    assert config.fairness.base == config.training
    assert config.fairness.gamma_threshold == 0.1
    assert config.noise.directions == (Direction.DIS_TO_ADV,
                                       Direction.ADV_TO_DIS)
    assert config.noise.replicates == 3
    assert config.metrics.ndcg_cutoffs == (10, 20)
    assert config.metrics.skew_cutoffs == (5,)
    assert config.metrics.ndkl_cutoff is None
    assert config.fixtures_path == tmp_path / 'services.csv'


def test_explicit_gamma(write_text):
    config = load_config(write_text('e.ini', ['[fairness]', 'gamma = 2.5']))
    assert config.fairness.gamma == 2.5


def test_save_and_load(write_text, tmp_path):
    config = load_config(write_text('e.ini', FULL))
    save_config(config, tmp_path / 'again.ini')
    assert load_config(tmp_path / 'again.ini') == config
    default = ExperimentConfig(output_dir=tmp_path / 'results')
    save_config(default, tmp_path / 'default.ini')
    assert load_config(tmp_path / 'default.ini') == default


def test_to_dict_is_json(write_text):
    config = load_config(write_text('e.ini', FULL))
    data = json.loads(json.dumps(config.to_dict()))
    assert data['dataset']['schema']['feature_columns'] == [
        'height', 'weight', 'points']
    assert data['noise']['directions'] == ['dis_to_adv', 'adv_to_dis']
    assert data['fairness']['gamma'] is None
    assert 'base' not in data['fairness']


@pytest.mark.parametrize('lines, match', [
    (['[training]', 'epoch = 3'], 'unknown key'),
    (['[training]', 'seed = 1'], 'unknown key'),
    (['[trianing]', 'epochs = 3'], 'unknown section'),
    (['[training]', 'epochs = many'], 'cannot parse'),
    (['[training]', 'learning_rate = 0'], r'\[training\]'),
    (['[noise]', 'directions = sideways'], 'cannot parse'),
    (['[experiment]', 'workers = 0'], 'workers'),
    (['[dataset]', 'id_column = id'], 'csv_path'),
    (['[dataset]', 'csv_path = d.csv', 'id_column = id'], 'missing key'),
])
def test_config_errors(write_text, lines, match):
    with pytest.raises(SchemaError, match=match):
        load_config(write_text('e.ini', lines))


def test_missing_file(tmp_path):
    with pytest.raises(SchemaError):
        load_config(tmp_path / 'absent.ini')


def test_schema_file(write_text, tmp_path):
    schema = DatasetSchema('id', 'score', 'sex', ('a', 'b'),
                           disadvantaged_value='F')
    save_schema(schema, tmp_path / 'schema.ini')
    assert load_schema(tmp_path / 'schema.ini') == schema
    config = load_config(write_text('e.ini', [
        '[dataset]', 'csv_path = d.csv', 'schema_path = schema.ini']))
    assert config.dataset == DatasetSource(tmp_path / 'd.csv', schema)
    with pytest.raises(SchemaError):
        load_schema(write_text('s.ini', ['[other]', 'a = 1']))


def test_overrides():
    config = ExperimentConfig()
    changed = with_overrides(config, seed=9, output_dir='elsewhere',
                             directions=[Direction.ADV_TO_DIS])
    assert changed.split.seed == 9
    assert changed.noise.seed == 9
    assert changed.synthetic.seed == 9
    assert changed.training == config.training
    assert changed.output_dir == Path('elsewhere')
    assert changed.noise.directions == (Direction.ADV_TO_DIS,)
    assert with_overrides(config) == config
