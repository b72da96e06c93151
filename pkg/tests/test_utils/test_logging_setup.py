import json
import logging

import pytest

from ndf.errors import ProjectionError
from ndf.utils.logging import CustomJsonFormatter, configure_logging, current_stage, log_stage


def _record(message):
    return logging.LogRecord('ndf.test', logging.INFO, __file__, 1, message, None, None)


def test_stage_is_scoped():
    assert current_stage() is None
    with log_stage('extract'):
        assert current_stage() == 'extract'
        with log_stage('geodesic'):
            assert current_stage() == 'geodesic'
        assert current_stage() == 'extract'
    assert current_stage() is None


def test_errors_leaving_a_stage_are_tagged():
    with pytest.raises(ProjectionError) as info:
        with log_stage('train'):
            raise ProjectionError("all projections failed")
    assert info.value.stage == 'train'
    assert info.value.to_dict()['stage'] == 'train'


def test_inner_stage_wins():
    with pytest.raises(ProjectionError) as info:
        with log_stage('train'):
            with log_stage('sample'):
                raise ProjectionError("failed")
    assert info.value.stage == 'sample'


def test_json_records_carry_stage():
    formatter = CustomJsonFormatter('%(timestamp)s %(level)s %(name)s %(message)s')
    with log_stage('pack'):
        payload = json.loads(formatter.format(_record('packed')))
    assert payload['stage'] == 'pack'
    assert payload['level'] == 'INFO'
    assert payload['logger'] == 'ndf.test'
    assert 'timestamp' in payload
    assert 'stage' not in json.loads(formatter.format(_record('idle')))


@pytest.fixture
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers:
        handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)


def test_configure_logging_writes_json_to_the_log_file(tmp_path, restore_root_logger):
    log_file = tmp_path / 'ndf.log'

    class FileConfig:
        LOG_LEVEL = 'WARNING'
        LOG_FORMAT = 'json'
        LOG_FILE = str(log_file)

    configure_logging(FileConfig)
    logging.getLogger('ndf.test').info('dropped')
    with log_stage('eigen'):
        logging.getLogger('ndf.test').warning('kept')
    for handler in logging.getLogger().handlers:
        handler.flush()
    (line,) = log_file.read_text().splitlines()
    payload = json.loads(line)
    assert payload['message'] == 'kept'
    assert payload['stage'] == 'eigen'


def test_debug_config_lowers_the_level(restore_root_logger):
    class DebugConfig:
        DEBUG = True
        LOG_LEVEL = 'ERROR'
        LOG_FORMAT = 'text'

    configure_logging(DebugConfig)
    assert logging.getLogger().level == logging.DEBUG
