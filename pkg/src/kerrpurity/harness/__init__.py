from .bundle import ResultBundle, StageError, export_bundle, load_bundle, run
from .config import RunConfig, config_from_dict, fixture_config, load_config
from .fixtures import REFERENCE, FIXTURES, get_fixture, list_fixtures, validate_fixture

__all__ = ["REFERENCE", "FIXTURES", "ResultBundle", "RunConfig", "StageError", "config_from_dict",
           "export_bundle", "fixture_config", "get_fixture", "list_fixtures", "load_bundle", "load_config",
           "run", "validate_fixture"]
