import os
import logging
from dotenv import load_dotenv

# Load environment variables from a .env file
load_dotenv()

OUTPUT_DIR = os.getenv('AIRSINDY_OUTPUT_DIR', 'airsindy_out')
LOG_FILE = os.getenv('AIRSINDY_LOG_FILE', 'airsindy.log')
LOG_LEVEL = os.getenv('AIRSINDY_LOG_LEVEL', 'INFO')


def _env_number(name, default, cast):
    raw = os.getenv(name)
    if raw is None or raw.strip() == '':
        return default
    try:
        return cast(raw)
    except ValueError:
        logging.warning(f"Ignoring invalid value {raw!r} for {name}; using {default}.")
        return default


N_JOBS = _env_number('AIRSINDY_N_JOBS', 1, int)
EPSILON_GUARD = _env_number('AIRSINDY_EPSILON', 1e6, float)


def configure_logging(level=None, filename=None):
    """Sets up file logging for a CLI run."""
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        filename=filename or LOG_FILE,
        filemode='w',
        force=True,
    )
