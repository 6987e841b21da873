import os
import sys
import json
import hashlib
import logging
import numpy as np
import pandas as pd
import numba

__version__ = "0.1.0"


LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s (%(filename)s:%(lineno)d)"


class ColorFormatter(logging.Formatter):
    """Colors the whole record by level; the format itself is LOG_FORMAT."""

    COLORS = {
        logging.DEBUG: "\x1b[38;20m",
        logging.INFO: "\x1b[38;20m",
        logging.WARNING: "\x1b[33;20m",
        logging.ERROR: "\x1b[31;20m",
        logging.CRITICAL: "\x1b[31;1m",
    }
    RESET = "\x1b[0m"

    def __init__(self):
        super().__init__(LOG_FORMAT)
        self.formatters = {level: logging.Formatter(color + LOG_FORMAT + self.RESET)
                           for level, color in self.COLORS.items()}

    def format(self, record):
        formatter = self.formatters.get(record.levelno)
        return formatter.format(record) if formatter else super().format(record)


Logger = logging.getLogger("Normalizer")
_handler = logging.StreamHandler()
_handler.setFormatter(ColorFormatter())
Logger.addHandler(_handler)


def configure_logging(verbose=False, quiet=False):
    Logger.setLevel(logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO)


def _log_uncaught(exc_type, exc_value, exc_traceback):
    if issubclass(exc_type, KeyboardInterrupt):
        sys.__excepthook__(exc_type, exc_value, exc_traceback)
        return
    Logger.critical(f"Uncaught {exc_type.__name__}", exc_info=(exc_type, exc_value, exc_traceback))


sys.excepthook = _log_uncaught


class Randomizer:
    rng = np.random.default_rng()


class Parallel:
    """Thread count used by the numba kernels (None keeps numba's default)."""
    threads = None

    @classmethod
    def apply(cls):
        if cls.threads is None:
            return
        threads = min(int(cls.threads), numba.config.NUMBA_NUM_THREADS)
        Logger.debug(f"Setting numba threads to {threads}")
        numba.set_num_threads(max(threads, 1))


class FileManager:
    saving_enabled = True
    loading_enabled = False
    working_dir = "tmp"
    manifest_hash = None

    @classmethod
    def header_lines(cls):
        lines = [f"normalizer {__version__}"]
        if cls.manifest_hash is not None:
            lines.append(f"manifest sha256:{cls.manifest_hash}")
        return lines

    @staticmethod
    def hash_file(path):
        with open(path, 'rb') as f:
            return hashlib.sha256(f.read()).hexdigest()

    @staticmethod
    def _builtin(value):
        if isinstance(value, np.generic):
            return value.item()
        if isinstance(value, np.ndarray):
            return value.tolist()
        if isinstance(value, set):
            return sorted(value)
        raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")

    @classmethod
    def _prepare(cls, filename):
        full_path = os.path.join(cls.working_dir, filename)
        folder = os.path.dirname(full_path)
        if folder and not os.path.exists(folder):
            Logger.debug(f"Creating folder '{folder}'")
            os.makedirs(folder)
        Logger.debug(f"Saving to '{full_path}'")
        return full_path

    @classmethod
    def save_csv(cls, rows, filename="file.csv", columns=None):
        if not cls.saving_enabled:
            Logger.debug("Saving is disabled.")
            return None
        full_path = cls._prepare(filename)
        frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(rows, columns=columns)
        with open(full_path, 'w') as f:
            for line in cls.header_lines():
                f.write(f"# {line}\n")
            frame.to_csv(f, index=False, float_format='%.17g')
        return full_path

    @classmethod
    def save_json(cls, dictionary, filename="file.json"):
        if not cls.saving_enabled:
            Logger.debug("Saving is disabled.")
            return None
        full_path = cls._prepare(filename)
        with open(full_path, 'w') as f:
            json.dump(dictionary, f, indent=4, default=cls._builtin)
        return full_path

    @classmethod
    def save_text(cls, text, filename="file.txt", header=True):
        if not cls.saving_enabled:
            Logger.debug("Saving is disabled.")
            return None
        full_path = cls._prepare(filename)
        with open(full_path, 'w') as f:
            if header:
                for line in cls.header_lines():
                    f.write(f"# {line}\n")
            f.write(text)
        return full_path

    @classmethod
    def save_figure(cls, figure, filename="figure.svg"):
        if not cls.saving_enabled:
            Logger.debug("Saving is disabled.")
            return None
        full_path = cls._prepare(filename)
        figure.savefig(full_path, format=os.path.splitext(full_path)[1][1:] or 'svg',
                       metadata={'Date': None})
        return full_path

    @classmethod
    def full_path(cls, filename):
        full_path = os.path.join(cls.working_dir, filename)
        if not os.path.exists(full_path):
            raise FileNotFoundError(f"The file '{full_path}' does not exist.")
        return full_path

    @classmethod
    def load_csv(cls, filename):
        full_path = cls.full_path(filename)
        Logger.debug(f"Loading from '{full_path}'")
        return pd.read_csv(full_path, comment='#')

    @classmethod
    def load_json(cls, filename):
        full_path = cls.full_path(filename)
        Logger.debug(f"Loading from '{full_path}'")
        with open(full_path) as f:
            return json.load(f)

    @classmethod
    def load_text(cls, filename):
        full_path = cls.full_path(filename)
        Logger.debug(f"Loading from '{full_path}'")
        with open(full_path) as f:
            return f.read()
