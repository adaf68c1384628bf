"""
Contains the singleton logger for the application.

To be used in composition with all other classes: every module asks the
singleton for a child of the ``targeting`` logger instead of configuring
logging on its own. Output goes to stderr so result files and stdout stay
byte-stable.

"""
import logging
import os
import sys


class AppLogger:
    """ House a singleton logger for the application"""

    __instance = None

    _ROOT_NAME: str = "targeting"
    _LEVEL_ENV_VAR: str = "TARGETING_LOG_LEVEL"
    _FORMAT: str = "%(asctime)s %(levelname)s %(name)s: %(message)s"

    def __new__(cls):
        if cls.__instance is None:
            cls.__instance = super().__new__(cls)
            cls.__instance._configure()
        return cls.__instance

    def _configure(self) -> None:
        self._root = logging.getLogger(self._ROOT_NAME)
        if not self._root.handlers:
            handler = logging.StreamHandler(sys.stderr)
            handler.setFormatter(logging.Formatter(self._FORMAT))
            self._root.addHandler(handler)
        self._root.propagate = False
        self.set_level(os.getenv(self._LEVEL_ENV_VAR, "INFO"))

    def set_level(self, level: str | int) -> None:
        """ Unknown level names fall back to INFO """
        if isinstance(level, str):
            level = logging.getLevelName(level.upper())
            if not isinstance(level, int):
                level = logging.INFO
        self._root.setLevel(level)

    def get_logger(self, name: str) -> logging.Logger:
        """
        Return a child logger of the application root.

        :param name: usually the caller's ``__name__``
        """
        if name.startswith("src."):
            name = name[len("src."):]
        return self._root.getChild(name)
