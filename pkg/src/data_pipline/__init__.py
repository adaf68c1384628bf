"""  Package for panel ingestion, experiment configuration files and the panel models   """

__version__ = "1.0.0"
