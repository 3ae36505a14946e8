try:
    from ._version import __version__  # noqa: F401
except ImportError:  # not installed through setuptools/versioningit
    __version__ = "1+unknown"
