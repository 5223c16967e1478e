"""Exception hierarchy. Every class carries a stable CLI exit code."""


class DritrError(Exception):
    exit_code = 1


class ConfigError(DritrError):
    exit_code = 2


class SchemaError(DritrError):
    exit_code = 3


class ParseError(DritrError):
    exit_code = 4


class OverlapError(DritrError):
    exit_code = 5


class DomainError(DritrError, ValueError):
    exit_code = 6


class DimensionError(DritrError, ValueError):
    exit_code = 7


class UnsupportedDepthError(ConfigError):
    exit_code = 8
