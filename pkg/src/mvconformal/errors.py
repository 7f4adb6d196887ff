"""Error types mapped to CLI exit codes (config -> 1, data -> 2)."""


class ConfigError(ValueError):
    """Malformed config/manifest file or invalid experiment settings."""


class DataError(ValueError):
    """Unusable input data: missing files, bad cells, misaligned views."""
