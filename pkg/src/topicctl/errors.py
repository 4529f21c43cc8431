class ConfigError(ValueError):
    """Invalid configuration or input; the CLI maps this to exit code 1."""


class BackendError(RuntimeError):
    """A remote embedding or labeling service failed; CLI exit code 2."""
