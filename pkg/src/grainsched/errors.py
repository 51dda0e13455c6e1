class GrainschedError(Exception):
    exit_code = 1


class ConfigError(GrainschedError):
    """Invalid scenario, job or command-line input."""
    exit_code = 2


class InvariantError(GrainschedError):
    """An internal consistency check failed; indicates a bug, not bad input."""
    exit_code = 3
