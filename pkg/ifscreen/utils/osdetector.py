from platform import system


def is_linux() -> bool:
    return system() == 'Linux'


def start_method() -> str:
    """
    Process start method for worker pools: fork where it is safe to
    fork a process that already imported numpy, spawn everywhere else
    """

    return 'fork' if is_linux() else 'spawn'
