import os

_threads = None


def set_num_threads(n):
    """Cap library parallelism. ``0`` means one worker per CPU."""
    global _threads
    if n < 0:
        raise ValueError("thread count must be >= 0")
    _threads = int(n)


def get_num_threads():
    n = _threads
    if n is None:
        try:
            n = int(os.environ.get("GEMBED_THREADS", "0"))
        except ValueError:
            n = 0
    if n <= 0:
        n = os.cpu_count() or 1
    return n
